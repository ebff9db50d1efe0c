# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same signatures and results."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def block_series(s, int m, long nmax, double rtol):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sv = np.ascontiguousarray(
        np.atleast_1d(np.asarray(s, dtype=np.float64)).ravel())
    cdef Py_ssize_t npts = sv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] S_out = np.empty(npts)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dS_out = np.empty(npts)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d2S_out = np.empty(npts)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nt_out = np.empty(npts, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tail_out = np.empty(npts)
    cdef Py_ssize_t i
    cdef long k
    cdef double x, t, S, dS, d2S, ratio, rb, tl, kk
    for i in range(npts):
        x = sv[i]
        t = 1.0
        S = 0.0
        dS = 0.0
        d2S = 0.0
        tl = INFINITY
        k = 0
        while k < nmax:
            kk = <double>k
            S += t
            dS += kk * t
            d2S += kk * (kk - 1.0) * t
            ratio = x * (m + kk + 1.0) / (kk + 1.0)
            t = t * ratio
            k += 1
            rb = x * (m + kk + 2.0) / (kk + 2.0)
            if t == 0.0:
                tl = 0.0
                break
            if rb < 1.0:
                tl = t / (1.0 - rb)
                if tl <= rtol * S:
                    break
            else:
                tl = INFINITY
        if x != 0.0:
            dS = dS / x
            d2S = d2S / (x * x)
        else:
            dS = m + 1.0
            d2S = (m + 1.0) * (m + 2.0)
        S_out[i] = S
        dS_out[i] = dS
        d2S_out[i] = d2S
        nt_out[i] = k
        tail_out[i] = tl
    shape = np.shape(np.atleast_1d(np.asarray(s)))
    return (S_out.reshape(shape), dS_out.reshape(shape), d2S_out.reshape(shape),
            nt_out.reshape(shape), tail_out.reshape(shape))


def poly_eval(zs, alpha, beta, coef):
    cdef double complex[:, ::1] z = np.ascontiguousarray(zs, dtype=np.complex128)
    cdef long long[:, ::1] al = np.ascontiguousarray(alpha, dtype=np.int64)
    cdef long long[:, ::1] be = np.ascontiguousarray(beta, dtype=np.int64)
    cdef double complex[::1] c = np.ascontiguousarray(coef, dtype=np.complex128)
    cdef Py_ssize_t npts = z.shape[0], n = z.shape[1], nterms = c.shape[0]
    cdef long long maxdeg = 0
    if nterms:
        maxdeg = max(np.max(alpha), np.max(beta))
    P_ = np.zeros(npts, np.complex128)
    Pz_ = np.zeros((npts, n), np.complex128)
    Pzb_ = np.zeros((npts, n), np.complex128)
    Pzz_ = np.zeros((npts, n, n), np.complex128)
    Pzzb_ = np.zeros((npts, n, n), np.complex128)
    Pzbzb_ = np.zeros((npts, n, n), np.complex128)
    cdef double complex[::1] P = P_
    cdef double complex[:, ::1] Pz = Pz_, Pzb = Pzb_
    cdef double complex[:, :, ::1] Pzz = Pzz_, Pzzb = Pzzb_, Pzbzb = Pzbzb_
    # pw[j, e] = z_j**e, pwb[j, e] = conj(z_j)**e; ea/eb hold shifted exponents
    cdef double complex[:, ::1] pw = np.empty((n, maxdeg + 1), np.complex128)
    cdef double complex[:, ::1] pwb = np.empty((n, maxdeg + 1), np.complex128)
    cdef long long[::1] ea = np.empty(n, np.int64), eb = np.empty(n, np.int64)
    cdef Py_ssize_t p, j, k, tt, e
    cdef double complex zj, cc
    for p in range(npts):
        for j in range(n):
            zj = z[p, j]
            pw[j, 0] = 1.0
            pwb[j, 0] = 1.0
            for e in range(1, maxdeg + 1):
                pw[j, e] = pw[j, e - 1] * zj
                pwb[j, e] = pwb[j, e - 1] * zj.conjugate()
        for tt in range(nterms):
            cc = c[tt]
            P[p] += _mono(cc, pw, pwb, al, be, ea, eb, tt, n, -1, 0, -1, 0)
            for j in range(n):
                Pz[p, j] += _mono(cc, pw, pwb, al, be, ea, eb, tt, n, j, 1, -1, 0)
                Pzb[p, j] += _mono(cc, pw, pwb, al, be, ea, eb, tt, n, j, 0, -1, 0)
                for k in range(n):
                    Pzz[p, j, k] += _mono(cc, pw, pwb, al, be, ea, eb, tt, n, j, 1, k, 1)
                    Pzzb[p, j, k] += _mono(cc, pw, pwb, al, be, ea, eb, tt, n, j, 1, k, 0)
                    Pzbzb[p, j, k] += _mono(cc, pw, pwb, al, be, ea, eb, tt, n, j, 0, k, 0)
    return P_, Pz_, Pzb_, Pzz_, Pzzb_, Pzbzb_


cdef inline double complex _mono(double complex cc, double complex[:, ::1] pw,
                                 double complex[:, ::1] pwb, long long[:, ::1] al,
                                 long long[:, ::1] be, long long[::1] ea, long long[::1] eb,
                                 Py_ssize_t tt, Py_ssize_t n, Py_ssize_t j, int j_holo,
                                 Py_ssize_t k, int k_holo) noexcept nogil:
    # up to two Wirtinger derivatives of one monomial; index -1 means none,
    # *_holo selects d/dz (1) or d/dzbar (0)
    cdef Py_ssize_t q
    cdef double complex f = cc
    for q in range(n):
        ea[q] = al[tt, q]
        eb[q] = be[tt, q]
    if j >= 0:
        if j_holo:
            f = f * ea[j]
            ea[j] -= 1
        else:
            f = f * eb[j]
            eb[j] -= 1
    if k >= 0:
        if k_holo:
            f = f * ea[k]
            ea[k] -= 1
        else:
            f = f * eb[k]
            eb[k] -= 1
    if f == 0:
        return 0
    for q in range(n):
        f = f * pw[q, ea[q]] * pwb[q, eb[q]]
    return f
