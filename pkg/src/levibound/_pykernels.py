"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, and as the
reference the compiled versions are tested against.
"""

import numpy as np


def block_series(s, m, nmax, rtol):
    """Sum ``S(s) = sum_k C(m+k, k) s**k`` together with ``S'`` and ``S''``.

    ``s`` is an array of values in ``[0, 1)``.  Summation stops once the
    geometric tail bound drops below ``rtol * S`` or ``nmax`` terms are used.

    Returns ``(S, dS, d2S, nterms, tail)`` as arrays shaped like ``s``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = [np.empty_like(s) for _ in range(3)]
    nterms = np.zeros(s.shape, dtype=np.int64)
    tail = np.empty_like(s)
    chunk = 4096
    for idx, sv in np.ndenumerate(s):
        S = dS = d2S = 0.0
        k0 = 0
        # term_k = C(m+k,k) s^k, built chunkwise with cumulative products of ratios
        term0 = 1.0
        done = False
        while not done:
            k = np.arange(k0, k0 + chunk, dtype=float)
            ratios = sv * (m + k + 1.0) / (k + 1.0)
            terms = term0 * np.concatenate(([1.0], np.cumprod(ratios[:-1])))
            if k0 + chunk > nmax:
                cut = nmax - k0
                terms, k, ratios = terms[:cut], k[:cut], ratios[:cut]
            csum = S + np.cumsum(terms)
            # tail after index i: t_{i+1} / (1 - r_{i+1}) with r_{i+1} = s (m+i+2)/(i+2)
            nxt = terms * ratios
            rbound = sv * (m + k + 2.0) / (k + 2.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                tails = np.where(rbound < 1.0, nxt / (1.0 - rbound), np.inf)
            ok = np.nonzero(tails <= rtol * csum)[0]
            if ok.size:
                stop = ok[0] + 1
                done = True
            elif k0 + chunk >= nmax:
                stop = len(terms)
                done = True
            else:
                stop = len(terms)
            t = terms[:stop]
            kk = k[:stop]
            S += t.sum()
            if sv != 0.0:
                dS += (kk * t).sum() / sv
                d2S += (kk * (kk - 1.0) * t).sum() / (sv * sv)
            tail[idx] = tails[stop - 1]
            nterms[idx] = k0 + stop
            term0 = terms[stop - 1] * ratios[stop - 1]
            k0 += stop
            if term0 == 0.0:
                tail[idx] = 0.0
                done = True
        if sv == 0.0:
            dS = m + 1.0
            d2S = (m + 1.0) * (m + 2.0)
        out[0][idx], out[1][idx], out[2][idx] = S, dS, d2S
    return out[0], out[1], out[2], nterms, tail


def poly_eval(zs, alpha, beta, coef):
    """Evaluate ``P(z) = sum_t coef_t z**alpha_t zbar**beta_t`` and its Wirtinger derivatives.

    Returns ``(P, Pz, Pzb, Pzz, Pzzb, Pzbzb)`` for ``zs`` of shape ``(npts, n)``.
    """
    zs = np.asarray(zs, dtype=complex)
    npts, n = zs.shape
    alpha = np.asarray(alpha, dtype=np.int64)
    beta = np.asarray(beta, dtype=np.int64)
    coef = np.asarray(coef, dtype=complex)
    zb = zs.conj()

    def mono(da, db):
        a = alpha - da
        b = beta - db
        valid = np.all(a >= 0, axis=1) & np.all(b >= 0, axis=1)
        a = np.where(a < 0, 0, a)
        b = np.where(b < 0, 0, b)
        # (npts, nterms)
        vals = np.prod(zs[:, None, :] ** a[None], axis=2) * np.prod(zb[:, None, :] ** b[None], axis=2)
        return vals * valid[None, :]

    zero = np.zeros(n, dtype=np.int64)
    P = mono(zero, zero) @ coef
    Pz = np.empty((npts, n), complex)
    Pzb = np.empty((npts, n), complex)
    Pzz = np.empty((npts, n, n), complex)
    Pzzb = np.empty((npts, n, n), complex)
    Pzbzb = np.empty((npts, n, n), complex)
    eye = np.eye(n, dtype=np.int64)
    for j in range(n):
        Pz[:, j] = mono(eye[j], zero) @ (coef * alpha[:, j])
        Pzb[:, j] = mono(zero, eye[j]) @ (coef * beta[:, j])
        for k in range(n):
            fa = alpha[:, j] * (alpha[:, k] - (j == k))
            Pzz[:, j, k] = mono(eye[j] + eye[k], zero) @ (coef * fa)
            fb = beta[:, j] * (beta[:, k] - (j == k))
            Pzbzb[:, j, k] = mono(zero, eye[j] + eye[k]) @ (coef * fb)
            Pzzb[:, j, k] = mono(eye[j], eye[k]) @ (coef * alpha[:, j] * beta[:, k])
    return P, Pz, Pzb, Pzz, Pzzb, Pzbzb
