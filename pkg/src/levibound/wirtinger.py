"""Finite-difference Wirtinger derivatives of real-valued functions on C^n.

Used as the fallback derivative oracle for user-supplied defining functions
and for cross-checking analytic oracles.  With ``z = x + iy``::

    d/dz_j          = (d/dx_j - i d/dy_j) / 2
    d2/dz_j dzbar_k = (f_xjxk + f_yjyk + i (f_xjyk - f_yjxk)) / 4
    d2/dz_j dz_k    = (f_xjxk - f_yjyk - i (f_xjyk + f_yjxk)) / 4
"""

import numpy as np


def _real_grad_hess(f, z, h):
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    x0 = np.concatenate([z.real, z.imag])

    def fr(x):
        return f(x[:n] + 1j * x[n:])

    m = 2 * n
    e = np.eye(m) * h
    f0 = fr(x0)
    g = np.empty(m)
    H = np.empty((m, m))
    fp = np.array([fr(x0 + e[i]) for i in range(m)])
    fm = np.array([fr(x0 - e[i]) for i in range(m)])
    g[:] = (fp - fm) / (2 * h)
    for i in range(m):
        H[i, i] = (fp[i] - 2 * f0 + fm[i]) / h**2
        for j in range(i + 1, m):
            v = (fr(x0 + e[i] + e[j]) - fr(x0 + e[i] - e[j])
                 - fr(x0 - e[i] + e[j]) + fr(x0 - e[i] - e[j])) / (4 * h**2)
            H[i, j] = H[j, i] = v
    return f0, g, H


def real_grad_hess(f, z, h=1e-5, richardson=True):
    """Real gradient and Hessian of ``f`` at ``z`` in the ``(x, y)`` ordering.

    One Richardson extrapolation step (``h`` and ``h/2``) is applied by default.
    """
    f0, g1, H1 = _real_grad_hess(f, z, h)
    if not richardson:
        return f0, g1, H1
    _, g2, H2 = _real_grad_hess(f, z, h / 2)
    return f0, (4 * g2 - g1) / 3, (4 * H2 - H1) / 3


def wirtinger_from_real(g, H):
    """Convert a real gradient/Hessian into ``(dz, levi, holo)`` Wirtinger blocks."""
    n = g.shape[0] // 2
    gx, gy = g[:n], g[n:]
    Hxx, Hxy = H[:n, :n], H[:n, n:]
    Hyx, Hyy = H[n:, :n], H[n:, n:]
    dz = 0.5 * (gx - 1j * gy)
    levi = 0.25 * (Hxx + Hyy + 1j * (Hxy - Hyx))
    holo = 0.25 * (Hxx - Hyy - 1j * (Hxy + Hyx))
    return dz, levi, holo


def wirtinger_fd(f, z, h=1e-5, richardson=True):
    """Value, complex gradient, Levi matrix and holomorphic Hessian of real ``f`` by differences."""
    f0, g, H = real_grad_hess(f, z, h, richardson)
    dz, levi, holo = wirtinger_from_real(g, H)
    return f0, dz, levi, holo
