"""Normalized boundary charts and local weak peak functions.

At a boundary point ``p`` of constant Levi rank ``n-l-1`` the chart is

    xi   = Q^H (z - p)                       (translation + unitary)
    zeta = xi,  zeta_1 = xi_1 + 2 sum_{j,k} c_jk xi_j xi_k

with the columns of ``Q`` ordered as (outward normal, Levi eigenvectors with
positive eigenvalues, Levi null directions).  The chart defining function is
``rho(z) / |grad rho(p)|`` so that its linear part is exactly ``Re zeta_1``;
the graph of the boundary over ``(Im zeta_1, zeta~)`` is then
``Re zeta_1 = -sum lambda_j |zeta_j|^2 + (error terms)``.

Null directions are taken from the domain's explicit Levi-flat leaves (affine
for all catalog domains).  When the Levi form has full rank there are no null
directions and no leaves are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .errors import (
    ArgumentError,
    OutOfChartError,
    PseudoconvexityViolation,
    RankDriftError,
)
from .geometry import as_point, levi_rank, rank_near, snap_to_boundary

MIXED_BLOCK_TOL = 1e-6
DYADIC_RADII = tuple(2.0**-k for k in range(1, 8))


@dataclass(frozen=True)
class NormalizedChart:
    base_point: np.ndarray
    unitary: np.ndarray  # columns: normal, positive Levi directions, null directions
    gradient_norm: float  # |grad rho(p)| (real gradient), divides rho
    shear_coeffs: np.ndarray  # (m, m) symmetric, m = levi_rank
    lam: np.ndarray  # lambda_2 .. lambda_{n-l}
    levi_rank: int
    valid_radius: float = 0.0
    peak_radius: float = 0.0
    residual_constant: float = 0.0
    residual_slope: float | None = None
    domain: object = field(default=None, repr=False, compare=False)

    @property
    def dimension(self):
        return self.base_point.shape[0]

    @property
    def n_flat(self):
        """Number of Levi-null directions ``l``."""
        return self.dimension - 1 - self.levi_rank

    @property
    def positive_slice(self):
        return slice(1, 1 + self.levi_rank)

    # -- maps ---------------------------------------------------------------

    def _shear(self, v):
        s = self.positive_slice
        vp = v[..., s]
        return 2 * np.einsum("...j,jk,...k->...", vp, self.shear_coeffs, vp)

    def forward(self, z):
        """``zeta = Phi_p(z)``; vectorised over leading axes."""
        z = np.asarray(z, dtype=complex)
        xi = (z - self.base_point) @ self.unitary.conj()
        zeta = xi.copy()
        zeta[..., 0] = xi[..., 0] + self._shear(xi)
        return zeta

    def inverse(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        xi = zeta.copy()
        xi[..., 0] = zeta[..., 0] - self._shear(zeta)
        return self.base_point + xi @ self.unitary.T

    def inverse_jacobian(self, zeta):
        """``dz/dzeta`` of the inverse map, shape ``(..., n, n)``."""
        zeta = np.asarray(zeta, dtype=complex)
        n = self.dimension
        Jxi = np.broadcast_to(np.eye(n, dtype=complex), zeta.shape[:-1] + (n, n)).copy()
        s = self.positive_slice
        Jxi[..., 0, s] = -4 * zeta[..., s] @ self.shear_coeffs
        return np.einsum("jk,...kl->...jl", self.unitary, Jxi)

    def jacobian(self, z):
        """``dzeta/dz`` of the forward map at ``z``."""
        z = as_point(z, self.dimension)
        xi = self.unitary.conj().T @ (z - self.base_point)
        n = self.dimension
        Jxi = np.eye(n, dtype=complex)
        s = self.positive_slice
        Jxi[0, s] = 4 * self.shear_coeffs @ xi[s]
        return Jxi @ self.unitary.conj().T

    # -- defining function in chart coordinates ----------------------------

    def rho(self, zeta):
        return self.domain.rho(self.inverse(zeta)) / self.gradient_norm

    def rho_derivatives(self, zeta):
        """Value, gradient, Levi matrix and holomorphic Hessian of the chart defining function."""
        zeta = np.asarray(zeta, dtype=complex)
        z = self.inverse(zeta)
        r, g, L, H = self.domain.derivatives(z)
        J = self.inverse_jacobian(zeta)
        N = self.gradient_norm
        grad = np.einsum("...j,...ja->...a", g, J) / N
        levi = np.einsum("...ja,...jk,...kb->...ab", J, L, J.conj()) / N
        holo = np.einsum("...ja,...jk,...kb->...ab", J, H, J)
        m = self.levi_rank
        if m:
            s = self.positive_slice
            gq = g @ self.unitary[:, 0]  # d rho along the first column
            holo[..., s, s] += -4 * gq[..., None, None] * self.shear_coeffs
        return r / N, grad, levi, holo / N

    def normal_form(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        s = self.positive_slice
        return zeta[..., 0].real + (self.lam * np.abs(zeta[..., s]) ** 2).sum(axis=-1)

    def boundary_graph(self, im1, tilde, iters=60):
        """Solve ``rho(t + i im1, tilde) = 0`` for ``t`` (vectorised Newton in ``t``)."""
        im1 = np.asarray(im1, dtype=float)
        tilde = np.asarray(tilde, dtype=complex)
        t = -self.normal_form(np.concatenate([np.zeros(im1.shape + (1,), complex), tilde], -1))
        ok = np.ones(im1.shape, bool)
        for _ in range(iters):
            zeta = np.concatenate([(t + 1j * im1)[..., None], tilde], -1)
            r, grad, _, _ = self.rho_derivatives(zeta)
            dr = 2 * grad[..., 0].real  # d/dt of rho along Re zeta_1
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(np.abs(dr) > 1e-12, r / dr, 0.0)
            t = t - step
            if np.all(np.abs(step) < 1e-15 * np.maximum(1.0, np.abs(t))):
                break
        r = self.rho(np.concatenate([(t + 1j * im1)[..., None], tilde], -1))
        ok &= np.abs(r) < 1e-11
        return t, ok

    def graph_residual(self, im1, tilde):
        """Normal-form error on the boundary: ``-t(im1, tilde) - sum lambda_j |zeta_j|^2``."""
        t, ok = self.boundary_graph(im1, tilde)
        s = slice(0, self.levi_rank)
        return -t - (self.lam * np.abs(np.asarray(tilde)[..., s]) ** 2).sum(axis=-1), ok

    def error_scale(self, im1, tilde):
        """``|zeta'|^3 + |zeta'|^2 |zeta''| + |Im zeta_1| |zeta|`` from the normal form."""
        tilde = np.asarray(tilde)
        m = self.levi_rank
        a = np.linalg.norm(tilde[..., :m], axis=-1)
        b = np.linalg.norm(tilde[..., m:], axis=-1)
        full = np.sqrt(np.abs(im1) ** 2 + a**2 + b**2)
        return a**3 + a**2 * b + np.abs(im1) * full

    # -- serialisation -----------------------------------------------------

    def to_dict(self):
        def cplx(a):
            a = np.asarray(a)
            return {"re": a.real.tolist(), "im": a.imag.tolist()}

        return {
            "base_point": cplx(self.base_point),
            "unitary": cplx(self.unitary),
            "gradient_norm": self.gradient_norm,
            "shear_coeffs": cplx(self.shear_coeffs),
            "lambda": self.lam.tolist(),
            "levi_rank": self.levi_rank,
            "valid_radius": self.valid_radius,
            "peak_radius": self.peak_radius,
            "residual_constant": self.residual_constant,
            "residual_slope": self.residual_slope,
        }

    @classmethod
    def from_dict(cls, d, domain=None):
        def cplx(x):
            return np.asarray(x["re"]) + 1j * np.asarray(x["im"])

        return cls(
            base_point=cplx(d["base_point"]),
            unitary=cplx(d["unitary"]),
            gradient_norm=float(d["gradient_norm"]),
            shear_coeffs=cplx(d["shear_coeffs"]).reshape(d["levi_rank"], d["levi_rank"]),
            lam=np.asarray(d["lambda"], dtype=float),
            levi_rank=int(d["levi_rank"]),
            valid_radius=float(d["valid_radius"]),
            peak_radius=float(d["peak_radius"]),
            residual_constant=float(d["residual_constant"]),
            residual_slope=d["residual_slope"],
            domain=domain,
        )


def _sphere(rng, count, dim):
    v = rng.normal(size=(count, dim)) + 1j * rng.normal(size=(count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _tangent_frame(domain, p, data):
    """Positive-direction and null-direction bases of the complex tangent space."""
    n = domain.dimension
    T = data.tangential_basis
    if data.rank == n - 1:
        return data.positive_basis, np.zeros((n, 0), complex), data.eigenvalues[: data.rank]
    if domain.leaf_basis_fn is None:
        raise ArgumentError("Levi form is degenerate at p and the domain supplies no leaf charts")
    leaf = np.asarray(domain.leaf_basis_fn(p), dtype=complex)
    leaf, _ = np.linalg.qr(leaf)
    if leaf.shape[1] != n - 1 - data.rank:
        raise RankDriftError("leaf dimension does not match the Levi nullity")
    # leaves must be complex-tangent and span the Levi nullspace
    if np.abs(data.gradient @ leaf).max() > 1e-8:
        raise ArgumentError("leaf directions are not complex tangent at p")
    null = data.nullspace_basis
    if null.size and np.linalg.norm(null - leaf @ (leaf.conj().T @ null)) > 1e-6:
        raise ArgumentError("leaf directions do not span the Levi nullspace")
    Tpos = T @ null_space(leaf.conj().T @ T) if data.rank else np.zeros((n, 0), complex)
    _, _, L, _ = domain.derivatives(p)
    A = L.conj()
    mixed = Tpos.conj().T @ A @ leaf
    if mixed.size and np.abs(mixed).max() > MIXED_BLOCK_TOL * max(1.0, np.abs(A).max()):
        raise PseudoconvexityViolation(
            f"mixed Levi block is nonzero (max {np.abs(mixed).max():.3e})")
    B = Tpos.conj().T @ A @ Tpos
    w, V = np.linalg.eigh(0.5 * (B + B.conj().T))
    order = np.argsort(w)[::-1]
    return Tpos @ V[:, order], leaf, w[order]


def normalize_chart(domain, p, tol=1e-8, seed=0, check_rank=True, samples=1000):
    """Build the normalized chart at boundary point ``p`` and certify its radii."""
    p = snap_to_boundary(domain, p)
    data = levi_rank(domain, p, tol)
    if check_rank:
        ranks = rank_near(domain, p, count=20, tol=tol, seed=seed)
        if any(r != data.rank for r in ranks):
            raise RankDriftError(f"Levi rank varies near p: {sorted(set(ranks))} vs {data.rank}")
    g = data.gradient
    ng = float(np.linalg.norm(g))
    nu = g.conj() / ng
    pos, null, eig = _tangent_frame(domain, p, data)
    Q = np.column_stack([nu, pos, null])
    N = 2.0 * ng
    lam = np.real(eig) / N
    if np.any(lam <= 0):
        raise RankDriftError("non-positive Levi eigenvalue in the positive block")
    _, _, _, H = domain.derivatives(p)
    holo_xi = Q.T @ H @ Q / N
    m = data.rank
    shear = 0.5 * holo_xi[1 : 1 + m, 1 : 1 + m]
    chart = NormalizedChart(p, Q, N, shear, lam, m, domain=domain)
    return certify_chart(chart, seed=seed, samples=samples)


def residual_decay(chart, shells=(0.1, 0.05, 0.025), samples=1000, seed=0):
    """Max normal-form residual along zeta' directions on each shell, and the log-log slope."""
    m = chart.levi_rank
    n = chart.dimension
    if m == 0:
        return np.zeros(len(shells)), None
    rng = np.random.default_rng(seed)
    maxima = []
    for s in shells:
        tilde = np.zeros((samples, n - 1), complex)
        tilde[:, :m] = s * _sphere(rng, samples, m)
        res, ok = chart.graph_residual(np.zeros(samples), tilde)
        maxima.append(np.abs(res[ok]).max() if ok.any() else np.nan)
    maxima = np.array(maxima)
    if np.all(maxima < 1e-14):
        return maxima, float("inf")
    slope = np.polyfit(np.log(shells), np.log(np.maximum(maxima, 1e-300)), 1)[0]
    return maxima, float(slope)


def certify_chart(chart, seed=0, samples=1000):
    """Attach residual slope/constant, the valid radius and the peak radius."""
    from dataclasses import replace

    rng = np.random.default_rng(seed)
    n = chart.dimension
    dom = chart.domain
    _, slope = residual_decay(chart, samples=samples, seed=seed)

    def ratios(s):
        v = rng.uniform(-1, 1, size=samples) + 0j
        tilde = _sphere(rng, samples, n - 1) if n > 1 else np.zeros((samples, 0), complex)
        radii = rng.uniform(0, 1, size=samples) ** (1.0 / (2 * n - 1))
        im1 = s * radii * v.real / np.sqrt(2)
        tilde = s * radii[:, None] * tilde / np.sqrt(2)
        zeta0 = np.concatenate([(1j * im1)[:, None], tilde], 1)
        smooth = np.array([dom.is_smooth_point(z) for z in chart.inverse(zeta0)])
        res, ok = chart.graph_residual(im1, tilde)
        ok &= smooth
        scale = chart.error_scale(im1, tilde)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(scale > 0, np.abs(res) / scale, 0.0)
        return r[ok], ok.mean()

    base, _ = ratios(DYADIC_RADII[-1])
    C = float(base.max()) if base.size else 0.0
    valid = DYADIC_RADII[-1]
    for s in DYADIC_RADII:
        r, frac = ratios(s)
        if frac > 0.99 and (r.size == 0 or r.max() <= 4 * C + 1e-9):
            valid = s
            break
    peak = _peak_radius(chart, rng, samples)
    return replace(chart, valid_radius=valid, peak_radius=peak, residual_constant=C,
                   residual_slope=slope)


def _peak_radius(chart, rng, samples):
    n = chart.dimension
    for eps in DYADIC_RADII:
        zeta = eps * _sphere(rng, samples, n) * rng.uniform(0, 1, size=(samples, 1)) ** (1 / (2 * n))
        inside = chart.domain.contains(chart.inverse(zeta))
        z1 = zeta[inside, 0]
        if np.all(z1.real - np.abs(z1.imag) < 0):
            return eps
    return 0.0


def peak_function(chart, z):
    """``h(Phi_p(z)) = exp(-(-zeta_1)^(2/3))`` with the principal branch of the power."""
    z = as_point(z, chart.dimension)
    zeta = chart.forward(z)
    if np.linalg.norm(zeta) >= chart.peak_radius:
        raise OutOfChartError("point is outside the certified peak neighbourhood")
    w = -zeta[0]
    if w == 0:
        return 1.0 + 0j
    return complex(np.exp(-np.exp((2.0 / 3.0) * np.log(w))))
