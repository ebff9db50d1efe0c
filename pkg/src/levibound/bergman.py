"""Bergman kernel on the diagonal and the Bergman metric.

Three evaluation methods share one result type:

* ``oracle``: closed forms for products of weighted balls,
  ``K = prod_b m_b! prod_j a_j / (pi^m_b (1 - s_b)^(m_b + 1))``;
* ``reinhardt-series``: the monomial series of the same products, grouped by
  degree, ``S(s) = sum_k C(m + k, k) s^k``, summed with a certified tail;
* ``quadrature-gram``: orthonormalised polynomials ``((z - c)/h)^alpha`` up to
  total degree ``N`` with a numerical Gram matrix.

The Bergman metric is the square root of the Levi form of ``log K``, which is
always assembled from analytic derivatives, never by differencing ``K``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import roots_jacobi

from . import kernels
from .errors import ArgumentError, ConditioningError
from .geometry import as_point, cut_half, intersect_domains, outward_normal

METHOD_ALIASES = {
    "oracle": "oracle",
    "series": "reinhardt-series",
    "reinhardt-series": "reinhardt-series",
    "gram": "quadrature-gram",
    "quadrature-gram": "quadrature-gram",
}
DEFAULT_GRAM_DEGREE = 12
DEFAULT_SERIES_TERMS = 10_000_000
CONDITION_LIMIT = 1e12
REGULARIZATION = 1e-14


@dataclass
class KernelEvaluator:
    """How to evaluate the kernel.

    ``degree_cap`` is the polynomial degree ``N`` for the Gram method and the
    maximum number of series terms for the Reinhardt series.  ``conditioning``
    is filled in after a Gram system has been assembled.
    """

    method: str = "reinhardt-series"
    degree_cap: int | None = None
    quadrature_plan: dict | None = None
    tail_rtol: float = 1e-6
    stability_rtol: float = 1e-6
    conditioning: float | None = None
    _systems: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.method not in METHOD_ALIASES:
            raise ArgumentError(f"unknown kernel method {self.method!r}")
        self.method = METHOD_ALIASES[self.method]
        if self.degree_cap is None:
            self.degree_cap = (DEFAULT_GRAM_DEGREE if self.method == "quadrature-gram"
                               else DEFAULT_SERIES_TERMS)
        if self.degree_cap < 0:
            raise ArgumentError("degree_cap must be non-negative")

    def to_dict(self):
        return {"method": self.method, "degree_cap": int(self.degree_cap),
                "quadrature_plan": self.quadrature_plan, "tail_rtol": self.tail_rtol,
                "stability_rtol": self.stability_rtol, "conditioning": self.conditioning}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        cond = d.pop("conditioning", None)
        ev = cls(**d)
        ev.conditioning = cond
        return ev


@dataclass(frozen=True)
class KernelResult:
    """Kernel value and analytic derivatives at one point.

    ``grad[j] = dK/dz_j``, ``levi[j, k] = d2K/dz_j dzbar_k`` and
    ``log_levi[j, k] = d2 log K / dz_j dzbar_k``.
    """

    value: float
    grad: np.ndarray
    levi: np.ndarray
    log_levi: np.ndarray
    method: str
    degree: int
    tail: float = 0.0
    condition: float = 1.0
    degree_change: float = 0.0
    certified: bool = True

    def row(self, **extra):
        return {"K": self.value, "method": self.method, "N": self.degree,
                "condition": self.condition, **extra}


def auto_evaluator(domain, degree=None):
    """Oracle when a closed form exists, series for other weighted-ball products, else Gram."""
    if domain.kernel_oracle is not None and domain.blocks is not None:
        return KernelEvaluator("oracle")
    if domain.blocks is not None:
        return KernelEvaluator("reinhardt-series")
    if domain.kernel_oracle is not None:
        return KernelEvaluator("oracle")
    return KernelEvaluator("quadrature-gram", degree_cap=degree)


def kernel_data(domain, z, ev=None):
    """Full :class:`KernelResult` at ``z`` (must lie in the domain)."""
    z = as_point(z, domain.dimension)
    if not bool(domain.contains(z)):
        raise ArgumentError("z is not inside the domain")
    ev = ev or auto_evaluator(domain)
    if ev.method == "quadrature-gram":
        return _gram_system(domain, ev).evaluate(z, ev.stability_rtol)
    if domain.blocks is None or len(domain.pieces) != len(domain.blocks):
        if ev.method == "oracle" and domain.kernel_oracle is not None:
            v = float(domain.kernel_oracle(z))
            nan = np.full((domain.dimension, domain.dimension), np.nan, complex)
            return KernelResult(v, np.full(domain.dimension, np.nan, complex), nan, nan,
                                "oracle", 0)
        raise ArgumentError(f"method {ev.method!r} needs a product of weighted balls")
    if ev.method == "oracle" and domain.kernel_oracle is None:
        raise ArgumentError("this domain has no closed-form kernel")
    return _block_result(domain, z, ev)


def _block_result(domain, z, ev):
    n = domain.dimension
    logK = 0.0
    dlog = np.zeros(n, complex)
    log_levi = np.zeros((n, n), complex)
    rel_tail = 0.0
    terms = 0
    for idx, w in domain.blocks:
        idx = list(idx)
        a = np.asarray(w)
        m = len(idx)
        zb = z[idx]
        s = float((a * np.abs(zb) ** 2).sum())
        const = math.factorial(m) * float(np.prod(a)) / math.pi**m
        if ev.method == "oracle":
            S = (1 - s) ** -(m + 1)
            dS = (m + 1) * (1 - s) ** -(m + 2)
            d2S = (m + 1) * (m + 2) * (1 - s) ** -(m + 3)
        else:
            # tighter tolerance so that S' and S'' (k-weighted sums) share the tail budget
            S, dS, d2S, nt, tail = (float(np.asarray(x).reshape(-1)[0]) for x in
                                    kernels.block_series(np.array([s]), m, int(ev.degree_cap),
                                                         ev.tail_rtol * 1e-4))
            rel_tail += tail / S
            terms = max(terms, int(nt))
        l1 = dS / S
        l2 = d2S / S - l1**2
        ds = a * zb.conj()  # ds/dz_j
        logK += math.log(const * S)
        dlog[idx] = l1 * ds
        log_levi[np.ix_(idx, idx)] = l2 * np.outer(ds, ds.conj()) + l1 * np.diag(a)
    if ev.method != "oracle" and rel_tail > ev.tail_rtol:
        raise ConditioningError(
            f"series tail {rel_tail:.2e} exceeds {ev.tail_rtol:.0e} of the value; raise degree_cap")
    K = math.exp(logK)
    grad = K * dlog
    levi = K * (log_levi + np.outer(dlog, dlog.conj()))
    return KernelResult(K, grad, levi, log_levi, ev.method, terms, tail=rel_tail * K)


def bergman_kernel(domain, z, ev=None):
    """``K(z, z)``; raises :class:`ArgumentError` when ``z`` is outside the domain."""
    return kernel_data(domain, z, ev).value


def bergman_metric(domain, z, X, ev=None):
    """``(sum_jk d2 log K/dz_j dzbar_k X_j conj(X_k))^(1/2)``."""
    X = as_point(X, domain.dimension)
    if not np.any(X):
        raise ArgumentError("X must be nonzero")
    res = kernel_data(domain, z, ev)
    return metric_from_result(res, X)


def metric_from_result(res, X):
    L = res.log_levi
    if np.isnan(L).any():
        raise ArgumentError("the evaluator did not provide derivatives; use series or gram")
    eig = np.linalg.eigvalsh(0.5 * (L + L.conj().T))
    if eig[0] <= 1e-12 * max(abs(eig[-1]), 1e-300):
        raise ConditioningError(f"log-kernel Hessian is numerically indefinite (min eig {eig[0]:.3e})")
    q = float(np.real(X @ L @ X.conj()))
    return math.sqrt(max(q, 0.0))


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (N, n) complex
    weights: np.ndarray  # (N,)
    descriptor: dict

    @property
    def volume(self):
        return float(self.weights.sum())


def _gauss01(count, power=0):
    """Gauss-Jacobi rule on [0, 1] for the weight ``x^power``."""
    t, w = roots_jacobi(count, 0.0, float(power))
    return (t + 1) / 2, w / 2 ** (power + 1)


def _gauss01_left(count, power):
    """Gauss-Jacobi rule on [0, 1] for the weight ``(1 - x)^power``."""
    t, w = roots_jacobi(count, float(power), 0.0)
    return (t + 1) / 2, w / 2 ** (power + 1)


def simplex_rule(dim, count):
    """Collapsed (Duffy) Gauss rule on the solid simplex ``{v >= 0, sum v <= 1}`` in R^dim."""
    if dim == 0:
        return np.zeros((1, 0)), np.ones(1)
    pts = np.zeros((1, 0))
    wts = np.ones(1)
    left = np.ones(1)
    for k in range(dim):
        x, w = _gauss01_left(count, dim - 1 - k)
        new_pts = (pts[:, None, :], (left[:, None] * x[None, :])[..., None])
        pts = np.concatenate([np.broadcast_to(new_pts[0], (len(pts), count, pts.shape[1])),
                              new_pts[1]], axis=-1).reshape(-1, k + 1)
        wts = (wts[:, None] * w[None, :]).reshape(-1)
        left = (left[:, None] * (1 - x[None, :])).reshape(-1)
    # Jacobian of the collapsed map is prod_k (1 - x_1)...(1 - x_{k-1}) which the
    # Jacobi weights (1 - x_k)^(dim - 1 - k) carry
    return pts, wts


def _angles(count, dim):
    th = 2 * np.pi * np.arange(count) / count
    grids = np.meshgrid(*([th] * dim), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1), (2 * np.pi / count) ** dim


def block_rule(domain, degree):
    """Product rule exact for ``|p|^2`` with ``p`` of degree ``<= degree`` on weighted-ball products.

    Each block ``{sum a_j |z_j|^2 < 1}`` uses ``z_j = sqrt(v_j / a_j) e^{i theta_j}``
    with ``v`` in the solid simplex (Gauss) and trapezoidal angles.
    """
    if domain.blocks is None or len(domain.pieces) != len(domain.blocks):
        raise ArgumentError("block quadrature needs a product of weighted balls")
    n = domain.dimension
    g = degree // 2 + 2
    T = degree + 1
    factors = []
    for idx, w in domain.blocks:
        a = np.asarray(w)
        m = len(idx)
        v, wv = simplex_rule(m, g)
        th, wth = _angles(T, m)
        z = (np.sqrt(v / a)[:, None, :] * np.exp(1j * th)[None, :, :]).reshape(-1, m)
        wt = np.repeat(wv, len(th)) * wth / float(np.prod(2 * a))
        factors.append((list(idx), z, wt))
    nodes = np.zeros((1, n), complex)
    weights = np.ones(1)
    for idx, z, wt in factors:
        k = len(wt)
        new = np.repeat(nodes, k, axis=0)
        new[:, idx] = np.tile(z, (len(nodes), 1))
        nodes = new
        weights = (weights[:, None] * wt[None, :]).reshape(-1)
    return QuadratureRule(nodes, weights, {"kind": "block", "degree": degree, "nodes": len(weights)})


def _ray_radius(domain, center, dirs, rmax, iters=60):
    lo = np.zeros(len(dirs))
    hi = np.full(len(dirs), rmax)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = domain.contains(center + mid[:, None] * dirs)
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return lo


def polar_rule(domain, degree, center=None, angular_factor=2):
    """Boundary-fitted rule for domains star-shaped about ``center``.

    ``z = c + r omega`` with ``|omega_j|^2 = u_j`` (``u`` on the unit simplex),
    trapezoidal angles and Gauss-Jacobi in ``r`` up to the boundary radius.
    """
    n = domain.dimension
    c = as_point(center if center is not None else domain.center, n)
    if not bool(domain.contains(c)):
        raise ArgumentError("polar quadrature centre must lie inside the domain")
    gr = degree + n + 1
    T = angular_factor * (degree + 1)
    gu = angular_factor * (degree // 2 + 2)
    u, wu = simplex_rule(n - 1, gu)
    u = np.concatenate([u, 1 - u.sum(axis=1, keepdims=True)], axis=1)
    th, wth = _angles(T, n)
    dirs = (np.sqrt(np.clip(u, 0, None))[:, None, :] * np.exp(1j * th)[None, :, :]).reshape(-1, n)
    wdir = np.repeat(wu, len(th)) * wth * 2.0 ** (1 - n)
    box = domain.bounding_box
    rmax = float(np.linalg.norm(box[:, 1] - box[:, 0]))
    R = _ray_radius(domain, c, dirs, rmax)
    x, wx = _gauss01(gr, 2 * n - 1)
    nodes = c + (R[:, None, None] * x[None, :, None]) * dirs[:, None, :]
    weights = wdir[:, None] * wx[None, :] * R[:, None] ** (2 * n)
    return QuadratureRule(nodes.reshape(-1, n), weights.reshape(-1),
                          {"kind": "polar", "degree": degree, "angular_factor": angular_factor,
                           "center": [[float(v.real), float(v.imag)] for v in c],
                           "nodes": int(weights.size)})


def masked_rule(domain, degree, per_degree=4, max_nodes=4_000_000):
    """Tensor Gauss-Legendre over the bounding box with membership-masked weights."""
    n = domain.dimension
    q = max(per_degree * max(degree, 1), 8)
    while q ** (2 * n) > max_nodes and q > 8:
        q -= 1
    t, w = np.polynomial.legendre.leggauss(q)
    box = domain.bounding_box
    axes = [(lo + hi) / 2 + (hi - lo) / 2 * t for lo, hi in box]
    wax = [(hi - lo) / 2 * w for lo, hi in box]
    grids = np.meshgrid(*axes, indexing="ij")
    X = np.stack([g.reshape(-1) for g in grids], axis=-1)
    W = np.ones(1)
    for wa in wax:
        W = (W[:, None] * wa[None, :]).reshape(-1)
    Z = X[:, :n] + 1j * X[:, n:]
    keep = domain.contains(Z)
    return QuadratureRule(Z[keep], W[keep], {"kind": "masked", "degree": degree,
                                             "per_dim": q, "nodes": int(keep.sum())})


def quadrature_rule(domain, degree, plan=None):
    plan = dict(plan or {})
    kind = plan.get("kind")
    if kind is None:
        if domain.blocks is not None and len(domain.pieces) == len(domain.blocks):
            kind = "block"
        elif domain.center is not None and bool(domain.contains(domain.center)):
            kind = "polar"
        else:
            kind = "masked"
    if kind == "block":
        return block_rule(domain, degree)
    if kind == "polar":
        return polar_rule(domain, degree, plan.get("center"), plan.get("angular_factor", 2))
    if kind == "masked":
        return masked_rule(domain, degree, plan.get("per_degree", 4))
    raise ArgumentError(f"unknown quadrature kind {kind!r}")


# ---------------------------------------------------------------------------
# Gram system


def monomial_exponents(n, degree):
    """All multi-indices of total degree ``<= degree``, ordered by degree."""
    out = []
    for d in range(degree + 1):
        out.extend(_compositions(d, n))
    return np.array(out, dtype=int).reshape(-1, n)


def _compositions(total, parts):
    if parts == 1:
        return [(total,)]
    return [(k,) + rest for k in range(total, -1, -1) for rest in _compositions(total - k, parts - 1)]


class GramSystem:
    """Orthonormal polynomial system for one domain, degree and quadrature rule."""

    def __init__(self, domain, degree, rule, chunk=20_000):
        n = domain.dimension
        self.domain = domain
        self.degree = degree
        self.rule = rule
        self.expo = monomial_exponents(n, degree)
        box = domain.bounding_box
        self.center = (domain.center if domain.center is not None
                       else (box[:n].mean(axis=1) + 1j * box[n:].mean(axis=1)))
        half = np.maximum(np.abs(box[:n, 1] - box[:n, 0]), np.abs(box[n:, 1] - box[n:, 0])) / 2
        self.scale = half
        nb = len(self.expo)
        G = np.zeros((nb, nb), complex)
        for s in range(0, len(rule.weights), chunk):
            B = self._basis(rule.nodes[s : s + chunk])
            G += (B.conj().T * rule.weights[s : s + chunk]) @ B
        G = 0.5 * (G + G.conj().T)
        d = np.sqrt(np.real(np.diag(G)))
        if np.any(d <= 0):
            raise ConditioningError("a monomial has zero quadrature norm; refine the rule")
        Gs = G / np.outer(d, d)
        eig = np.linalg.eigvalsh(Gs)
        self.condition = float(eig[-1] / max(eig[0], 1e-300)) if eig[0] > 0 else math.inf
        if self.condition > CONDITION_LIMIT:
            raise ConditioningError(
                f"Gram condition {self.condition:.2e} exceeds {CONDITION_LIMIT:.0e}; lower the degree")
        Gs = Gs + REGULARIZATION * np.trace(Gs).real * np.eye(nb)
        self.dscale = d
        self.chol = cholesky(Gs, lower=True)
        self.stable_count = int((self.expo.sum(axis=1) <= degree - 5).sum()) if degree >= 5 else 0

    def _basis(self, z, deriv=False):
        w = (np.asarray(z) - self.center) / self.scale
        P = np.prod(w[..., None, :] ** self.expo, axis=-1)
        if not deriv:
            return P
        n = self.expo.shape[1]
        D = np.zeros(P.shape[:-1] + (n, P.shape[-1]), complex)
        for j in range(n):
            e = self.expo[:, j]
            ej = self.expo.copy()
            ej[:, j] = np.maximum(e - 1, 0)
            D[..., j, :] = e * np.prod(w[..., None, :] ** ej, axis=-1) / self.scale[j]
        return P, D

    def orthonormal(self, z):
        """Values and ``d/dz_j`` of the orthonormal system at one point."""
        P, D = self._basis(as_point(z)[None, :], deriv=True)
        P, D = P[0], D[0]
        # phi = P diag(1/d) L^{-H}, i.e. conj(phi) = L^{-1} conj(P / d)
        phi = solve_triangular(self.chol, (P / self.dscale).conj(), lower=True).conj()
        dphi = solve_triangular(self.chol, (D / self.dscale).conj().T, lower=True).conj().T
        return phi, dphi

    def evaluate(self, z, rtol=1e-6):
        phi, dphi = self.orthonormal(z)
        a2 = np.abs(phi) ** 2
        K = float(a2.sum())
        grad = dphi @ phi.conj()
        levi = dphi @ dphi.conj().T
        dlog = grad / K
        log_levi = levi / K - np.outer(dlog, dlog.conj())
        low = float(a2[: self.stable_count].sum()) if self.stable_count else 0.0
        change = (K - low) / K
        return KernelResult(K, grad, levi, log_levi, "quadrature-gram", self.degree,
                            condition=self.condition, degree_change=change,
                            certified=bool(change <= rtol))


def _gram_system(domain, ev):
    key = (id(domain), int(ev.degree_cap), repr(ev.quadrature_plan))
    sysm = ev._systems.get(key)
    if sysm is None:
        rule = quadrature_rule(domain, int(ev.degree_cap), ev.quadrature_plan)
        sysm = GramSystem(domain, int(ev.degree_cap), rule)
        ev._systems[key] = sysm
        ev._systems[("domain", key)] = domain  # keep id() stable
        ev.conditioning = sysm.condition
    return sysm


def gram_floor(domain, ev, direction=None, deltas=None):
    """Smallest probe distance at which the Gram kernel stays degree-stable.

    Probes move from the domain centre towards the boundary along ``direction``
    (default: first coordinate axis); returns ``(delta_min, table)``.
    """
    n = domain.dimension
    c = as_point(domain.center, n)
    v = np.zeros(n, complex)
    v[0] = 1.0
    if direction is not None:
        v = as_point(direction, n) / np.linalg.norm(direction)
    R = _ray_radius(domain, c[None, :], v[None, :], float(np.abs(domain.bounding_box).max() * 4))[0]
    deltas = np.geomspace(0.5 * R, 1e-3 * R, 20) if deltas is None else np.asarray(deltas)
    table = []
    floor = None
    for d in deltas:
        res = _gram_system(domain, ev).evaluate(c + (R - d) * v, ev.stability_rtol)
        table.append((float(d), res.degree_change))
        if res.degree_change <= ev.stability_rtol:
            floor = float(d)
        else:
            break
    return floor, table


# ---------------------------------------------------------------------------
# localisation


@dataclass
class LocalizationReport:
    deltas: list
    ratios: list
    min_ratio: float
    max_ratio: float
    warnings: list

    def to_dict(self):
        return dict(self.__dict__)


def localized_domain(domain, U):
    """``domain`` intersected with the neighbourhood ``U``.

    ``U`` may be ``None`` (no restriction), a :class:`DomainModel`, or a dict
    ``{"halfspace": (coord, threshold)}`` for ``{Re z_coord > threshold}``.
    """
    if U is None:
        return domain
    if isinstance(U, dict) and "halfspace" in U:
        coord, thr = U["halfspace"]
        return cut_half(domain, int(coord), float(thr), center=U.get("center"))
    return intersect_domains(domain, U, center=getattr(U, "center", None))


def kernel_localization_ratio(domain, U, p, deltas, ev=None, ev_local=None):
    """``K_{domain & U}(p_delta) / K_domain(p_delta)`` along the inward normal probes."""
    n = domain.dimension
    p = as_point(p, n)
    local = localized_domain(domain, U)
    nu = outward_normal(domain, p)
    ev = ev or auto_evaluator(domain)
    ev_local = ev_local or (ev if local is domain else auto_evaluator(local))
    out_d, out_r, notes = [], [], []
    for d in sorted(np.asarray(deltas, dtype=float), reverse=True):
        z = p - d * nu
        try:
            a = kernel_data(local, z, ev_local)
            b = kernel_data(domain, z, ev)
        except ConditioningError as exc:
            notes.append(f"sweep truncated at delta={d:.3e}: {exc}")
            warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
            break
        if not (a.certified and b.certified):
            notes.append(f"sweep truncated at delta={d:.3e}: below the Gram degree-stability floor")
            warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
            break
        out_d.append(float(d))
        out_r.append(a.value / b.value)
    lo = min(out_r) if out_r else math.nan
    hi = max(out_r) if out_r else math.nan
    return LocalizationReport(out_d, out_r, lo, hi, notes)


def write_kernel_csv(path, rows):
    """Write sweep rows with columns ``delta, K, method, N, condition``."""
    cols = ["delta", "K", "method", "N", "condition"]
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
        wr.writeheader()
        for r in rows:
            wr.writerow(r)
