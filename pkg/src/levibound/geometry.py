"""Domain models, Levi form and rank, boundary projection and distance.

A domain is ``{z : max_i rho_i(z) < 0}`` for a finite list of smooth pieces.
Smooth boundary points are those where exactly one piece vanishes; all
differential quantities are taken from that active piece.  Catalog domains
(ball, polydisc, disc x ball, ellipsoid) are products of weighted ball blocks
``sum_{j in b} a_j |z_j|^2 < 1`` and carry analytic oracles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from .errors import (
    ArgumentError,
    DegenerateBoundaryError,
    EvaluationError,
    ProjectionError,
)
from .kernels import poly_eval
from .wirtinger import wirtinger_fd

BOUNDARY_TOL = 1e-10
SNAP_TOL = 1e-6


def as_point(z, n=None):
    """Coerce to a 1-d complex vector, checking length ``n`` if given."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    if n is not None and z.shape[0] != n:
        raise ArgumentError(f"expected a vector of length {n}, got {z.shape[0]}")
    return z


def real_hessian(levi, holo):
    """Real Hessian in ``(x, y)`` ordering from Wirtinger blocks ``d2/dz dzbar`` and ``d2/dz dz``."""
    Hxx = 2 * (holo.real + levi.real)
    Hyy = 2 * (levi.real - holo.real)
    Hxy = 2 * (levi.imag - holo.imag)
    return np.block([[Hxx, Hxy], [Hxy.T, Hyy]])


# ---------------------------------------------------------------------------
# smooth pieces


@dataclass(frozen=True)
class Piece:
    """One smooth defining function with (vectorised) Wirtinger oracles.

    Each callable takes an ``(N, n)`` complex array.  ``grad``, ``levi`` and
    ``holo`` may be ``None``; central differences (step 1e-5, one Richardson
    step) are used instead.
    """

    value: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable] = None
    levi: Optional[Callable] = None
    holo: Optional[Callable] = None
    joint: Optional[Callable] = None  # returns (value, grad, levi, holo) in one pass

    @property
    def analytic(self):
        return self.joint is not None or (
            self.grad is not None and self.levi is not None and self.holo is not None)

    def derivatives(self, pts):
        pts = np.atleast_2d(pts)
        if self.joint is not None:
            return self.joint(pts)
        if self.analytic:
            return self.value(pts), self.grad(pts), self.levi(pts), self.holo(pts)
        vals = self.value(pts)
        N, n = pts.shape
        g = np.empty((N, n), complex)
        L = np.empty((N, n, n), complex)
        H = np.empty((N, n, n), complex)
        f = lambda z: float(self.value(z[None, :])[0])
        for i in range(N):
            _, g[i], L[i], H[i] = wirtinger_fd(f, pts[i])
        return vals, g, L, H


def weighted_ball_piece(indices, weights, n):
    """Piece ``sum_{j in indices} a_j |z_j|^2 - 1``."""
    idx = np.asarray(indices, dtype=int)
    a = np.zeros(n)
    a[idx] = weights

    def value(z):
        return (np.abs(z) ** 2 * a).sum(axis=-1) - 1.0

    def grad(z):
        return a * z.conj()

    def levi(z):
        return np.broadcast_to(np.diag(a).astype(complex), z.shape[:-1] + (n, n)).copy()

    def holo(z):
        return np.zeros(z.shape[:-1] + (n, n), complex)

    return Piece(value, grad, levi, holo)


@dataclass(frozen=True)
class PolyTable:
    """Polynomial ``rho = Re sum_t c_t z**alpha_t zbar**beta_t``."""

    alpha: np.ndarray
    beta: np.ndarray
    coef: np.ndarray

    @classmethod
    def from_terms(cls, terms, n):
        alpha, beta, coef = [], [], []
        for t in terms:
            if isinstance(t, dict):
                a, b, c = t["alpha"], t["beta"], t["coef"]
                c = complex(c) + 1j * float(t.get("coef_imag", 0.0))
            else:
                a, b, c = t
            if len(a) != n or len(b) != n:
                raise ArgumentError("multi-index length does not match dimension")
            if min(a) < 0 or min(b) < 0:
                raise ArgumentError("multi-indices must be nonnegative")
            alpha.append(a)
            beta.append(b)
            coef.append(complex(c))
        return cls(np.array(alpha, dtype=np.int64).reshape(-1, n),
                   np.array(beta, dtype=np.int64).reshape(-1, n),
                   np.array(coef, dtype=complex))

    def to_terms(self):
        out = []
        for a, b, c in zip(self.alpha, self.beta, self.coef):
            d = {"alpha": a.tolist(), "beta": b.tolist(), "coef": float(c.real)}
            if c.imag:
                d["coef_imag"] = float(c.imag)
            out.append(d)
        return out

    def piece(self):
        def all_derivs(z):
            P, Pz, Pzb, Pzz, Pzzb, Pzbzb = poly_eval(np.atleast_2d(z), self.alpha, self.beta, self.coef)
            rho = P.real
            grad = 0.5 * (Pz + Pzb.conj())
            levi = 0.5 * (Pzzb + np.swapaxes(Pzzb, -1, -2).conj())
            holo = 0.5 * (Pzz + Pzbzb.conj())
            return rho, grad, levi, holo

        return Piece(lambda z: all_derivs(z)[0], joint=all_derivs)


# ---------------------------------------------------------------------------
# domain model


@dataclass(frozen=True)
class DomainModel:
    """Bounded domain given by smooth pieces plus optional closed-form metadata.

    ``blocks`` is set for products of weighted balls: a tuple of
    ``(indices, weights)`` pairs.  It enables the closed-form kernel, the
    Reinhardt series, explicit Levi-flat leaves and support functions.
    """

    name: str
    dimension: int
    pieces: tuple
    bounding_box: np.ndarray
    params: tuple = ()
    blocks: Optional[tuple] = None
    poly: Optional[PolyTable] = None
    center: Optional[np.ndarray] = None
    leaf_basis_fn: Optional[Callable] = None
    kernel_oracle: Optional[Callable] = None
    distance_oracle: Optional[Callable] = None
    distance_derivs_oracle: Optional[Callable] = None
    support_fn: Optional[Callable] = None
    extra: dict = field(default_factory=dict)

    # -- evaluation -------------------------------------------------------

    def _pts(self, z):
        z = np.asarray(z, dtype=complex)
        if z.shape[-1] != self.dimension:
            raise ArgumentError(
                f"point has {z.shape[-1]} coordinates, domain dimension is {self.dimension}")
        return z

    def piece_values(self, z):
        z = self._pts(z)
        flat = z.reshape(-1, self.dimension)
        vals = np.stack([p.value(flat) for p in self.pieces])
        return vals.reshape((len(self.pieces),) + z.shape[:-1])

    def rho(self, z):
        """Defining function ``max_i rho_i``; vectorised over leading axes."""
        return self.piece_values(z).max(axis=0)

    def contains(self, z):
        return self.rho(z) < 0

    def active_piece(self, z):
        return self.piece_values(z).argmax(axis=0)

    def derivatives(self, z):
        """``(rho, d rho/dz, Levi matrix, holomorphic Hessian)`` from the active piece.

        Vectorised: ``z`` of shape ``(..., n)`` gives arrays with the same leading axes.
        """
        z = self._pts(z)
        lead = z.shape[:-1]
        flat = z.reshape(-1, self.dimension)
        n = self.dimension
        N = flat.shape[0]
        if len(self.pieces) == 1:
            idx = np.zeros(N, dtype=int)
        else:
            idx = np.stack([p.value(flat) for p in self.pieces]).argmax(axis=0)
        rho = np.empty(N)
        g = np.empty((N, n), complex)
        L = np.empty((N, n, n), complex)
        H = np.empty((N, n, n), complex)
        try:
            for k, piece in enumerate(self.pieces):
                sel = idx == k
                if not sel.any():
                    continue
                r_, g_, L_, H_ = piece.derivatives(flat[sel])
                rho[sel], g[sel], L[sel], H[sel] = r_, g_, L_, H_
        except (FloatingPointError, ValueError, ZeroDivisionError) as exc:
            raise EvaluationError(f"derivative oracle failed: {exc}") from exc
        return (rho.reshape(lead), g.reshape(lead + (n,)),
                L.reshape(lead + (n, n)), H.reshape(lead + (n, n)))

    def is_smooth_point(self, z, gap=1e-9):
        """True when a single piece is active at ``z`` (with margin ``gap``)."""
        if len(self.pieces) == 1:
            return True
        v = np.sort(self.piece_values(as_point(z, self.dimension)[None, :])[:, 0])
        return bool(v[-1] - v[-2] > gap)

    # -- serialisation ----------------------------------------------------

    def to_spec(self):
        """JSON-ready domain spec."""
        if self.poly is not None:
            d = {"name": "custom", "dimension": self.dimension, "params": list(self.params),
                 "defining_fn": self.poly.to_terms(),
                 "bounding_box": self.bounding_box.tolist()}
            if self.center is not None:
                d["center"] = [[float(c.real), float(c.imag)] for c in self.center]
            return d
        if self.name not in CATALOG:
            raise ArgumentError(f"domain {self.name!r} has no serialisable spec")
        return {"name": self.name, "dimension": self.dimension, "params": list(self.params)}

    def to_json(self, **kw):
        return json.dumps(self.to_spec(), **kw)


# ---------------------------------------------------------------------------
# catalog


def _block_kernel(blocks):
    def kernel(z):
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape[:-1])
        for idx, w in blocks:
            idx = list(idx)
            m = len(idx)
            s = (np.abs(z[..., idx]) ** 2 * np.asarray(w)).sum(axis=-1)
            out = out * math.factorial(m) * float(np.prod(w)) / math.pi**m / (1.0 - s) ** (m + 1)
        return out

    return kernel


def _block_distance(blocks):
    # unit weights only: each factor is a unit ball/disc
    def distance(z):
        z = np.asarray(z, dtype=complex)
        d = [1.0 - np.sqrt((np.abs(z[..., list(idx)]) ** 2).sum(axis=-1)) for idx, _ in blocks]
        return np.min(d, axis=0)

    return distance


def _block_distance_derivs(blocks, n):
    """delta = 1 - |z_b| on the nearest factor b: value, d delta/dz, Levi matrix."""

    def derivs(z):
        z = as_point(z, n)
        d = [1.0 - np.linalg.norm(z[list(idx)]) for idx, _ in blocks]
        b = int(np.argmin(d))
        idx = list(blocks[b][0])
        zb = z[idx]
        r = np.linalg.norm(zb)
        g = np.zeros(n, complex)
        L = np.zeros((n, n), complex)
        g[idx] = -zb.conj() / (2 * r)
        # Levi of |z_b|: I/(2r) - zbar z^T/(4 r^3)
        Lb = np.eye(len(idx)) / (2 * r) - np.outer(zb.conj(), zb) / (4 * r**3)
        L[np.ix_(idx, idx)] = -Lb
        return d[b], g, L

    return derivs


def _block_support(blocks):
    def support(v):
        v = np.asarray(v, dtype=complex)
        return sum(np.sqrt((np.abs(v[list(idx)]) ** 2 / np.asarray(w)).sum()) for idx, w in blocks)

    return support


def _block_leaves(blocks, n):
    def leaf_basis(p):
        p = as_point(p, n)
        vals = [(np.abs(p[list(idx)]) ** 2 * np.asarray(w)).sum() for idx, w in blocks]
        b = int(np.argmax(vals))
        others = [j for j in range(n) if j not in blocks[b][0]]
        return np.eye(n, dtype=complex)[:, others]

    return leaf_basis


def block_domain(name, blocks, params=()):
    """Product of weighted balls ``prod_b {sum_{j in b} a_j |z_j|^2 < 1}``."""
    blocks = tuple((tuple(int(i) for i in idx), tuple(float(x) for x in w)) for idx, w in blocks)
    n = sum(len(idx) for idx, _ in blocks)
    cover = sorted(i for idx, _ in blocks for i in idx)
    if cover != list(range(n)):
        raise ArgumentError("blocks must partition the coordinates")
    pieces = tuple(weighted_ball_piece(idx, w, n) for idx, w in blocks)
    half = np.zeros(n)
    for idx, w in blocks:
        for j, a in zip(idx, w):
            half[j] = 1.0 / math.sqrt(a)
    box = np.concatenate([np.stack([-half, half], axis=1)] * 2)
    unit = all(a == 1.0 for _, w in blocks for a in w)
    return DomainModel(
        name=name,
        dimension=n,
        pieces=pieces,
        bounding_box=box,
        params=tuple(params),
        blocks=blocks,
        center=np.zeros(n, complex),
        leaf_basis_fn=_block_leaves(blocks, n),
        kernel_oracle=_block_kernel(blocks),
        distance_oracle=_block_distance(blocks) if unit else None,
        distance_derivs_oracle=_block_distance_derivs(blocks, n) if unit else None,
        support_fn=_block_support(blocks),
    )


CATALOG = ("ball", "polydisc", "product_disc_ball", "ellipsoid")


def catalog_domain(name, dimension, params=()):
    """Build a catalog domain: ball, polydisc, product_disc_ball (D x B^{n-1}) or ellipsoid."""
    params = tuple(float(p) for p in params)
    if not isinstance(dimension, (int, np.integer)) or dimension < 1:
        raise ArgumentError(f"dimension must be a positive integer, got {dimension!r}")
    n = int(dimension)
    if name == "ball":
        if params:
            raise ArgumentError("ball takes no parameters")
        return block_domain("ball", [(range(n), [1.0] * n)])
    if name == "polydisc":
        if params:
            raise ArgumentError("polydisc takes no parameters")
        return block_domain("polydisc", [((j,), (1.0,)) for j in range(n)])
    if name == "product_disc_ball":
        if n < 2 or params:
            raise ArgumentError("product_disc_ball needs dimension >= 2 and no parameters")
        return block_domain("product_disc_ball", [((0,), (1.0,)), (range(1, n), [1.0] * (n - 1))])
    if name == "ellipsoid":
        if len(params) != n or min(params) <= 0:
            raise ArgumentError("ellipsoid needs one positive coefficient per coordinate")
        dom = block_domain("ellipsoid", [(range(n), params)], params=params)
        # a weighted ball is still Reinhardt, but no closed-form kernel is advertised
        return _replace(dom, kernel_oracle=None)
    raise ArgumentError(f"unknown catalog domain {name!r}")


def _replace(dom, **kw):
    from dataclasses import replace

    return replace(dom, **kw)


def custom_domain(terms, dimension, bounding_box, center=None, name="custom"):
    """Polynomial domain ``{Re sum c z^alpha zbar^beta < 0}`` with analytic derivatives."""
    n = int(dimension)
    table = PolyTable.from_terms(terms, n)
    box = np.asarray(bounding_box, dtype=float)
    if box.shape != (2 * n, 2):
        raise ArgumentError("bounding_box must list 2n [lo, hi] pairs (real parts then imaginary)")
    c = None if center is None else as_point(center, n)
    return DomainModel(name=name, dimension=n, pieces=(table.piece(),), bounding_box=box,
                       poly=table, center=c)


def function_domain(rho, dimension, bounding_box, name="function", center=None):
    """Domain from a scalar callable ``rho(z)``; derivatives by finite differences."""
    n = int(dimension)

    def value(z):
        return np.array([float(rho(p)) for p in np.atleast_2d(z)])

    return DomainModel(name=name, dimension=n, pieces=(Piece(value),),
                       bounding_box=np.asarray(bounding_box, dtype=float),
                       center=None if center is None else as_point(center, n))


def halfspace_piece(coord, threshold, n):
    """Piece ``threshold - Re z_coord`` (the half-space ``Re z_coord > threshold``)."""

    def value(z):
        return threshold - z[..., coord].real

    def grad(z):
        g = np.zeros(z.shape, complex)
        g[..., coord] = -0.5
        return g

    def zeros(z):
        return np.zeros(z.shape + (n,), complex)

    return Piece(value, grad, zeros, zeros)


def half_disc_kernel(w):
    """Bergman kernel of ``{|w| < 1, Re w > 0}`` on the diagonal.

    ``m(w) = (w + i)/(i - w)`` maps the half-disc onto a quarter plane and
    ``-m^2`` onto the upper half-plane, whose kernel is ``1/(4 pi Im^2)``.
    """
    w = np.asarray(w, dtype=complex)
    m = (w + 1j) / (1j - w)
    dm = 2j / (1j - w) ** 2
    return np.abs(m) ** 2 * np.abs(dm) ** 2 / (math.pi * (m * m).imag ** 2)


def intersect_domains(first, second, name=None, center=None):
    """``first`` intersected with ``second`` (defining function = max of all pieces)."""
    if first.dimension != second.dimension:
        raise ArgumentError("dimension mismatch")
    lo = np.maximum(first.bounding_box[:, 0], second.bounding_box[:, 0])
    hi = np.minimum(first.bounding_box[:, 1], second.bounding_box[:, 1])
    if np.any(lo >= hi):
        raise ArgumentError("the bounding boxes do not overlap")
    c = as_point(center, first.dimension) if center is not None else None
    return DomainModel(name=name or f"{first.name}&{second.name}", dimension=first.dimension,
                       pieces=first.pieces + second.pieces,
                       bounding_box=np.stack([lo, hi], axis=1), center=c)


def cut_half(domain, coord, threshold=0.0, center=None):
    """``domain`` intersected with ``{Re z_coord > threshold}``.

    When ``z_coord`` is its own unit-disc factor and the threshold is 0 the
    result is a product containing a half-disc and keeps a closed-form kernel.
    """
    n = domain.dimension
    box = domain.bounding_box.copy()
    box[coord, 0] = max(box[coord, 0], threshold)
    pieces = domain.pieces + (halfspace_piece(coord, threshold, n),)
    if center is None and domain.center is not None:
        center = domain.center.copy()
        hi = box[coord, 1]
        center[coord] = 0.5 * (threshold + hi)
    oracle = None
    blocks = domain.blocks or ()
    solo = [w for idx, w in blocks if tuple(idx) == (coord,)]
    if threshold == 0.0 and solo and solo[0] == (1.0,) and domain.kernel_oracle is not None:
        base = domain.kernel_oracle

        def oracle(z):
            z = np.asarray(z, dtype=complex)
            return base(z) / _block_kernel((((coord,), (1.0,)),))(z) * half_disc_kernel(z[..., coord])

    return DomainModel(name=f"{domain.name}&half{coord}", dimension=n, pieces=pieces,
                       bounding_box=box, center=None if center is None else as_point(center, n),
                       kernel_oracle=oracle)


def domain_from_spec(spec):
    """Inverse of :meth:`DomainModel.to_spec`; accepts a dict or JSON string."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    name = spec.get("name")
    n = spec.get("dimension")
    if name == "custom":
        center = spec.get("center")
        if center is not None:
            center = [complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in center]
        box = spec.get("bounding_box")
        if box is None:
            box = [[-2.0, 2.0]] * (2 * n)
        return custom_domain(spec["defining_fn"], n, box, center=center)
    return catalog_domain(name, n, spec.get("params", []))


# ---------------------------------------------------------------------------
# Levi form and rank


def levi_form(domain, z, X, Y):
    """``sum_{j,k} d2 rho/dz_j dzbar_k (z) X_j conj(Y_k)``."""
    n = domain.dimension
    z, X, Y = as_point(z, n), as_point(X, n), as_point(Y, n)
    _, _, L, _ = domain.derivatives(z)
    return complex(X @ L @ Y.conj())


@dataclass(frozen=True)
class LeviData:
    base_point: np.ndarray
    gradient: np.ndarray
    tangential_basis: np.ndarray  # columns
    levi_matrix: np.ndarray  # M_ab = L(t_b, t_a), so X = T c has L(X, X) = c^H M c
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # coefficient vectors, columns, same order
    rank: int
    nullspace_basis: np.ndarray  # columns, ambient coordinates
    rank_tolerance: float

    @property
    def positive_basis(self):
        """Ambient eigenvectors for the nonzero eigenvalues."""
        return self.tangential_basis @ self.eigenvectors[:, : self.rank]


def snap_to_boundary(domain, p):
    """Return ``p`` if it lies on the boundary, projecting it when it is within ``SNAP_TOL``."""
    p = as_point(p, domain.dimension)
    r = float(domain.rho(p))
    if abs(r) <= BOUNDARY_TOL:
        return p
    if abs(r) <= SNAP_TOL:
        return project_to_boundary(domain, p)
    raise ArgumentError(f"point is not on the boundary (rho = {r:.3e})")


def outward_normal(domain, p):
    """Unit outward normal as a complex vector: conj(d rho)/|d rho|."""
    _, g, _, _ = domain.derivatives(as_point(p, domain.dimension))
    ng = np.linalg.norm(g)
    if ng < BOUNDARY_TOL:
        raise DegenerateBoundaryError("gradient of the defining function vanishes")
    return g.conj() / ng


def levi_rank(domain, p, tol=1e-8):
    """Levi data at boundary point ``p``: tangential Levi matrix, eigenvalues and rank."""
    p = snap_to_boundary(domain, p)
    if not domain.is_smooth_point(p):
        raise ArgumentError("point is on a corner of the boundary")
    _, g, L, _ = domain.derivatives(p)
    ng = np.linalg.norm(g)
    if ng < BOUNDARY_TOL:
        raise DegenerateBoundaryError("gradient of the defining function vanishes at p")
    n = domain.dimension
    T = null_space(g[None, :]) if n > 1 else np.zeros((1, 0), complex)
    A = L.conj()  # X^H A X = L(X, X)
    M = T.conj().T @ A @ T
    M = 0.5 * (M + M.conj().T)
    if M.size:
        w, V = np.linalg.eigh(M)
        order = np.argsort(w)[::-1]
        w, V = w[order], V[:, order]
        scale = max(np.abs(M).max(), ng)
    else:
        w, V = np.zeros(0), np.zeros((0, 0), complex)
        scale = ng
    thr = tol * scale
    rank = int((w > thr).sum())
    null = T @ V[:, rank:]
    return LeviData(p, g, T, M, w, V, rank, null, thr)


def rank_near(domain, p, count=20, radius=1e-3, tol=1e-8, seed=0):
    """Levi ranks at ``count`` boundary points near ``p`` (tangential perturbations)."""
    rng = np.random.default_rng(seed)
    p = snap_to_boundary(domain, p)
    n = domain.dimension
    nu = outward_normal(domain, p)
    ranks = []
    for _ in range(count):
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        v -= np.vdot(nu, v) * nu
        nv = np.linalg.norm(v)
        q = p + radius * v / nv if nv > 0 else p
        q = project_to_boundary(domain, q)
        ranks.append(levi_rank(domain, q, tol).rank)
    return ranks


# ---------------------------------------------------------------------------
# projection and distance


def project_to_boundary(domain, z, max_iter=50, tol=1e-12):
    """Move ``z`` onto ``rho = 0`` by Newton steps along the gradient.

    Falls back to bisection along the normal ray when Newton fails to
    converge in ``max_iter`` steps.
    """
    n = domain.dimension
    z = as_point(z, n)
    q = z.copy()
    history = []
    for _ in range(max_iter):
        r, g, _, _ = domain.derivatives(q)
        history.append(float(r))
        if abs(r) <= tol:
            return q
        ng2 = float(np.vdot(g, g).real)
        if ng2 < 1e-30:
            break
        q = q - r * g.conj() / (2 * ng2)
    r = float(domain.rho(q))
    if abs(r) <= tol:
        return q
    return _bisect_ray(domain, z, history)


def _bisect_ray(domain, z, history):
    try:
        nu = outward_normal(domain, z)
    except DegenerateBoundaryError:
        raise ProjectionError("projection failed: vanishing gradient", {"rho_history": history})
    r0 = float(domain.rho(z))
    sign = 1.0 if r0 < 0 else -1.0
    t_lo, t_hi = 0.0, 1e-6
    span = float(np.ptp(domain.bounding_box, axis=1).max())
    while float(domain.rho(z + sign * t_hi * nu)) * r0 > 0:
        t_lo, t_hi = t_hi, 2 * t_hi
        if t_hi > 4 * span:
            raise ProjectionError("projection failed: no sign change along normal ray",
                                  {"rho_history": history})
    for _ in range(200):
        t = 0.5 * (t_lo + t_hi)
        v = float(domain.rho(z + sign * t * nu))
        if abs(v) <= 1e-12 or t_hi - t_lo < 1e-16:
            return z + sign * t * nu
        if v * r0 > 0:
            t_lo = t
        else:
            t_hi = t
    raise ProjectionError("projection failed: bisection did not converge", {"rho_history": history})


def nearest_boundary_point(domain, z, max_iter=50, validate=True):
    """Closest boundary point to ``z`` on the active smooth piece.

    Solves ``q - z + mu grad rho(q) = 0, rho(q) = 0`` by Newton, re-projecting
    onto ``rho = 0`` after every step, then compares against a ring of nearby
    boundary samples and restarts from any closer one.
    """
    z = as_point(z, domain.dimension)
    q = _newton_nearest(domain, z, project_to_boundary(domain, z), max_iter)
    if not validate:
        return q
    c = _closer_sample(domain, z, q)
    if c is not None:
        q2 = _newton_nearest(domain, z, c, max_iter)
        if np.linalg.norm(z - q2) < np.linalg.norm(z - q):
            q = q2
    return q


def _newton_nearest(domain, z, q, max_iter):
    n = domain.dimension
    xz = np.concatenate([z.real, z.imag])
    diag = {"iterations": 0, "residuals": []}
    for it in range(max_iter):
        r, g, L, H = domain.derivatives(q)
        gr = np.concatenate([2 * g.real, -2 * g.imag])  # real gradient
        xq = np.concatenate([q.real, q.imag])
        mu = float(gr @ (xz - xq)) / float(gr @ gr)
        F = np.concatenate([xq - xz + mu * gr, [r]])
        res = float(np.linalg.norm(F[:-1]))
        diag["residuals"].append(res)
        if res <= 1e-14 * max(1.0, np.linalg.norm(xz - xq)) and abs(r) <= 1e-12:
            return q
        J = np.zeros((2 * n + 1, 2 * n + 1))
        J[: 2 * n, : 2 * n] = np.eye(2 * n) + mu * real_hessian(L, H)
        J[: 2 * n, -1] = gr
        J[-1, : 2 * n] = gr
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise ProjectionError("singular projection system", diag) from exc
        xn = xq + step[: 2 * n]
        q = project_to_boundary(domain, xn[:n] + 1j * xn[n:])
        diag["iterations"] = it + 1
        if np.linalg.norm(step[: 2 * n]) < 1e-15:
            return q
    raise ProjectionError("nearest-point Newton did not converge", diag)


def _closer_sample(domain, z, q, samples=32):
    d0 = np.linalg.norm(z - q)
    if d0 == 0:
        return None
    n = domain.dimension
    rng = np.random.default_rng(12345)
    nu = outward_normal(domain, q)
    best, bd = None, d0
    for scale in (0.5 * d0, 0.1 * d0):
        for _ in range(samples):
            v = rng.normal(size=n) + 1j * rng.normal(size=n)
            v -= np.vdot(nu, v) * nu
            if np.linalg.norm(v) == 0:
                continue
            try:
                c = project_to_boundary(domain, q + scale * v / np.linalg.norm(v))
            except ProjectionError:
                continue
            d = np.linalg.norm(z - c)
            if d < bd - 1e-12:
                best, bd = c, d
    return best


def distance_to_boundary(domain, z):
    """Euclidean distance from an interior point to the boundary."""
    z = as_point(z, domain.dimension)
    if not bool(domain.contains(z)):
        raise ArgumentError("point is not inside the domain")
    if domain.distance_oracle is not None:
        return float(domain.distance_oracle(z))
    q = nearest_boundary_point(domain, z)
    return float(np.linalg.norm(z - q))


def signed_distance(domain, z):
    """``-dist`` inside, ``+dist`` outside (zero on the boundary)."""
    z = as_point(z, domain.dimension)
    r = float(domain.rho(z))
    if abs(r) <= 1e-14:
        return 0.0
    if r < 0 and domain.distance_oracle is not None:
        return -float(domain.distance_oracle(z))
    q = nearest_boundary_point(domain, z)
    d = float(np.linalg.norm(z - q))
    return -d if r < 0 else d


def sample_interior(domain, count, rng, region=None):
    """Uniform samples of the domain by rejection from its bounding box."""
    n = domain.dimension
    box = domain.bounding_box if region is None else np.asarray(region)
    out = []
    have = 0
    while have < count:
        x = rng.uniform(box[:, 0], box[:, 1], size=(max(4 * count, 64), 2 * n))
        z = x[:, :n] + 1j * x[:, n:]
        z = z[domain.contains(z)]
        out.append(z)
        have += len(z)
    return np.concatenate(out)[:count]


def sample_boundary(domain, count, rng):
    """Boundary points obtained by projecting interior samples radially from the centre."""
    c = domain.center if domain.center is not None else np.zeros(domain.dimension, complex)
    pts = sample_interior(domain, count, rng)
    out = []
    for z in pts:
        d = z - c
        nd = np.linalg.norm(d)
        if nd == 0:
            continue
        u = d / nd
        lo, hi = 0.0, float(np.ptp(domain.bounding_box, axis=1).max()) * 2
        for _ in range(80):
            t = 0.5 * (lo + hi)
            if domain.rho(c + t * u) < 0:
                lo = t
            else:
                hi = t
        q = c + 0.5 * (lo + hi) * u
        try:
            q = project_to_boundary(domain, q)
        except ProjectionError:
            continue
        out.append(q)
    return np.array(out)


def random_unitary(n, rng):
    """Haar-random unitary matrix."""
    Z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def transformed_domain(domain, U, factor=None, name=None):
    """Domain ``{w : rho(U^H w) < 0}`` (optionally with defining fn ``exp(h) rho``).

    Used to check invariance of the Levi rank under unitary changes of
    coordinates and under multiplication of the defining function by a positive
    factor.  Derivatives of the new pieces come from finite differences.
    """
    U = np.asarray(U, dtype=complex)
    Uh = U.conj().T

    def make(piece):
        def value(w):
            z = np.atleast_2d(w) @ Uh.T
            v = piece.value(z)
            if factor is not None:
                v = v * factor(z)
            return v

        return Piece(value)

    n = domain.dimension
    return DomainModel(name=name or f"{domain.name}-transformed", dimension=n,
                       pieces=tuple(make(p) for p in domain.pieces),
                       bounding_box=np.concatenate([np.stack([-np.ones(n), np.ones(n)], 1)] * 2)
                       * float(np.abs(domain.bounding_box).max()) * math.sqrt(n))
