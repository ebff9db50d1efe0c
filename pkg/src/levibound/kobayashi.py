"""Two-sided bounds for the Kobayashi metric and the comparability quantity M(z, X).

Upper bounds come from explicit analytic discs ``f(t) = z + t lam X + sum_k a_k t^k``
whose containment is checked on circle samples.  Lower bounds come from
Sibony witnesses ``u`` (``u(z) = 0``, ``0 <= u <= 1``, ``log u`` psh), for which
``F^S(z, X) >= L_u(z, X)^(1/2)`` and ``F^S <= F^K``.

Normalisation: the unit disc has ``F(0, 1) = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .errors import (
    ArgumentError,
    InfeasibleDiscError,
    OutOfCollarError,
    PreconditionError,
    ProjectionError,
)
from .geometry import as_point, distance_to_boundary, sample_boundary
from .wirtinger import wirtinger_fd

MARGIN = 1e-10


@dataclass(frozen=True)
class DiscFamily:
    """Polynomial discs of degree ``degree``; ``f(0) = z`` and ``f'(0) = lam X`` by construction."""

    degree: int = 1
    constraint_samples: int = 256
    verify_samples: int = 4096
    optimizer_budget: int = 200
    interior_circles: tuple = (0.25, 0.5, 0.75)
    bisection_steps: int = 40

    def __post_init__(self):
        if self.degree < 1:
            raise ArgumentError("disc degree must be >= 1")
        if self.constraint_samples < 8 or self.verify_samples < self.constraint_samples:
            raise ArgumentError("need constraint_samples >= 8 and verify_samples >= constraint_samples")


@dataclass(frozen=True)
class DiscResult:
    value: float  # 1 / lam
    lam: float
    coefficients: np.ndarray  # a_2 .. a_d, shape (d - 1, n)
    degree: int
    max_rho: float


def _circle(count, radii=(1.0,)):
    t = np.exp(2j * np.pi * np.arange(count) / count)
    return np.concatenate([r * t for r in radii])


def _disc_points(z, X, lam, coef, t):
    pts = z[None, :] + (t * lam)[:, None] * X[None, :]
    for k, a in enumerate(coef, start=2):
        pts = pts + (t**k)[:, None] * a[None, :]
    return pts


def _max_rho(domain, z, X, lam, coef, t):
    return float(domain.rho(_disc_points(z, X, lam, coef, t)).max())


def _fit_coefficients(domain, z, X, lam, coef0, fam, t):
    """Minimise ``max_t rho(f(t))`` over the higher coefficients (soft-max objective)."""
    n = z.shape[0]
    d = fam.degree
    if d == 1:
        return coef0, _max_rho(domain, z, X, lam, coef0, t)

    def unpack(v):
        c = v[: len(v) // 2] + 1j * v[len(v) // 2 :]
        return c.reshape(d - 1, n)

    def objective(v):
        r = domain.rho(_disc_points(z, X, lam, unpack(v), t))
        top = r.max()
        return top + np.log(np.exp((r - top) * 200).sum()) / 200

    v0 = np.concatenate([coef0.real.ravel(), coef0.imag.ravel()])
    res = minimize(objective, v0, method="Nelder-Mead" if v0.size <= 4 else "Powell",
                   options={"maxfev": fam.optimizer_budget * max(1, v0.size), "xatol": 1e-10,
                            "fatol": 1e-14} if v0.size <= 4 else
                   {"maxfev": fam.optimizer_budget * max(1, v0.size), "xtol": 1e-8, "ftol": 1e-14})
    coef = unpack(res.x)
    best = _max_rho(domain, z, X, lam, coef, t)
    base = _max_rho(domain, z, X, lam, coef0, t)
    return (coef, best) if best <= base else (coef0, base)


def _best_disc(domain, z, X, fam, coef_init=None, lam_init=None):
    n = z.shape[0]
    t = _circle(fam.constraint_samples, (1.0,) + tuple(fam.interior_circles))
    coef = np.zeros((fam.degree - 1, n), complex) if coef_init is None else coef_init.copy()

    def feasible(lam, c):
        c2, r = _fit_coefficients(domain, z, X, lam, c, fam, t)
        return r <= -MARGIN, c2

    lo = 0.0
    lo_coef = coef
    hi = lam_init if lam_init else distance_to_boundary(domain, z) / np.linalg.norm(X)
    ok, c = feasible(hi, coef)
    while ok:
        lo, lo_coef = hi, c
        hi *= 2
        ok, c = feasible(hi, c)
        if hi > 1e12:
            raise InfeasibleDiscError("disc search diverged; is the domain bounded?")
    if lo == 0.0:
        # the starting guess was infeasible: shrink
        for _ in range(60):
            hi /= 2
            ok, c = feasible(hi, coef)
            if ok:
                lo, lo_coef = hi, c
                hi *= 2
                break
        if lo == 0.0:
            raise InfeasibleDiscError("no contained disc found")
    for _ in range(fam.bisection_steps):
        mid = 0.5 * (lo + hi)
        ok, c = feasible(mid, lo_coef)
        if ok:
            lo, lo_coef = mid, c
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return lo, lo_coef


def _verify(domain, z, X, lam, coef, fam):
    t = _circle(fam.verify_samples, (1.0,) + tuple(fam.interior_circles))
    for _ in range(200):
        r = _max_rho(domain, z, X, lam, coef, t)
        if r <= -MARGIN:
            return lam, r
        lam *= 0.99
        coef = coef * 0.99
    raise InfeasibleDiscError("verification kept failing after repeated 1% shrinking")


def kobayashi_disc(domain, z, X, fam=None):
    """Best certified disc of the family; degrees ``1..d`` are tried in turn so the
    bound never gets worse as the degree grows."""
    fam = fam or DiscFamily()
    n = domain.dimension
    z = as_point(z, n)
    X = as_point(X, n)
    if not np.any(X):
        raise ArgumentError("X must be nonzero")
    if not bool(domain.contains(z)):
        raise ArgumentError("z is not inside the domain")
    # F(z, cX) = |c| F(z, X) and t -> e^{i theta} t preserves the unit disc, so
    # work with a unit X whose largest entry is real and positive, then map the
    # extremal disc back: g(s) = f(phase * s) has g'(0) = (lam / norm) X
    norm = float(np.linalg.norm(X))
    k = int(np.argmax(np.abs(X)))
    phase = X[k] / abs(X[k])
    X = X / (norm * phase)
    best = None
    coef = np.zeros((0, n), complex)
    lam_prev = None
    for d in range(1, fam.degree + 1):
        sub = DiscFamily(d, fam.constraint_samples, fam.verify_samples, fam.optimizer_budget,
                         fam.interior_circles, fam.bisection_steps)
        init = np.concatenate([coef, np.zeros((d - 1 - len(coef), n), complex)])
        lam, coef = _best_disc(domain, z, X, sub, init, lam_prev)
        lam, r = _verify(domain, z, X, lam, coef, sub)
        if best is None or lam > best.lam:
            best = DiscResult(1.0 / lam, lam, coef, d, r)
        lam_prev = best.lam
        coef = best.coefficients if len(best.coefficients) == d - 1 else coef
    powers = phase ** np.arange(2, best.degree + 1)
    return replace(best, value=best.value * norm, lam=best.lam / norm,
                   coefficients=best.coefficients * powers[:, None])


def kobayashi_upper(domain, z, X, fam=None):
    """Certified upper bound ``1/lam*`` for ``F^K(z, X)``."""
    return kobayashi_disc(domain, z, X, fam).value


# ---------------------------------------------------------------------------
# lower bounds


@dataclass(frozen=True)
class HolomorphicWitness:
    """``u = |h|^2`` with ``h(w) = (l(w)/s - a) / (1 - conj(a) l(w)/s)``, ``a = l(z)/s``.

    ``l(w) = sum c_j w_j`` and ``s = sup_domain |l|``, so ``|h| < 1`` on the
    domain, ``h(z) = 0`` and ``log u = 2 log|h|`` is plurisubharmonic.
    """

    center: np.ndarray
    functional: np.ndarray
    scale: float

    @property
    def a(self):
        return complex(self.functional @ self.center) / self.scale

    def value(self, w):
        w = np.asarray(w, dtype=complex)
        x = (w @ self.functional) / self.scale
        a = self.a
        return np.abs((x - a) / (1 - np.conj(a) * x)) ** 2

    def levi(self, w=None):
        """Levi matrix of ``u`` at the centre: ``conj-outer`` of ``h'(z)``."""
        dh = self.functional / (self.scale * (1 - abs(self.a) ** 2))
        return np.outer(dh, dh.conj())

    def levi_form(self, X):
        dh = self.functional / (self.scale * (1 - abs(self.a) ** 2))
        return float(abs(dh @ np.asarray(X, dtype=complex)) ** 2)

    def certify(self, domain, samples=2000, seed=0):
        """Maximum of ``u`` on boundary samples (must be <= 1)."""
        pts = sample_boundary(domain, samples, np.random.default_rng(seed))
        return float(self.value(pts).max())


def _ball_automorphism(p, w):
    """``phi_p(w) = (p - P_p w - s_p Q_p w) / (1 - <w, p>)`` on the unit ball (rows of ``w``)."""
    pp = float(np.vdot(p, p).real)
    ip = w @ p.conj()
    if pp == 0.0:
        return -w
    Pw = ip[:, None] * p[None, :] / pp
    sp = math.sqrt(1 - pp)
    return (p[None, :] - Pw - sp * (w - Pw)) / (1 - ip)[:, None]


@dataclass(frozen=True)
class BallWitness:
    """``u = |<phi_p(A w_b), v>|^2`` on one weighted-ball factor ``b`` of a product.

    ``A = diag(sqrt(a_j))`` sends the factor onto the unit ball, ``p = A z_b``
    and ``phi_p`` is the ball automorphism swapping ``p`` and ``0``.  The
    projection onto a factor is holomorphic, so ``h`` is bounded by 1 on the
    whole product and vanishes at ``z``.
    """

    center: np.ndarray
    indices: tuple
    weights: tuple
    direction: np.ndarray  # unit vector v in C^{m}

    def _p(self):
        return np.sqrt(np.asarray(self.weights)) * self.center[list(self.indices)]

    def value(self, w):
        w = np.atleast_2d(np.asarray(w, dtype=complex))
        y = np.sqrt(np.asarray(self.weights)) * w[:, list(self.indices)]
        return np.abs(_ball_automorphism(self._p(), y) @ self.direction.conj()) ** 2

    def derivative(self, X):
        """``d phi_p(p)`` applied to ``A X_b``."""
        p = self._p()
        Y = np.sqrt(np.asarray(self.weights)) * np.asarray(X, dtype=complex)[list(self.indices)]
        pp = float(np.vdot(p, p).real)
        if pp == 0.0:
            return -Y
        PY = np.vdot(p, Y) * p / pp
        return -(PY / (1 - pp) + (Y - PY) / math.sqrt(1 - pp))

    def levi_form(self, X):
        return float(abs(np.vdot(self.direction, self.derivative(X))) ** 2)

    def certify(self, domain, samples=2000, seed=0):
        pts = sample_boundary(domain, samples, np.random.default_rng(seed))
        return float(self.value(pts).max())


def ball_witness(domain, z, X):
    """Best :class:`BallWitness` over the weighted-ball factors (exact Kobayashi value there)."""
    if domain.blocks is None or len(domain.pieces) != len(domain.blocks):
        raise PreconditionError("ball witnesses need a product of weighted balls")
    z = as_point(z, domain.dimension)
    X = as_point(X, domain.dimension)
    best, best_q = None, -1.0
    for idx, w in domain.blocks:
        trial = BallWitness(z, tuple(idx), tuple(w), np.zeros(len(idx), complex))
        v = trial.derivative(X)
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        wit = BallWitness(z, tuple(idx), tuple(w), v / nv)
        q = wit.levi_form(X)
        if q > best_q:
            best, best_q = wit, q
    if best is None:
        raise PreconditionError("X has no component along any factor")
    return best


def _functional_score(domain, z, X, c):
    s = _support(domain, c)
    a = abs(c @ z) / s
    if a >= 1:
        return -math.inf, s
    return abs(c @ X) ** 2 / (s * s * (1 - a * a) ** 2), s


def _support(domain, c):
    """``sup_domain |sum c_j w_j|`` for products of weighted balls (closed form)."""
    # sup over a block of |sum c_j w_j| with sum a_j |w_j|^2 < 1 is sqrt(sum |c_j|^2 / a_j)
    return float(domain.support_fn(c))


def caratheodory_witness(domain, z, X, restarts=4, seed=0):
    """Best Moebius-of-linear witness for ``(z, X)``; needs a closed-form support function."""
    if domain.support_fn is None:
        raise PreconditionError("holomorphic witnesses need a domain support function")
    n = domain.dimension
    z = as_point(z, n)
    X = as_point(X, n)
    rng = np.random.default_rng(seed)
    starts = [X.conj(), z.conj() if np.any(z) else X.conj()]
    if domain.blocks is not None:
        for idx, _ in domain.blocks:
            for v in (X, z):
                c = np.zeros(n, complex)
                c[list(idx)] = v[list(idx)].conj()
                if np.any(c):
                    starts.append(c)
    starts += [rng.normal(size=n) + 1j * rng.normal(size=n) for _ in range(restarts)]

    def neg(v):
        c = v[:n] + 1j * v[n:]
        if not np.any(c):
            return 0.0
        sc, _ = _functional_score(domain, z, X, c)
        return -sc if np.isfinite(sc) else 0.0

    best_c, best = None, -1.0
    for c0 in starts:
        v0 = np.concatenate([c0.real, c0.imag])
        res = minimize(neg, v0, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
        for v in (res.x, v0):
            sc = -neg(v)
            if sc > best:
                best, best_c = sc, v[:n] + 1j * v[n:]
    if best_c is None or best <= 0:
        raise PreconditionError("no admissible linear functional found")
    return HolomorphicWitness(z, best_c, _support(domain, best_c))


def sibony_lower(domain, z, X, witness=None):
    """``L_u(z, X)^(1/2)`` for a certified witness centred at ``z``."""
    n = domain.dimension
    z = as_point(z, n)
    X = as_point(X, n)
    if witness is None:
        if domain.blocks is not None and len(domain.pieces) == len(domain.blocks):
            witness = ball_witness(domain, z, X)
        else:
            witness = caratheodory_witness(domain, z, X)
    if not np.allclose(witness.center, z, atol=1e-12, rtol=0):
        raise ArgumentError("witness is not centred at z")
    if isinstance(witness, (HolomorphicWitness, BallWitness)):
        q = witness.levi_form(X)
    else:
        report = getattr(witness, "report", {}) or {}
        if report and not report.get("log_psh", False):
            raise PreconditionError("witness failed its log-psh certification")
        q = witness.levi_form(z, X)
    return math.sqrt(max(q, 0.0))


# ---------------------------------------------------------------------------
# comparability quantity


def distance_derivatives(domain, z):
    """``(delta, d delta/dz, Levi matrix of delta)`` for the boundary distance at ``z``."""
    n = domain.dimension
    z = as_point(z, n)
    if domain.distance_derivs_oracle is not None:
        return domain.distance_derivs_oracle(z)
    try:
        d0 = distance_to_boundary(domain, z)
        h = 1e-4 * d0

        def f(w):
            return distance_to_boundary(domain, w)

        _, g, L, _ = wirtinger_fd(f, z, h=h, richardson=False)
    except ProjectionError as exc:
        raise OutOfCollarError(f"distance is not smooth at z: {exc}", getattr(exc, "diagnostics", None)) from exc
    return d0, g, L


def comparability_M(domain, z, X):
    """``|L_delta(z, X)| / delta + |<d delta, X>|^2 / delta^2``."""
    n = domain.dimension
    X = as_point(X, n)
    d, g, L = distance_derivatives(domain, z)
    lev = abs(complex(X @ L @ X.conj()))
    return lev / d + abs(complex(g @ X)) ** 2 / d**2


@dataclass
class SandwichRecord:
    domain: str
    z: list
    X: list
    lower: float
    upper: float
    ok: bool = field(init=False)

    def __post_init__(self):
        self.ok = bool(self.lower <= self.upper + 1e-9)
