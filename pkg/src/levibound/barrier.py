"""Bounded plurisubharmonic barriers with large Hessians, and log-psh witnesses.

In chart coordinates ``zeta`` with defining function ``rho``:

    phi_delta(zeta) = chi1(omega(zeta, delta) / a^2)
    G(zeta)         = phi_delta(zeta) * exp(M rho(zeta) / delta)
    g(zeta)         = (chi2(G(zeta)) + C2 |zeta|^2) / C1

The constants are found by a dyadic search and every property is certified
by sampling with fixed seeds.  Complex gradients and Levi matrices are
assembled analytically by the chain rule; finite differences are used only
for the derivative-growth check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cutoffs import CutoffPair, chi_witness, log_chi_derivs
from .errors import (
    ArgumentError,
    CertificationFailure,
    OutOfRangeError,
    PreconditionError,
)
from .geometry import as_point, sample_interior

PSD_TOL = 1e-9
HESSIAN_CAP = 2.0**10


def omega_weights(n, l, delta):
    if delta <= 0:
        raise ArgumentError("delta must be positive")
    if not 0 <= l <= n - 1:
        raise ArgumentError(f"need 0 <= l <= n-1, got l={l}, n={n}")
    return np.concatenate([[delta**-2], np.full(n - l - 1, 1.0 / delta), np.ones(l)])


def omega_weight(X, delta, l):
    """``|X_1|^2/delta^2 + sum_{2..n-l} |X_j|^2/delta + sum_{n-l+1..n} |X_j|^2``."""
    X = np.asarray(X, dtype=complex)
    w = omega_weights(X.shape[-1], l, delta)
    return (w * np.abs(X) ** 2).sum(axis=-1)


def coordinate_scales(n, l, delta):
    """Natural size of each coordinate at scale delta: (delta, sqrt(delta), 1)."""
    return np.concatenate([[delta], np.full(n - l - 1, math.sqrt(delta)), np.ones(l)])


# ---------------------------------------------------------------------------
# boxes


@dataclass(frozen=True)
class FrequencyBox:
    """``P_{delta,a}`` (kind "P") or ``Q_{delta,c}`` (kind "Q", centred at ``-c delta``)."""

    delta: float
    scale: float
    kind: str
    n: int
    l: int

    @property
    def center_shift(self):
        return -self.scale * self.delta if self.kind == "Q" else 0.0

    @property
    def radii(self):
        r = coordinate_scales(self.n, self.l, self.delta)
        return r * (self.scale if self.kind == "P" else self.scale**2)

    def contains(self, zeta):
        zeta = np.asarray(zeta, dtype=complex).copy()
        zeta[..., 0] -= self.center_shift
        return np.all(np.abs(zeta) < self.radii, axis=-1)

    def sample(self, rng, count):
        n = self.n
        r = np.sqrt(rng.uniform(0, 1, size=(count, n))) * self.radii
        th = rng.uniform(0, 2 * np.pi, size=(count, n))
        z = r * np.exp(1j * th)
        z[:, 0] += self.center_shift
        return z


# ---------------------------------------------------------------------------
# barrier


@dataclass(frozen=True)
class BarrierFunction:
    chart: object = field(repr=False)
    delta: float
    M: float
    a: float
    b: float
    C1: float
    C2: float
    c: float
    radius: float
    cutoffs: CutoffPair = field(default_factory=CutoffPair, repr=False)
    search_log: tuple = field(default=(), repr=False, compare=False)

    @property
    def n(self):
        return self.chart.dimension

    @property
    def l(self):
        return self.chart.n_flat

    def box(self, kind):
        if kind == "P":
            return FrequencyBox(self.delta, self.a * self.b, "P", self.n, self.l)
        return FrequencyBox(self.delta, self.c, "Q", self.n, self.l)

    def evaluate(self, zeta, hessian=True):
        """``(g, dg/dzeta, Levi matrix of g)``; vectorised over leading axes."""
        zeta = np.asarray(zeta, dtype=complex)
        lead = zeta.shape[:-1]
        flat = zeta.reshape(-1, self.n)
        parts = _assemble(self.chart, self.delta, self.M, self.a, self.cutoffs, flat, hessian)
        g = (parts["ghat"] + self.C2 * (np.abs(flat) ** 2).sum(-1)) / self.C1
        if not hessian:
            return g.reshape(lead), None, None
        grad = (parts["ghat_j"] + self.C2 * flat.conj()) / self.C1
        L = (parts["ghat_L"] + self.C2 * np.eye(self.n)) / self.C1
        return g.reshape(lead), grad.reshape(zeta.shape), L.reshape(lead + (self.n, self.n))

    def value(self, zeta):
        return self.evaluate(zeta, hessian=False)[0]

    def G(self, zeta):
        return _assemble(self.chart, self.delta, self.M, self.a, self.cutoffs, zeta, False)["G"]

    def to_dict(self):
        return {"delta": self.delta, "M": self.M, "a": self.a, "b": self.b, "C1": self.C1,
                "C2": self.C2, "c": self.c, "radius": self.radius,
                "search_steps": len(self.search_log)}


def _assemble(chart, delta, M, a, cut, zeta, hessian):
    zeta = np.asarray(zeta, dtype=complex)
    n = chart.dimension
    w = omega_weights(n, chart.n_flat, delta)
    r, rg, rL, _ = chart.rho_derivatives(zeta)
    t = (w * np.abs(zeta) ** 2).sum(-1) / a**2
    f, f1, f2, _ = cut.chi1(t)
    with np.errstate(under="ignore", over="ignore"):
        E = np.exp(np.minimum(M * r / delta, 50.0))
    G = f * E
    h, h1, h2, _ = cut.chi2(G)
    out = {"G": G, "ghat": h, "phi": f, "rho": r}
    if not hessian:
        return out
    k = M / delta
    t_j = w * zeta.conj() / a**2
    phi_j = f1[..., None] * t_j
    E_j = (E * k)[..., None] * rg
    G_j = phi_j * E[..., None] + f[..., None] * E_j
    outer = lambda u, v: u[..., :, None] * v.conj()[..., None, :]
    phi_L = f2[..., None, None] * outer(t_j, t_j) + f1[..., None, None] * np.diag(w / a**2)
    E_L = E[..., None, None] * (k * rL + k**2 * outer(rg, rg))
    G_L = (phi_L * E[..., None, None] + outer(phi_j, E_j) + outer(E_j, phi_j)
           + f[..., None, None] * E_L)
    out["ghat_j"] = h1[..., None] * G_j
    out["ghat_L"] = h2[..., None, None] * outer(G_j, G_j) + h1[..., None, None] * G_L
    out["G_L"] = G_L
    return out


def _min_eig(L):
    Lh = 0.5 * (L + np.swapaxes(L, -1, -2).conj())
    return np.linalg.eigvalsh(Lh)[..., 0]


def _sample_region(chart, rng, count, radius):
    """Uniform samples of ``B(0, radius)`` intersected with the chart image of the domain."""
    n = chart.dimension
    out = []
    have = 0
    while have < count:
        v = rng.normal(size=(2 * count, n)) + 1j * rng.normal(size=(2 * count, n))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        v *= radius * rng.uniform(0, 1, size=(2 * count, 1)) ** (1.0 / (2 * n))
        v = v[chart.domain.contains(chart.inverse(v))]
        out.append(v)
        have += len(v)
    return np.concatenate(out)[:count]


def _boundary_layer(chart, delta, z, rng):
    """Move samples to depth ``delta * 10^U(-5, 0)`` below the boundary along Re zeta_1."""
    t, ok = chart.boundary_graph(z[:, 0].imag, z[:, 1:])
    depth = delta * 10.0 ** rng.uniform(-5, 0, size=len(z))
    z = z.copy()
    z[:, 0] = t - depth + 1j * z[:, 0].imag
    return z[ok]


def sample_plan(chart, delta, a, rng, count, radius):
    """Sample plan for the chart image of the domain.

    30% fill the cutoff support, 30% sit in a thin layer under the boundary
    inside the support (where ``exp(M rho / delta)`` is not negligible), 25% lie
    in the outer shell of the support where phi bends, and 15% are uniform in
    ``B(0, radius)``.
    """
    n, l = chart.dimension, chart.n_flat
    box = FrequencyBox(delta, a, "P", n, l)
    parts = []
    want = [int(0.3 * count), int(0.3 * count), int(0.25 * count)]
    for i, k in enumerate(want):
        got = []
        have = 0
        while have < k:
            z = box.sample(rng, 4 * k + 16)
            t = omega_weight(z, delta, l) / a**2
            sel = (t < 1.0) if i < 2 else (t > 0.4) & (t < 1.05)
            z = z[sel]
            if i == 1:
                z = _boundary_layer(chart, delta, z, rng)
            z = z[(np.linalg.norm(z, axis=1) < radius) & chart.domain.contains(chart.inverse(z))]
            got.append(z)
            have += len(z)
        parts.append(np.concatenate(got)[:k])
    parts.append(_sample_region(chart, rng, count - sum(want), radius))
    return np.concatenate(parts)


def _q_samples(chart, delta, c, rng, count):
    box = FrequencyBox(delta, c, "Q", chart.dimension, chart.n_flat)
    return box.sample(rng, count)


def _choose_c(chart, delta, a, b, rng, radius, samples=1000):
    """Largest dyadic c with Q_{delta,c} inside P_{delta,ab} and inside the domain image."""
    ab = a * b
    c = 0.5
    while c > 1e-12:
        if c + c * c <= ab and c * c <= ab:
            box = FrequencyBox(delta, c, "Q", chart.dimension, chart.n_flat)
            z = box.sample(rng, samples)
            # include the extreme point nearest the boundary
            far = np.zeros((1, chart.dimension), complex)
            far[0, 0] = -c * delta + c * c * delta
            far[0, 1:] = box.radii[1:]
            z = np.concatenate([z, far])
            if np.all(chart.domain.contains(chart.inverse(z))) and np.all(np.linalg.norm(z, axis=1) < radius):
                return c
        c /= 2
    raise CertificationFailure("no admissible Q-box scale c")


def _weight_matrix(rg, n, l, delta):
    """Hermitian matrix W with Y^H W Y = |<d rho, Y>|^2/delta^2 + sum' |Y_j|^2/delta + sum'' |Y_j|^2."""
    d = np.concatenate([[0.0], np.full(n - l - 1, 1.0 / delta), np.ones(l)])
    v = rg  # <d rho, Y> = sum_j rho_j Y_j
    W = v.conj()[..., :, None] * v[..., None, :] / delta**2 + np.diag(d)
    return W


def hessian_lower_constant(bf, zeta):
    """Largest c0 with L_g(zeta, Y) >= c0 * weight(Y) at every sample (generalised eigenvalue)."""
    _, _, L = bf.evaluate(zeta)
    _, rg, _, _ = bf.chart.rho_derivatives(zeta)
    W = _weight_matrix(rg, bf.n, bf.l, bf.delta)
    A = np.swapaxes(L, -1, -2)  # Y^H A Y = L(Y, Y)
    Cw = np.linalg.cholesky(W)
    Ci = np.linalg.inv(Cw)
    S = Ci @ A @ np.swapaxes(Ci, -1, -2).conj()
    return float(_min_eig(S).min())


def build_barrier(chart, delta, search_budget=1000, samples=2000, seed=0, cutoffs=None):
    """Search constants (a, M, b, C1, C2) until the barrier properties certify on samples.

    ``a`` halves from 1, ``M`` doubles from 8, ``b`` halves from 1/2 and
    ``C2`` is the dyadic ceiling of twice the worst negative Levi eigenvalue of
    ``chi2(G)``; ``C1 = chi2(1) + C2 R^2`` with ``R`` the chart's valid radius.
    """
    return build_barrier_family(chart, [delta], search_budget, samples, seed, cutoffs)[0]


def build_barrier_family(chart, deltas, search_budget=1000, samples=2000, seed=0, cutoffs=None):
    """One set of constants ``(a, M, b, c, C1, C2)`` certified at every delta of a sweep.

    Searching per delta lets ``M`` and ``C2`` drift with delta, which pollutes
    derivative-growth fits; a shared search keeps them uniform.
    """
    if search_budget < 1:
        raise ArgumentError("search_budget must be >= 1")
    deltas = [float(d) for d in np.atleast_1d(deltas)]
    cut = cutoffs or CutoffPair.default()
    R = chart.valid_radius
    for delta in deltas:
        if delta <= 0 or math.sqrt(delta) >= R:
            raise OutOfRangeError(f"delta={delta} exceeds the chart range (valid radius {R})")
    n, l = chart.dimension, chart.n_flat
    dmax = max(deltas)
    size = math.sqrt(dmax**2 + (n - l - 1) * dmax + l)
    rng = np.random.default_rng(seed)
    steps = []
    worst = None
    a = 1.0
    while a * size > R / 2:
        a /= 2
    while len(steps) < search_budget and a > 1e-6:
        plans = [sample_plan(chart, d, a, rng, samples, R) for d in deltas]
        M = 8.0
        while len(steps) < search_budget and M <= 2.0**20:
            neg = max(_worst_negative(chart, d, M, a, cut, pts, rng, R)
                      for d, pts in zip(deltas, plans))
            steps.append({"a": a, "M": M, "neg": neg})
            if neg > HESSIAN_CAP:
                worst = {"reason": "negative Levi eigenvalue too large", "a": a, "M": M, "neg": neg}
                M *= 2
                continue
            bs = [_choose_b(chart, d, a, M, cut, rng) for d in deltas]
            if any(b is None for b in bs):
                worst = {"reason": "no b with G > 1/2 on P_{delta,ab}", "a": a, "M": M}
                M *= 2
                continue
            b = min(bs)
            c = min(_choose_c(chart, d, a, b, rng, R) for d in deltas)
            C2 = 2.0 ** math.ceil(math.log2(max(2 * neg, 1.0)))
            for _ in range(2):
                # a second round enlarges the psd slack if fresh samples disagree
                C1 = float(cut.chi2(1.0)[0]) + C2 * R * R
                family = [BarrierFunction(chart, d, M, a, b, C1, C2, c, R, cut, tuple(steps))
                          for d in deltas]
                checks = [_quick_check(bf, rng, samples) for bf in family]
                bad = [info for ok, info in checks if not ok]
                if not bad:
                    return family
                worst = bad[0]
                C2 *= 4
            M *= 2
        a /= 2
    raise CertificationFailure(f"barrier search exhausted after {len(steps)} steps", worst)


def _worst_negative(chart, delta, M, a, cut, pts, rng, radius, keep=20, rounds=4, tries=40):
    """Most negative Levi eigenvalue of ``chi2(G)``: sampled, then refined by
    random local search around the worst samples (negative pockets are thin)."""
    me = _min_eig(_assemble(chart, delta, M, a, cut, pts, True)["ghat_L"])
    worst = float(-me.min())
    if worst <= 0:
        return max(worst, 0.0)
    scales = coordinate_scales(chart.dimension, chart.n_flat, delta) * a
    seeds = pts[np.argsort(me)[:keep]]
    step = 0.1
    for _ in range(rounds):
        n = chart.dimension
        jit = (rng.normal(size=(len(seeds), tries, n)) + 1j * rng.normal(size=(len(seeds), tries, n)))
        cand = (seeds[:, None, :] + step * jit * scales).reshape(-1, n)
        cand = cand[(np.linalg.norm(cand, axis=1) < radius) & chart.domain.contains(chart.inverse(cand))]
        if len(cand) == 0:
            break
        mc = _min_eig(_assemble(chart, delta, M, a, cut, cand, True)["ghat_L"])
        allp = np.concatenate([seeds, cand])
        allm = np.concatenate([_min_eig(_assemble(chart, delta, M, a, cut, seeds, True)["ghat_L"]), mc])
        order = np.argsort(allm)[:keep]
        seeds = allp[order]
        worst = max(worst, float(-allm[order[0]]))
        step /= 3
    return max(worst, 0.0)


def _choose_b(chart, delta, a, M, cut, rng, samples=500):
    b = 0.5
    n, l = chart.dimension, chart.n_flat
    while b > 1e-9:
        box = FrequencyBox(delta, a * b, "P", n, l)
        z = box.sample(rng, samples)
        z = z[chart.domain.contains(chart.inverse(z))]
        if len(z):
            parts = _assemble(chart, delta, M, a, cut, z, False)
            if np.all(parts["phi"] == 1.0) and np.all(parts["G"] > 0.5):
                return b
        b /= 2
    return None


def _quick_check(bf, rng, samples):
    pts = sample_plan(bf.chart, bf.delta, bf.a, rng, samples, bf.radius)
    g, _, L = bf.evaluate(pts)
    scale = np.abs(L).max(axis=(-1, -2))
    me = _min_eig(L)
    bad = me < -PSD_TOL * scale
    if bad.any() or g.max() > 1.0 or g.min() < 0.0:
        i = int(np.argmin(me / scale))
        return False, {"zeta": pts[i].tolist(), "min_eig": float(me[i]), "g_max": float(g.max())}
    return True, None


# ---------------------------------------------------------------------------
# verification


def _fd_stencil(alpha, steps):
    """Tensor-product central-difference stencil for prod_j d^{alpha_j}/dx_j^{alpha_j}."""
    one = {0: [(0, 1.0)], 1: [(-1, -0.5), (1, 0.5)], 2: [(-1, 1.0), (0, -2.0), (1, 1.0)],
           3: [(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)]}
    n = len(alpha)
    items = [(np.zeros(n), 1.0)]
    for j, k in enumerate(alpha):
        new = []
        for off, wgt in items:
            for o, w in one[k]:
                v = off.copy()
                v[j] += o * steps[j]
                new.append((v, wgt * w / steps[j] ** k))
        items = new
    offs = np.array([o for o, _ in items])
    wts = np.array([w for _, w in items])
    return offs, wts


def multi_indices(n, max_order=3):
    out = []
    for total in range(1, max_order + 1):
        for combo in itertools.combinations_with_replacement(range(n), total):
            a = [0] * n
            for j in combo:
                a[j] += 1
            out.append(tuple(a))
    return out


def predicted_exponent(alpha, n, l):
    """Exponent e in |D^alpha g| <~ delta^{-e}: alpha_1 + (1/2) sum_{j=2}^{n-l} alpha_j."""
    return alpha[0] + 0.5 * sum(alpha[1 : n - l])


def derivative_maxima(bf, unit_pts, rel_step=1e-3):
    """max |D^alpha g| over points of P_{delta,ab}, using x-direction derivatives.

    ``unit_pts`` lives in the unit polydisc and is scaled into the box so that
    the same normalised pattern is used at every delta.
    """
    box = bf.box("P")
    pts = unit_pts * box.radii
    pts = pts[bf.chart.domain.contains(bf.chart.inverse(pts))]
    n = bf.n
    steps = rel_step * coordinate_scales(n, bf.l, bf.delta)
    out = {}
    for alpha in multi_indices(n):
        offs, wts = _fd_stencil(alpha, steps)
        vals = bf.value(pts[:, None, :] + offs[None, :, :])
        d = vals @ wts
        out[alpha] = float(np.abs(d).max())
    return out


@dataclass
class BarrierReport:
    delta: float
    constants: dict
    bound_max: float
    bound_min: float
    bound_pass: bool
    psd_min_ratio: float
    psd_pass: bool
    c0: float
    c0_pass: bool
    derivative_constants: dict
    samples: dict

    def to_dict(self):
        d = dict(self.__dict__)
        d["derivative_constants"] = {",".join(map(str, k)): v for k, v in self.derivative_constants.items()}
        return d

    @property
    def passed(self):
        return self.bound_pass and self.psd_pass and self.c0_pass


def verify_barrier(bf, plan=None, seed=1):
    """Certify properties (1)-(4) on fresh samples; returns a :class:`BarrierReport`.

    ``plan`` keys: ``region`` (default 10^4), ``q`` (10^3), ``derivs`` (200).
    """
    plan = {"region": 10_000, "q": 1000, "derivs": 200, **(plan or {})}
    rng = np.random.default_rng(seed)
    pts = sample_plan(bf.chart, bf.delta, bf.a, rng, plan["region"], bf.radius)
    g, _, L = bf.evaluate(pts)
    scale = np.abs(L).max(axis=(-1, -2))
    me = _min_eig(L)
    ratio = float((me / scale).min())
    q = _q_samples(bf.chart, bf.delta, bf.c, rng, plan["q"])
    c0 = hessian_lower_constant(bf, q)
    unit = FrequencyBox(1.0, 1.0, "P", bf.n, bf.l).sample(rng, plan["derivs"])
    maxima = derivative_maxima(bf, unit)
    dconst = {al: m * bf.delta ** predicted_exponent(al, bf.n, bf.l) for al, m in maxima.items()}
    return BarrierReport(
        delta=bf.delta,
        constants=bf.to_dict(),
        bound_max=float(g.max()),
        bound_min=float(g.min()),
        bound_pass=bool(g.max() <= 1.0 and g.min() >= 0.0),
        psd_min_ratio=ratio,
        psd_pass=bool(ratio >= -PSD_TOL),
        c0=c0,
        c0_pass=bool(c0 > 0),
        derivative_constants=dconst,
        samples={k: int(v) for k, v in plan.items()},
    )


def fd_noise_floor(bf, alpha, rel_step=1e-3, headroom=1e3):
    """Size below which a stencil value is indistinguishable from rounding.

    Central differences of a function of size ``|g| <= 1`` carry an error of
    about ``eps * sum |w|``; ``headroom`` leaves room for cancellation in the
    evaluation of ``g`` itself.
    """
    steps = rel_step * coordinate_scales(bf.n, bf.l, bf.delta)
    _, wts = _fd_stencil(alpha, steps)
    return headroom * np.finfo(float).eps * float(np.abs(wts).sum())


def derivative_slopes(barriers, unit_pts, rel_step=1e-3):
    """Fit log max|D^alpha g| against log delta across a sweep of barriers.

    Returns ``{alpha: (slope, predicted)}``.  A derivative whose stencil value
    stays below :func:`fd_noise_floor` at every delta vanishes identically on
    the box (up to rounding) and is reported with slope ``None``.
    """
    deltas = np.array([bf.delta for bf in barriers])
    tables = [derivative_maxima(bf, unit_pts, rel_step) for bf in barriers]
    n, l = barriers[0].n, barriers[0].l
    out = {}
    for alpha in tables[0]:
        e = predicted_exponent(alpha, n, l)
        if all(t[alpha] <= fd_noise_floor(bf, alpha, rel_step) for t, bf in zip(tables, barriers)):
            out[alpha] = (None, -e)
            continue
        vals = np.array([t[alpha] for t in tables])
        slope = np.polyfit(np.log(deltas), np.log(vals), 1)[0]
        out[alpha] = (float(slope), -e)
    return out


# ---------------------------------------------------------------------------
# log-psh witness


@dataclass(frozen=True)
class LogPshWitness:
    """``u(z) = chi(g(z)) exp(M (phi(z) - 1))`` with ``g = sum |z_j - c_j|^2 / beta_j^2``."""

    center: np.ndarray
    radii: np.ndarray
    M: float
    phi: object = field(repr=False)
    alpha: float = 0.0
    report: dict = field(default_factory=dict, compare=False)

    def _g(self, z):
        d = z - self.center
        g = (np.abs(d) ** 2 / self.radii**2).sum(-1)
        gj = d.conj() / self.radii**2
        return g, gj

    def value(self, z):
        z = np.asarray(z, dtype=complex)
        g, _ = self._g(z)
        ph = self.phi(z)[0]
        return chi_witness(g)[0] * np.exp(self.M * (ph - 1.0))

    def levi(self, z):
        """Levi matrix of u at ``z``."""
        z = np.asarray(z, dtype=complex)
        g, gj = self._g(z)
        ph, phj, phL = self.phi(z)
        f, f1, f2, _ = chi_witness(g)
        B = np.exp(self.M * (ph - 1.0))
        Bj = (self.M * B)[..., None] * phj
        outer = lambda u, v: u[..., :, None] * v.conj()[..., None, :]
        AL = f2[..., None, None] * outer(gj, gj) + f1[..., None, None] * np.diag(1.0 / self.radii**2)
        Aj = f1[..., None] * gj
        BL = B[..., None, None] * (self.M * phL + self.M**2 * outer(phj, phj))
        return (AL * B[..., None, None] + outer(Aj, Bj) + outer(Bj, Aj)
                + f[..., None, None] * BL)

    def log_levi(self, z):
        """Levi matrix of log u (requires g > 0)."""
        z = np.asarray(z, dtype=complex)
        g, gj = self._g(z)
        _, _, phL = self.phi(z)
        l1, l2 = log_chi_derivs(g)
        outer = gj[..., :, None] * gj.conj()[..., None, :]
        return (l2[..., None, None] * outer + l1[..., None, None] * np.diag(1.0 / self.radii**2)
                + self.M * phL)

    def levi_form(self, z, X):
        X = np.asarray(X, dtype=complex)
        L = self.levi(np.atleast_2d(as_point(z)))[0]
        return float(np.real(X @ L @ X.conj()))

    def sibony_bound(self, X):
        """Certified lower bound ``exp(-2M) sum |X_j|^2 / beta_j^2`` for (F^S)^2."""
        X = np.asarray(X, dtype=complex)
        return math.exp(-2 * self.M) * float((np.abs(X) ** 2 / self.radii**2).sum())


def _polydisc_samples(center, radii, rng, count):
    n = len(center)
    r = np.sqrt(rng.uniform(0, 1, size=(count, n))) * radii
    th = rng.uniform(0, 2 * np.pi, size=(count, n))
    return center + r * np.exp(1j * th)


def build_log_psh_witness(center, radii, phi, alpha, hessian_floor, domain=None,
                          samples=1000, seed=0, margin=1.25):
    """Build and certify the witness ``u`` of the Sibony lower bound.

    ``phi(z)`` returns ``(value, complex gradient, Levi matrix)`` for an
    ``(N, n)`` array.  It must satisfy ``|phi| <= 1`` and
    ``L_phi(z, X) >= hessian_floor * sum |X_j|^2 / beta_j^2`` on the polydisc;
    both are spot-checked on ``samples`` points.
    """
    center = as_point(center)
    radii = np.asarray(radii, dtype=float).reshape(-1)
    n = center.shape[0]
    if radii.shape[0] != n or np.any(radii <= 0):
        raise ArgumentError("radii must be positive, one per coordinate")
    if hessian_floor <= 0:
        raise ArgumentError("hessian_floor must be positive")
    rng = np.random.default_rng(seed)
    P = _polydisc_samples(center, radii, rng, samples)
    if domain is not None and not np.all(domain.contains(P)):
        raise PreconditionError("the polydisc is not contained in the domain")
    ph, _, phL = phi(P)
    if np.abs(ph).max() > 1.0:
        raise PreconditionError("|phi| exceeds 1 on the polydisc")
    D = np.diag(radii)  # generalised eigenproblem against diag(1/beta^2)
    S = D @ np.swapaxes(phL, -1, -2) @ D
    floor = float(_min_eig(S).min())
    if floor < hessian_floor * (1 - 1e-12):
        raise PreconditionError(f"Levi form of phi below floor: {floor:.3e} < {hessian_floor:.3e}")
    if domain is not None:
        Z = sample_interior(domain, samples, rng)
        if np.abs(phi(Z)[0]).max() > 1.0:
            raise PreconditionError("|phi| exceeds 1 on the domain")
    M = float(max(1, math.ceil(alpha / hessian_floor * margin)))
    w = LogPshWitness(center, radii, M, phi, alpha)
    report = certify_witness(w, domain, rng, samples)
    return replace(w, report=report)


def certify_witness(w, domain, rng, samples=1000):
    """Min eigenvalue of the Levi matrix of log u on shell and domain samples (u > 0)."""
    n = w.center.shape[0]
    # shell 1/2 <= g <= 1 where the cutoff bends
    v = rng.normal(size=(samples, n)) + 1j * rng.normal(size=(samples, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    gs = rng.uniform(0.5, 1.0, size=(samples, 1))
    shell = w.center + np.sqrt(gs) * v * w.radii
    pts = [shell]
    if domain is not None:
        pts.append(sample_interior(domain, samples, rng))
    pts = np.concatenate(pts)
    g, _ = w._g(pts)
    pts = pts[g > 1e-6]
    L = w.log_levi(pts)
    scale = np.abs(L).max(axis=(-1, -2))
    me = _min_eig(L)
    u = w.value(pts)
    worst = float((me / scale).min())
    return {"min_eig_ratio": worst, "log_psh": bool(worst >= -1e-8),
            "u_min": float(u.min()), "u_max": float(u.max()), "M": w.M}
