"""Delta-sweep experiments: exponent fits, metric comparability, Catlin consistency
and the Levi-flatness detector.

Probes move along the inward unit normal, ``p_delta = p - delta * nu(p)``.
Every report carries the hash of the configuration that produced it.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .barrier import build_barrier_family
from .bergman import KernelEvaluator, auto_evaluator, kernel_data, metric_from_result
from .errors import ArgumentError, CertificationFailure, ConditioningError, RankDriftError
from .geometry import as_point, levi_rank, outward_normal, rank_near, snap_to_boundary
from .kobayashi import DiscFamily, comparability_M, kobayashi_upper, sibony_lower
from .normalization import normalize_chart

STABLE_RESIDUAL = 0.05
FLAT_BAND = 0.1
RANK_CUT = -2.5


@dataclass
class ExperimentConfig:
    """Sweep settings.  ``method`` is ``auto`` or any kernel method name."""

    domain: dict = field(default_factory=dict)
    probe_points: list = field(default_factory=list)
    delta_min: float = 1e-3
    delta_max: float = 1e-1
    count: int = 12
    method: str = "auto"
    degree: int | None = None
    disc_degree: int = 1
    kobayashi: bool = False
    out: str | None = None
    seed: int = 0

    def validate(self):
        if not (0 < self.delta_min < self.delta_max):
            raise ArgumentError("need 0 < delta_min < delta_max")
        if self.count < 3:
            raise ArgumentError("a fit needs at least 3 probes")
        if self.method != "auto":
            KernelEvaluator(self.method)  # raises on unknown names
        if self.disc_degree < 1:
            raise ArgumentError("disc_degree must be >= 1")
        return self

    @property
    def deltas(self):
        """Strictly decreasing geometric sequence."""
        return np.geomspace(self.delta_max, self.delta_min, self.count)

    def evaluator(self, domain):
        if self.method == "auto":
            return auto_evaluator(domain, self.degree)
        return KernelEvaluator(self.method, degree_cap=self.degree)

    def to_dict(self):
        d = asdict(self)
        d["probe_points"] = [[[float(np.real(c)), float(np.imag(c))] for c in p]
                             for p in self.probe_points]
        return d

    def config_hash(self):
        blob = json.dumps({"version": __version__, **self.to_dict()}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ExponentFit:
    probe_point: list
    deltas: list
    values: list
    slope: float
    predicted: float
    residual: float
    intercept: float = 0.0
    label: str = "kernel"
    method: str = ""
    dropped: int = 0
    lower: list | None = None
    upper: list | None = None
    inconclusive: bool = False
    config_hash: str = ""

    @property
    def error(self):
        return abs(self.slope - self.predicted)

    @property
    def stable(self):
        return self.residual <= STABLE_RESIDUAL

    def to_dict(self):
        d = asdict(self)
        d["error"] = self.error
        d["stable"] = self.stable
        return d


def fit_slope(deltas, values):
    """Least squares on ``log value`` against ``log delta``; returns (slope, intercept, residual)."""
    x = np.log(np.asarray(deltas, float))
    y = np.log(np.asarray(values, float))
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.abs(y - (slope * x + icpt)).max())
    return float(slope), float(icpt), resid


def _point_list(p):
    return [[float(c.real), float(c.imag)] for c in p]


def probe_points(domain, p, deltas):
    """Inward probes ``p - delta nu`` (each checked to lie in the domain)."""
    p = snap_to_boundary(domain, p)
    nu = outward_normal(domain, p)
    pts = np.array([p - d * nu for d in deltas])
    if not np.all(domain.contains(pts)):
        raise ArgumentError("some probe points fall outside the domain")
    return p, nu, pts


def check_constant_rank(domain, p, count=20):
    base = levi_rank(domain, p).rank
    ranks = rank_near(domain, p, count=count)
    if any(r != base for r in ranks):
        raise RankDriftError(f"Levi rank varies near p: {sorted(set(ranks))} vs {base}")
    return base


def fit_kernel_exponent(domain, p, config=None):
    """Sweep ``K(p_delta)`` and fit the exponent; predicted ``-(n - l + 1)``."""
    config = (config or ExperimentConfig()).validate()
    n = domain.dimension
    rank = check_constant_rank(domain, p)
    l = n - 1 - rank
    p, _, pts = probe_points(domain, p, config.deltas)
    ev = config.evaluator(domain)
    ds, vals, dropped = [], [], 0
    for d, z in zip(config.deltas, pts):
        try:
            res = kernel_data(domain, z, ev)
        except ConditioningError:
            dropped += 1
            continue
        if not res.certified:
            dropped += 1
            continue
        ds.append(float(d))
        vals.append(res.value)
    if len(ds) < 3:
        raise ConditioningError("fewer than 3 certified probes; the method floor is too high")
    slope, icpt, resid = fit_slope(ds, vals)
    return ExponentFit(_point_list(p), ds, vals, slope, -(n - l + 1), resid, icpt,
                       "kernel", ev.method, dropped, config_hash=config.config_hash())


def metric_directions(domain, p):
    """Representative directions: complex normal, strictly pseudoconvex tangential, null tangential."""
    data = levi_rank(domain, p)
    nu = data.gradient.conj() / np.linalg.norm(data.gradient)
    out = [("normal", nu, -2.0)]
    pos = data.positive_basis
    if pos.shape[1]:
        out.append(("tangential-positive", pos[:, 0], -1.0))
    if data.nullspace_basis.shape[1]:
        out.append(("tangential-null", data.nullspace_basis[:, 0], 0.0))
    return out


def fit_metric_exponents(domain, p, directions=None, config=None):
    """Per-direction fits of ``(F^B)^2`` (and optionally the Kobayashi band)."""
    config = (config or ExperimentConfig()).validate()
    if directions is None:
        directions = metric_directions(domain, p)
    p, _, pts = probe_points(domain, p, config.deltas)
    ev = config.evaluator(domain)
    results = [kernel_data(domain, z, ev) for z in pts]
    fits = []
    for label, X, predicted in directions:
        X = as_point(X, domain.dimension)
        vals = [metric_from_result(r, X) ** 2 for r in results]
        slope, icpt, resid = fit_slope(config.deltas, vals)
        fit = ExponentFit(_point_list(p), list(map(float, config.deltas)), vals, slope,
                          predicted, resid, icpt, label, ev.method,
                          config_hash=config.config_hash())
        if config.kobayashi:
            fam = DiscFamily(config.disc_degree)
            lo = [sibony_lower(domain, z, X) ** 2 for z in pts]
            up = [kobayashi_upper(domain, z, X, fam) ** 2 for z in pts]
            fit.lower, fit.upper = lo, up
            fit.inconclusive = bool(max(u / l_ for u, l_ in zip(up, lo)) > 10.0 ** 2)
        fits.append(fit)
    return fits


def comparability_band(domain, p, X, config=None, c3_grid=None):
    """Fit ``C3`` minimising ``max/min`` of ``(F^B)^2 / (M + C3 |X|^2)`` over the sweep."""
    config = (config or ExperimentConfig()).validate()
    p, _, pts = probe_points(domain, p, config.deltas)
    X = as_point(X, domain.dimension)
    ev = config.evaluator(domain)
    F2 = np.array([metric_from_result(kernel_data(domain, z, ev), X) ** 2 for z in pts])
    Ms = np.array([comparability_M(domain, z, X) for z in pts])
    nx = float(np.linalg.norm(X) ** 2)
    grid = np.concatenate([[0.0], np.logspace(-4, 4, 161)]) if c3_grid is None else c3_grid
    best = None
    for c3 in grid:
        den = Ms + c3 * nx
        if np.any(den <= 0):
            continue
        ratio = F2 / den
        band = float(ratio.max() / ratio.min())
        if best is None or band < best[1]:
            best = (float(c3), band)
    return {"C3": best[0], "band": best[1], "deltas": list(map(float, config.deltas)),
            "F2": F2.tolist(), "M": Ms.tolist(), "config_hash": config.config_hash()}


def catlin_consistency(domain, p, config=None):
    """Ratio ``K(zeta_delta) / prod beta_j^-2`` with ``beta = (delta, delta^1/2, ..., 1, ...)``.

    ``zeta_delta = (-c delta, 0)`` in the normalized chart, with ``c`` from the
    barrier certified over the sweep.
    """
    config = (config or ExperimentConfig()).validate()
    chart = normalize_chart(domain, p, seed=config.seed)
    n, l = chart.dimension, chart.n_flat
    deltas = [float(d) for d in config.deltas]
    gaps = []
    try:
        family = build_barrier_family(chart, deltas, seed=config.seed)
    except CertificationFailure as exc:
        family = []
        for d in deltas:
            try:
                family.append(build_barrier_family(chart, [d], seed=config.seed)[0])
            except CertificationFailure:
                gaps.append(d)
        if not family:
            raise exc
    ev = config.evaluator(domain)
    rows = []
    for bf in family:
        zeta = np.zeros(n, complex)
        zeta[0] = -bf.c * bf.delta
        z = chart.inverse(zeta)
        K = kernel_data(domain, z, ev).value
        pred = bf.delta ** -2 * bf.delta ** -(n - l - 1)
        rows.append({"delta": bf.delta, "K": K, "prediction": pred, "ratio": K / pred, "c": bf.c})
    ratios = np.array([r["ratio"] for r in rows])
    width = float(ratios.max() / ratios.min())
    return {"rows": rows, "band_width": width, "C": math.sqrt(width) * 1.0,
            "ratio_min": float(ratios.min()), "ratio_max": float(ratios.max()),
            "gaps": gaps, "constants": family[0].to_dict(), "config_hash": config.config_hash()}


@dataclass
class FlatnessVerdict:
    verdict: str  # "flat" | "rank" | "inconclusive"
    rank_estimate: int | None
    direct_rank: int
    slope: float
    agrees: bool
    thresholds: dict

    def to_dict(self):
        return asdict(self)


def detect_levi_flatness(domain, p, config=None):
    """Classify ``p`` from the kernel exponent and cross-check with the Levi rank."""
    config = (config or ExperimentConfig()).validate()
    direct = levi_rank(domain, p).rank
    try:
        fit = fit_kernel_exponent(domain, p, config)
    except (RankDriftError, ConditioningError):
        return FlatnessVerdict("inconclusive", None, direct, math.nan, False, _thresholds())
    s = fit.slope
    if abs(s + 2) <= FLAT_BAND:
        verdict, est = "flat", 0
    elif s <= RANK_CUT:
        # -slope = n - l + 1 = rank + 2
        verdict, est = "rank", int(round(-s)) - 2
    else:
        verdict, est = "inconclusive", None
    agrees = est is not None and est == direct
    if not agrees:
        verdict = "inconclusive"
    return FlatnessVerdict(verdict, est, direct, s, agrees, _thresholds())


def _thresholds():
    return {"flat_band": FLAT_BAND, "rank_cut": RANK_CUT}


# ---------------------------------------------------------------------------
# output


SWEEP_COLUMNS = ["delta", "value", "lower", "upper", "method", "condition"]


def write_sweep_csv(path, deltas, values, method, lower=None, upper=None, condition=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for i, d in enumerate(deltas):
            w.writerow([d, values[i], "" if lower is None else lower[i],
                        "" if upper is None else upper[i], method,
                        "" if condition is None else condition[i]])


def write_plot_data(path, xs, ys):
    """Whitespace-separated ``x y`` pairs."""
    with open(path, "w") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{x:.17g} {y:.17g}\n")


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serialisable: {type(o)}")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
