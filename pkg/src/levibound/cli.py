"""Command line entry point ``levibound``.

Domains are given as a JSON file, an inline JSON object, or the shorthand
``name:dimension[:param,param,...]`` (for example ``ball:2`` or
``ellipsoid:2:2,1``).  Points are comma-separated complex numbers in Python
syntax, e.g. ``--point 1,0.3`` or ``--point 0.5+0.1j,0``.
"""

from __future__ import annotations

import json
import os

import click
import numpy as np

from .errors import LeviboundError
from .geometry import domain_from_spec, levi_rank
from .harness import (
    ExperimentConfig,
    catlin_consistency,
    comparability_band,
    detect_levi_flatness,
    ensure_dir,
    fit_kernel_exponent,
    fit_metric_exponents,
    write_json,
    write_plot_data,
    write_sweep_csv,
)


def load_domain(text):
    if os.path.exists(text):
        with open(text) as fh:
            return domain_from_spec(json.load(fh))
    if text.lstrip().startswith("{"):
        return domain_from_spec(json.loads(text))
    parts = text.split(":")
    spec = {"name": parts[0], "dimension": int(parts[1]) if len(parts) > 1 else 2,
            "params": [float(x) for x in parts[2].split(",")] if len(parts) > 2 else []}
    return domain_from_spec(spec)


def parse_point(text):
    return np.array([complex(t.strip().replace(" ", "")) for t in text.split(",")])


def parse_sweep(text):
    """``a:b:n`` -> (a, b, n) with a, b the delta range ends."""
    try:
        a, b, n = text.split(":")
        lo, hi = sorted((float(a), float(b)))
        return lo, hi, int(n)
    except ValueError as exc:
        raise click.BadParameter("expected a:b:n, e.g. 1e-3:1e-1:12") from exc


def _echo(payload):
    click.echo(json.dumps(payload, indent=2, sort_keys=True, default=_default))


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def _config(domain_text, point, sweep, method, degree, seed, out, **kw):
    lo, hi, n = parse_sweep(sweep)
    return ExperimentConfig(domain={"spec": domain_text}, probe_points=[list(point)],
                            delta_min=lo, delta_max=hi, count=n, method=method,
                            degree=degree, seed=seed, out=out, **kw).validate()


common = [
    click.argument("domain"),
    click.option("--point", required=True, help="boundary point, comma separated"),
    click.option("--seed", default=0, show_default=True, type=int),
    click.option("--out", default=None, type=click.Path(file_okay=False),
                 help="directory for CSV, JSON and plot-data files"),
]
sweep_opts = [
    click.option("--delta-sweep", "sweep", default="1e-3:1e-1:12", show_default=True,
                 help="a:b:n geometric probe distances"),
    click.option("--method", type=click.Choice(["auto", "oracle", "series", "gram"]),
                 default="auto", show_default=True),
    click.option("--degree", default=None, type=int, help="Gram polynomial degree"),
]


def with_options(opts):
    def deco(f):
        for o in reversed(opts):
            f = o(f)
        return f

    return deco


class _Group(click.Group):
    """Turns library errors into clean CLI failures (exit status 1)."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except LeviboundError as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc


@click.group(cls=_Group)
@click.version_option(package_name="artifact")
def main():
    """Levi geometry, barriers, Bergman and Kobayashi metrics near pseudoconvex boundaries."""


@main.command("levi-rank")
@with_options(common)
@click.option("--tol", default=1e-8, show_default=True, type=float)
def levi_rank_cmd(domain, point, seed, out, tol):
    """Levi form eigenvalues and rank at a boundary point."""
    dom = load_domain(domain)
    data = levi_rank(dom, parse_point(point), tol)
    payload = {"rank": data.rank, "eigenvalues": data.eigenvalues.tolist(),
               "n_flat": dom.dimension - 1 - data.rank, "tolerance": data.rank_tolerance}
    _emit(payload, out, "levi_rank.json")


@main.command()
@with_options(common)
def normalize(domain, point, seed, out):
    """Normalized boundary chart, Levi eigenvalues and residual decay."""
    from .normalization import normalize_chart, residual_decay

    dom = load_domain(domain)
    chart = normalize_chart(dom, parse_point(point), seed=seed)
    maxima, slope = residual_decay(chart, seed=seed)
    payload = chart.to_dict()
    payload["residual_maxima"] = maxima.tolist()
    payload["residual_slope"] = slope
    _emit(payload, out, "chart.json")


@main.command("barrier-verify")
@with_options(common)
@click.option("--delta-sweep", "sweep", default="1e-3:1e-1:3", show_default=True)
@click.option("--samples", default=10_000, show_default=True, type=int)
def barrier_verify(domain, point, seed, out, sweep, samples):
    """Build the barrier over a delta sweep and certify its properties."""
    from .barrier import FrequencyBox, build_barrier_family, derivative_slopes, verify_barrier
    from .normalization import normalize_chart

    dom = load_domain(domain)
    lo, hi, n = parse_sweep(sweep)
    deltas = np.geomspace(hi, lo, n)
    chart = normalize_chart(dom, parse_point(point), seed=seed)
    family = build_barrier_family(chart, deltas, seed=seed)
    reports = [verify_barrier(bf, {"region": samples}, seed=seed + 1).to_dict() for bf in family]
    unit = FrequencyBox(1.0, 1.0, "P", chart.dimension, chart.n_flat).sample(
        np.random.default_rng(seed), 200)
    slopes = derivative_slopes(family, unit) if len(family) > 1 else {}
    payload = {"reports": reports,
               "derivative_slopes": {",".join(map(str, k)): v for k, v in slopes.items()},
               "constants": family[0].to_dict()}
    _emit(payload, out, "barrier.json")


@main.command("bergman-fit")
@with_options(common + sweep_opts)
def bergman_fit(domain, point, seed, out, sweep, method, degree):
    """Fit the kernel blow-up exponent along the inward normal."""
    dom = load_domain(domain)
    p = parse_point(point)
    cfg = _config(domain, p, sweep, method, degree, seed, out)
    fit = fit_kernel_exponent(dom, p, cfg)
    if out:
        ensure_dir(out)
        write_sweep_csv(os.path.join(out, "kernel_sweep.csv"), fit.deltas, fit.values, fit.method)
        write_plot_data(os.path.join(out, "kernel_loglog.dat"), np.log(fit.deltas), np.log(fit.values))
    _emit(fit.to_dict(), out, "kernel_fit.json")


@main.command("metric-compare")
@with_options(common + sweep_opts)
@click.option("--kobayashi/--no-kobayashi", default=True, show_default=True)
@click.option("--disc-degree", default=1, show_default=True, type=int)
def metric_compare(domain, point, seed, out, sweep, method, degree, kobayashi, disc_degree):
    """Bergman metric exponents per direction, Kobayashi band and the M(z, X) comparability band."""
    dom = load_domain(domain)
    p = parse_point(point)
    cfg = _config(domain, p, sweep, method, degree, seed, out, kobayashi=kobayashi,
                  disc_degree=disc_degree)
    fits = fit_metric_exponents(dom, p, config=cfg)
    from .harness import metric_directions

    bands = {lab: comparability_band(dom, p, X, cfg) for lab, X, _ in metric_directions(dom, p)}
    if out:
        ensure_dir(out)
        for f in fits:
            write_sweep_csv(os.path.join(out, f"metric_{f.label}.csv"), f.deltas, f.values,
                            f.method, f.lower, f.upper)
            write_plot_data(os.path.join(out, f"metric_{f.label}.dat"), np.log(f.deltas),
                            np.log(f.values))
    payload = {"fits": [f.to_dict() for f in fits],
               "comparability": {k: {"C3": v["C3"], "band": v["band"]} for k, v in bands.items()},
               "config_hash": cfg.config_hash()}
    _emit(payload, out, "metric_fit.json")


@main.command("detect-flat")
@with_options(common + sweep_opts)
def detect_flat(domain, point, seed, out, sweep, method, degree):
    """Levi-flat / rank verdict from the kernel exponent, cross-checked with the Levi rank."""
    dom = load_domain(domain)
    p = parse_point(point)
    cfg = _config(domain, p, sweep, method, degree, seed, out)
    verdict = detect_levi_flatness(dom, p, cfg)
    payload = verdict.to_dict()
    payload["config_hash"] = cfg.config_hash()
    _emit(payload, out, "flatness.json")


@main.command("catlin")
@with_options(common + sweep_opts)
def catlin(domain, point, seed, out, sweep, method, degree):
    """Kernel against the product of barrier radii over a delta sweep."""
    dom = load_domain(domain)
    p = parse_point(point)
    cfg = _config(domain, p, sweep, method, degree, seed, out)
    _emit(catlin_consistency(dom, p, cfg), out, "catlin.json")


def _emit(payload, out, name):
    if out:
        ensure_dir(out)
        write_json(os.path.join(out, name), payload)
    _echo(payload)


if __name__ == "__main__":
    main()
