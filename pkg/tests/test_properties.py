"""Property-based and sampled invariants across modules."""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from levibound.barrier import build_log_psh_witness, certify_witness
from levibound.bergman import KernelEvaluator, bergman_metric, gram_floor, kernel_data
from levibound.cutoffs import witness_alpha
from levibound.geometry import (
    catalog_domain,
    distance_to_boundary,
    levi_form,
    levi_rank,
    nearest_boundary_point,
    sample_boundary,
    sample_interior,
)
from levibound.harness import (
    ExperimentConfig,
    comparability_band,
    detect_levi_flatness,
    fit_kernel_exponent,
    fit_slope,
    metric_directions,
)
from levibound.kobayashi import DiscFamily, kobayashi_upper, sibony_lower
from levibound.normalization import normalize_chart, peak_function

CATALOG = [
    ("ball", 2, [], [1, 0]),
    ("polydisc", 2, [], [1, 0.3]),
    ("product_disc_ball", 3, [], [0.3, 1, 0]),
    ("ellipsoid", 2, [2, 1], [1 / np.sqrt(2), 0]),
]
DOMAINS = {name: catalog_domain(name, n, par) for name, n, par, _ in CATALOG}
SLOW = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])

finite = st.floats(-1, 1, allow_nan=False)
cvec = st.lists(st.tuples(finite, finite), min_size=3, max_size=3).map(
    lambda v: np.array([a + 1j * b for a, b in v]))


# ---------------------------------------------------------------------------
# geometry


@settings(max_examples=100, deadline=None)
@given(z=cvec, X=cvec, Y=cvec)
def test_levi_form_hermitian(z, X, Y):
    dom = DOMAINS["product_disc_ball"]
    a, b = levi_form(dom, 0.5 * z, X, Y), levi_form(dom, 0.5 * z, Y, X)
    assert abs(a - np.conj(b)) <= 1e-12 * max(1, abs(a))


@pytest.mark.parametrize("name", list(DOMAINS))
def test_pseudoconvex_at_boundary(name):
    dom = DOMAINS[name]
    pts = sample_boundary(dom, 200, np.random.default_rng(7))
    smooth = [p for p in pts if dom.is_smooth_point(p)]
    assert len(smooth) > 150
    for p in smooth:
        assert levi_rank(dom, p).eigenvalues.min() >= -1e-9


def test_distance_closed_forms():
    rng = np.random.default_rng(8)
    for name, exact in (("ball", lambda z: 1 - np.linalg.norm(z)),
                        ("polydisc", lambda z: np.min(1 - np.abs(z)))):
        dom = DOMAINS[name]
        for z in sample_interior(dom, 50, rng):
            assert distance_to_boundary(dom, z) == pytest.approx(exact(z), abs=1e-10)


def test_distance_gradient_bound_ellipsoid():
    # delta(z) <= |rho(z)| / min |grad rho| along the segment to the nearest point
    dom = DOMAINS["ellipsoid"]
    rng = np.random.default_rng(9)
    for z in sample_interior(dom, 40, rng):
        q = nearest_boundary_point(dom, z)
        seg = z + np.linspace(0, 1, 50)[:, None] * (q - z)
        grads = 2 * np.linalg.norm(dom.derivatives(seg)[1], axis=-1)  # real gradient norm
        assert distance_to_boundary(dom, z) <= abs(dom.rho(z)) / grads.min() + 1e-12


# ---------------------------------------------------------------------------
# normalization


@pytest.mark.parametrize("name,n,par,p", [c for c in CATALOG if c[0] != "polydisc"])
def test_lambda_match_levi_eigenvalues(name, n, par, p):
    chart = normalize_chart(DOMAINS[name], p)
    eig = levi_rank(DOMAINS[name], np.array(p, complex)).eigenvalues[: chart.levi_rank]
    assert np.allclose(np.sort(chart.lam), np.sort(eig / chart.gradient_norm), rtol=1e-6)


def test_peak_modulus_margin():
    chart = normalize_chart(DOMAINS["ball"], [1, 0])
    rng = np.random.default_rng(10)
    r = chart.peak_radius
    count = 0
    while count < 300:
        zeta = r * (rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)) / 2
        z = chart.inverse(zeta)
        if np.linalg.norm(zeta) < r and DOMAINS["ball"].contains(z) and 1 - np.linalg.norm(z) >= 0.01:
            assert abs(peak_function(chart, z)) < 1 - 1e-6
            count += 1


def test_chart_jacobian_consistent():
    chart = normalize_chart(DOMAINS["ellipsoid"], [1 / np.sqrt(2), 0])
    p = chart.base_point
    J = chart.jacobian(p)
    assert abs(np.linalg.det(J)) > 1e-6
    h = 1e-6
    for j in range(2):
        e = np.zeros(2, complex)
        e[j] = h
        fd = (chart.forward(p + e) - chart.forward(p - e)) / (2 * h)
        assert np.allclose(fd, J[:, j], atol=1e-7)


# ---------------------------------------------------------------------------
# barrier witness


def test_doubling_M_keeps_log_psh():
    def phi(z):
        z = np.atleast_2d(z)
        return np.abs(z[:, 0]) ** 2 - 1, np.conj(z), np.ones((len(z), 1, 1))

    disc = catalog_domain("polydisc", 1)
    w = build_log_psh_witness([0], [1], phi, witness_alpha(), 1.0, domain=disc)
    twice = replace(w, M=2 * w.M)
    assert certify_witness(twice, disc, np.random.default_rng(11))["log_psh"]


# ---------------------------------------------------------------------------
# Bergman


@pytest.mark.parametrize("name,n", [("polydisc", 1), ("ball", 2)])
def test_series_gram_agree_above_floor(name, n):
    # agreement is asserted where the Gram kernel is degree-stable; the floor is
    # reported and, for B^2 at degree 20, lies above 0.05 (see acceptance criterion 1)
    dom = catalog_domain(name, n)
    ev = KernelEvaluator("gram", degree_cap=20)
    floor, _ = gram_floor(dom, ev)
    assert floor is not None
    for d in np.geomspace(0.5, floor, 4):
        z = np.zeros(n, complex)
        z[0] = 1 - d
        g = kernel_data(dom, z, ev)
        s = kernel_data(dom, z, KernelEvaluator("series"))
        assert g.certified and g.value == pytest.approx(s.value, rel=1e-4)


def test_degree_stability_at_test_points():
    dom = catalog_domain("ball", 2)
    for z in ([0.2, 0.1j], [0.4, -0.3]):
        a = kernel_data(dom, z, KernelEvaluator("gram", degree_cap=15)).value
        b = kernel_data(dom, z, KernelEvaluator("gram", degree_cap=20)).value
        assert abs(a - b) <= 1e-6 * b


@SLOW
@given(c=st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_bergman_metric_homogeneity(c):
    dom = DOMAINS["ellipsoid"]
    z, X = np.array([0.2 + 0.1j, -0.3]), np.array([1.0, 0.4j])
    assert bergman_metric(dom, z, c * X) == pytest.approx(abs(c) * bergman_metric(dom, z, X), rel=1e-10)


# ---------------------------------------------------------------------------
# Kobayashi


@SLOW
@given(c=st.complex_numbers(min_magnitude=0.1, max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_bounds_homogeneous(c):
    dom = DOMAINS["ball"]
    z, X = np.array([0.3, 0.2j]), np.array([1.0, 0.5j])
    assert sibony_lower(dom, z, c * X) == pytest.approx(abs(c) * sibony_lower(dom, z, X), rel=1e-9)
    fam = DiscFamily(1)
    up, up_c = kobayashi_upper(dom, z, X, fam), kobayashi_upper(dom, z, c * X, fam)
    assert up_c == pytest.approx(abs(c) * up, rel=1e-6)  # bisection resolution on lambda


@SLOW
@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(list(DOMAINS)))
def test_sandwich_property(seed, name):
    dom = DOMAINS[name]
    rng = np.random.default_rng(seed)
    z = sample_interior(dom, 1, rng)[0]
    X = rng.normal(size=dom.dimension) + 1j * rng.normal(size=dom.dimension)
    assert sibony_lower(dom, z, X) <= kobayashi_upper(dom, z, X) + 1e-9


# ---------------------------------------------------------------------------
# harness


@pytest.mark.parametrize("name,n,par,p", CATALOG)
def test_fit_invariant_under_range_and_density(name, n, par, p):
    dom, p = DOMAINS[name], np.array(p, complex)
    base = fit_kernel_exponent(dom, p).slope
    half = fit_kernel_exponent(dom, p, ExperimentConfig(delta_max=0.05)).slope
    dense = fit_kernel_exponent(dom, p, ExperimentConfig(count=24)).slope
    assert abs(half - base) <= 0.02 and abs(dense - base) <= 0.02


@pytest.mark.parametrize("name,n,par,p", CATALOG)
def test_flatness_agrees_with_rank(name, n, par, p):
    v = detect_levi_flatness(DOMAINS[name], np.array(p, complex))
    assert v.agrees and v.rank_estimate == v.direct_rank


@pytest.mark.parametrize("name,n,par,p", CATALOG)
def test_comparability_band(name, n, par, p):
    dom, p = DOMAINS[name], np.array(p, complex)
    for label, X, _ in metric_directions(dom, p):
        assert comparability_band(dom, p, X)["band"] <= 25, label


def test_chart_probe_matches_normal_probe():
    # zeta_delta = (-c delta, 0) in the chart and p - delta nu give the same slope
    dom = DOMAINS["ball"]
    chart = normalize_chart(dom, [1, 0])
    deltas = np.geomspace(1e-1, 1e-3, 12)
    zs = chart.inverse(np.stack([-deltas, np.zeros_like(deltas)], 1).astype(complex))
    vals = [kernel_data(dom, z).value for z in zs]
    assert fit_slope(deltas, vals)[0] == pytest.approx(fit_kernel_exponent(dom, [1, 0]).slope, abs=0.02)
