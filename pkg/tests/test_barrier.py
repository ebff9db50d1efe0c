"""Barrier construction, certification and the log-psh witness."""

import numpy as np
import pytest

from levibound.barrier import (
    FrequencyBox,
    build_barrier,
    build_barrier_family,
    build_log_psh_witness,
    coordinate_scales,
    derivative_slopes,
    omega_weight,
    predicted_exponent,
    verify_barrier,
)
from levibound.cutoffs import witness_alpha
from levibound.errors import ArgumentError, PreconditionError
from levibound.geometry import catalog_domain
from levibound.normalization import normalize_chart

DELTAS = (1e-1, 1e-2, 1e-3)


@pytest.fixture(scope="module")
def ball_family():
    chart = normalize_chart(catalog_domain("ball", 2), [1, 0])
    return build_barrier_family(chart, DELTAS)


@pytest.fixture(scope="module")
def face_family():
    chart = normalize_chart(catalog_domain("polydisc", 2), [1, 0.3])
    return build_barrier_family(chart, DELTAS)


@pytest.mark.parametrize("X,expected", [
    ((1, 0, 0), 100.0),  # [TRIVIAL] 1/delta^2
    ((0, 1, 0), 10.0),   # [TRIVIAL] 1/delta
    ((0, 0, 1), 1.0),    # [TRIVIAL] unit coefficient
])
def test_omega_weight(X, expected):
    assert omega_weight(X, 0.1, 1) == pytest.approx(expected)


def test_omega_rejects_bad_args():
    with pytest.raises(ArgumentError):
        omega_weight((1, 0), 0.0, 0)
    with pytest.raises(ArgumentError):
        omega_weight((1, 0), 0.1, 2)


def test_box_membership():
    P = FrequencyBox(0.01, 0.5, "P", 3, 1)
    assert np.allclose(P.radii, [0.005, 0.05, 0.5])
    assert P.contains(np.array([0.004, 0.04j, -0.4]))
    assert not P.contains(np.array([0.006, 0, 0]))
    Q = FrequencyBox(0.01, 0.5, "Q", 3, 1)
    assert Q.contains(np.array([-0.005, 0, 0]))  # centre -c delta
    pts = Q.sample(np.random.default_rng(0), 200)
    assert Q.contains(pts).all()


def test_outside_cutoff_support(ball_family):
    # [TRIVIAL] omega >= a^2 there, so phi = 0 and g = C2 |zeta|^2 / C1
    bf = ball_family[1]
    zeta = np.array([[0.0, 0.4]])  # |zeta_2|^2/delta = 16 >> a^2
    assert bf.value(zeta)[0] == pytest.approx(bf.C2 * 0.16 / bf.C1)


@pytest.mark.parametrize("fam", ["ball_family", "face_family"])
def test_G_at_Q_centre(fam, request):
    # [DERIVED] chi1 = 1 at (-c delta, 0) so G = exp(M rho / delta); rho = Re zeta1 + O(zeta^2)
    for bf in request.getfixturevalue(fam):
        z = np.array([[-bf.c * bf.delta, 0]])
        assert bf.G(z)[0] == pytest.approx(np.exp(bf.M * bf.chart.rho(z)[0] / bf.delta), rel=1e-12)
        assert bf.G(z)[0] == pytest.approx(np.exp(-bf.c * bf.M), rel=1e-3)


@pytest.mark.parametrize("fam", ["ball_family", "face_family"])
def test_family_certifies(fam, request):
    # [DERIVED] sampling certification run
    reports = [verify_barrier(bf) for bf in request.getfixturevalue(fam)]
    assert all(r.bound_pass and r.psd_pass and r.c0_pass for r in reports)
    assert all(0 <= r.bound_min and r.bound_max <= 1 for r in reports)
    c0 = [r.c0 for r in reports]
    assert max(c0) / min(c0) <= 2


def test_shared_constants(ball_family):
    assert len({(bf.M, bf.a, bf.C2, bf.c) for bf in ball_family}) == 1


def test_single_build_certifies(ball_family):
    # a lone delta runs its own constant search, so M may differ from the family's
    bf = build_barrier(ball_family[0].chart, 1e-2)
    assert verify_barrier(bf, {"region": 2000}).passed


def test_evaluate_shapes(ball_family):
    bf = ball_family[0]
    zeta = np.zeros((4, 3, 2), complex)
    g, grad, L = bf.evaluate(zeta)
    assert g.shape == (4, 3) and grad.shape == (4, 3, 2) and L.shape == (4, 3, 2, 2)
    assert np.allclose(L, np.conj(np.swapaxes(L, -1, -2)))  # Hermitian


def test_gradient_against_fd(ball_family, rng):
    bf = ball_family[1]
    zeta = bf.box("P").sample(rng, 5)
    _, grad, _ = bf.evaluate(zeta)
    # g = chi2(exp(M rho / delta)) amplifies rounding by M / delta while the
    # third zeta_1 derivative is huge, so each coordinate gets its own step
    for j, (scale, rel) in enumerate(zip(coordinate_scales(2, 0, bf.delta), (1e-7, 1e-5))):
        h = rel * scale
        e = np.zeros(2)
        e[j] = h
        dx = (bf.value(zeta + e) - bf.value(zeta - e)) / (2 * h)
        dy = (bf.value(zeta + 1j * e) - bf.value(zeta - 1j * e)) / (2 * h)
        assert np.allclose(grad[:, j], 0.5 * (dx - 1j * dy), rtol=1e-5, atol=1e-4)


@pytest.mark.parametrize("fam", ["ball_family", "face_family"])
def test_derivative_slopes(fam, request):
    # [DERIVED] finite-difference sweep; |D^alpha g| ~ delta^-e
    family = request.getfixturevalue(fam)
    unit = FrequencyBox(1.0, 1.0, "P", 2, family[0].l).sample(np.random.default_rng(3), 200)
    slopes = derivative_slopes(family, unit)
    assert slopes[(1, 0)][0] == pytest.approx(-1, abs=0.1)
    for alpha, (slope, pred) in slopes.items():
        if slope is not None:
            assert slope == pytest.approx(pred, abs=0.1), alpha


def test_predicted_exponent():
    assert predicted_exponent((1, 0, 0), 3, 1) == 1
    assert predicted_exponent((0, 2, 1), 3, 1) == 1  # only zeta_2 is a positive direction


def _phi_disc(z):
    z = np.atleast_2d(z)
    return np.abs(z[:, 0]) ** 2 - 1, np.conj(z), np.ones((len(z), 1, 1))


def test_witness_disc():
    w = build_log_psh_witness([0], [1], _phi_disc, witness_alpha(), 1.0)
    assert w.value(np.array([[0.0]]))[0] == 0  # [TRIVIAL] chi(0) = 0
    assert w.report["log_psh"]
    # [TRIVIAL] in {g < 1/2} log u = log|z|^2 + M phi, with log|z|^2 harmonic
    z = np.array([[0.3 + 0.2j]])
    assert w.log_levi(z)[0, 0, 0].real == pytest.approx(w.M, rel=1e-9)
    # [DERIVED] exp(-2M) |X|^2 at the certified M
    assert w.sibony_bound([1]) == pytest.approx(np.exp(-2 * w.M))


def test_witness_preconditions():
    with pytest.raises(PreconditionError):
        build_log_psh_witness([0], [1], _phi_disc, 0.5, 2.0)
    with pytest.raises(ArgumentError):
        build_log_psh_witness([0], [-1], _phi_disc, 0.5, 1.0)
