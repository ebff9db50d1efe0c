"""Disc upper bounds, Sibony lower bounds and the comparability quantity M(z, X)."""

import math

import numpy as np
import pytest

from levibound.barrier import build_log_psh_witness
from levibound.cutoffs import witness_alpha
from levibound.errors import ArgumentError
from levibound.geometry import catalog_domain
from levibound.harness import fit_slope
from levibound.kobayashi import (
    DiscFamily,
    HolomorphicWitness,
    ball_witness,
    caratheodory_witness,
    comparability_M,
    kobayashi_disc,
    kobayashi_upper,
    sibony_lower,
)


def test_disc_centre(disc):
    # [TRIVIAL] identity disc f(t) = t
    assert kobayashi_upper(disc, [0], [1]) == pytest.approx(1, abs=1e-9)


def test_ball_centre_linear_disc_optimal(ball2):
    # [DERIVED] t -> tX is extremal; degree 3 must not drop below 1 - 1e-6
    X = np.array([0.6, 0.8j])
    assert kobayashi_upper(ball2, [0, 0], X) == pytest.approx(1, abs=1e-6)
    assert kobayashi_upper(ball2, [0, 0], X, DiscFamily(3)) >= 1 - 1e-6


def test_bidisc_diagonal(bidisc):
    # [DERIVED] diagonal disc t -> (t, t)
    assert kobayashi_upper(bidisc, [0, 0], [1, 1]) == pytest.approx(1, abs=1e-6)


def test_upper_monotone_in_degree(ball2):
    z, X = np.array([0.5, 0.2j]), np.array([0.3, 1.0])
    vals = [kobayashi_upper(ball2, z, X, DiscFamily(d)) for d in (1, 2, 3)]
    assert vals[0] >= vals[1] - 1e-12 >= vals[2] - 2e-12


def test_disc_result_is_contained(ball2):
    res = kobayashi_disc(ball2, [0.4, 0], [0, 1], DiscFamily(2))
    assert res.max_rho < 0 and res.value == pytest.approx(1 / res.lam)


def test_upper_bad_args(ball2):
    with pytest.raises(ArgumentError):
        kobayashi_upper(ball2, [0, 0], [0, 0])
    with pytest.raises(ArgumentError):
        kobayashi_upper(ball2, [2, 0], [1, 0])
    with pytest.raises(ArgumentError):
        DiscFamily(0)


def test_sibony_disc_identity(disc):
    # [TRIVIAL] u = |z|^2 has L_u = 1, matching F^K exactly
    w = HolomorphicWitness(np.zeros(1), np.ones(1), 1.0)
    assert sibony_lower(disc, [0], [1], w) == pytest.approx(1)


def test_ball_witness_exact(ball2, rng):
    # [DERIVED] F^K(z, X)^2 = |X|^2/(1-|z|^2) + |<X, z>|^2/(1-|z|^2)^2 on B^2
    for _ in range(10):
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        z *= rng.uniform(0, 0.95) / np.linalg.norm(z)
        X = rng.normal(size=2) + 1j * rng.normal(size=2)
        s = 1 - np.vdot(z, z).real
        exact = math.sqrt(np.vdot(X, X).real / s + abs(np.vdot(z, X)) ** 2 / s**2)
        assert sibony_lower(ball2, z, X) == pytest.approx(exact, rel=1e-10)
        assert ball_witness(ball2, z, X).certify(ball2, 500) <= 1 + 1e-9


def test_log_psh_witness_bound(disc):
    # [DERIVED] certified witness gives at least exp(-M) (sum |X_j|^2 / beta_j^2)^(1/2)
    def phi(z):
        z = np.atleast_2d(z)
        return np.abs(z[:, 0]) ** 2 - 1, np.conj(z), np.ones((len(z), 1, 1))

    w = build_log_psh_witness([0], [1], phi, witness_alpha(), 1.0, domain=disc)
    low = sibony_lower(disc, [0], [1], w)
    assert low >= math.exp(-w.M) * (1 - 1e-9)
    assert low <= kobayashi_upper(disc, [0], [1]) + 1e-9


def test_witness_must_be_centred(disc):
    w = HolomorphicWitness(np.array([0.1]), np.ones(1), 1.0)
    with pytest.raises(ArgumentError):
        sibony_lower(disc, [0], [1], w)


def test_caratheodory_witness_ball(ball2):
    z, X = np.array([0.3, 0.1j]), np.array([1.0, 0.5])
    w = caratheodory_witness(ball2, z, X)
    assert w.certify(ball2, 500) <= 1 + 1e-9
    assert sibony_lower(ball2, z, X, w) <= sibony_lower(ball2, z, X) + 1e-9


@pytest.mark.parametrize("name,n", [("ball", 2), ("polydisc", 2), ("product_disc_ball", 3),
                                    ("ellipsoid", 2)])
def test_sandwich_random(name, n, rng):
    dom = catalog_domain(name, n, [2, 1] if name == "ellipsoid" else [])
    from levibound.geometry import sample_interior

    for z in sample_interior(dom, 15, rng):
        X = rng.normal(size=n) + 1j * rng.normal(size=n)
        assert sibony_lower(dom, z, X) <= kobayashi_upper(dom, z, X) + 1e-9


DELTAS = np.geomspace(1e-1, 1e-3, 8)


def test_comparability_flat_direction(bidisc):
    # [TRIVIAL] delta = 1 - |z1| near the face; X tangent to the flat leaf
    for d in DELTAS:
        assert comparability_M(bidisc, [1 - d, 0], [0, 1]) <= 1e-8


def test_comparability_normal_slope(bidisc):
    # [DERIVED] |<d delta, X>|^2 / delta^2 = 1 / (4 delta^2) dominates
    vals = [comparability_M(bidisc, [1 - d, 0], [1, 0]) for d in DELTAS]
    assert fit_slope(DELTAS, vals)[0] == pytest.approx(-2, abs=0.05)


def test_comparability_ball_tangential(ball2):
    # [DERIVED] L_delta(z, X) = 1 / (2|z|) for delta = 1 - |z| and X tangential
    vals = [comparability_M(ball2, [1 - d, 0], [0, 1]) for d in DELTAS]
    assert fit_slope(DELTAS, vals)[0] == pytest.approx(-1, abs=0.05)
    assert vals[-1] == pytest.approx(1 / (2 * (1 - DELTAS[-1]) * DELTAS[-1]), rel=1e-6)
