"""Normalized boundary charts and the local peak function."""

from dataclasses import replace

import numpy as np
import pytest

from levibound.errors import OutOfChartError
from levibound.normalization import NormalizedChart, normalize_chart, peak_function, residual_decay


@pytest.fixture(scope="module")
def ball_chart():
    from levibound.geometry import catalog_domain

    return normalize_chart(catalog_domain("ball", 2), [1, 0])


def test_ball_lambda(ball_chart):
    # [DERIVED] |1+w1|^2+|z2|^2-1 = 2 Re w1 + |w1|^2 + |z2|^2, zeta1 = 2 w1 gives lambda = 1/2
    assert ball_chart.lam == pytest.approx([0.5], abs=1e-6)
    assert ball_chart.n_flat == 0


def test_ellipsoid_lambda(ellipsoid):
    # [DERIVED] 2|1/sqrt2 + w1|^2 + |z2|^2 - 1 = 2 sqrt2 Re w1 + 2|w1|^2 + |z2|^2.
    # Dividing by the normal coefficient exactly as for the ball (which gives 1/2)
    # leaves |z2|^2 / (2 sqrt2).  The acceptance check for the value 1 is kept
    # separately and is expected to fail (see the decisions ledger).
    chart = normalize_chart(ellipsoid, [1 / np.sqrt(2), 0])
    assert chart.lam == pytest.approx([1 / (2 * np.sqrt(2))], abs=1e-6)


def test_bidisc_face_has_no_positive_block(bidisc):
    # [TRIVIAL] no strictly pseudoconvex tangential direction
    chart = normalize_chart(bidisc, [1, 0.3])
    assert chart.lam.size == 0 and chart.n_flat == 1
    # normal form is Re zeta1 up to O(|Im zeta1| |zeta|)
    zeta = np.array([[0.0, 0.05], [0.0, -0.05j]])
    assert np.abs(chart.rho(zeta)).max() < 1e-12


def test_chart_roundtrip(ball_chart, rng):
    z = 0.05 * (rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2))) + np.array([0.9, 0])
    back = ball_chart.inverse(ball_chart.forward(z))
    assert np.allclose(back, z, atol=1e-12)


def test_residual_slope(ball_chart, ellipsoid):
    for chart in (ball_chart, normalize_chart(ellipsoid, [1 / np.sqrt(2), 0])):
        _, slope = residual_decay(chart)
        assert slope >= 2.7


def test_to_dict_roundtrip(ball_chart):
    again = NormalizedChart.from_dict(ball_chart.to_dict(), domain=ball_chart.domain)
    zeta = np.array([[-0.01, 0.02 + 0.01j]])
    assert np.allclose(again.rho(zeta), ball_chart.rho(zeta))


def test_peak_at_base_point(ball_chart):
    # [TRIVIAL] zeta1 = 0
    assert peak_function(ball_chart, [1, 0]) == 1


def test_peak_formula_value(ball_chart):
    # [TRIVIAL] (-(-1))^(2/3) = 1 so h = e^-1
    wide = replace(ball_chart, peak_radius=10.0)
    z = wide.inverse(np.array([-1.0, 0.0]))
    assert peak_function(wide, z) == pytest.approx(np.exp(-1))


def test_peak_below_one_inside(ball_chart, rng):
    # [DERIVED] sweep over interior samples in the certified neighbourhood
    r = ball_chart.peak_radius
    assert r > 0
    vals = []
    while len(vals) < 500:
        zeta = r * 0.99 * (rng.uniform(-1, 1, 2) + 1j * rng.uniform(-1, 1, 2)) / 2
        z = ball_chart.inverse(zeta)
        if ball_chart.domain.contains(z) and np.linalg.norm(zeta) < r:
            vals.append(abs(peak_function(ball_chart, z)))
    assert max(vals) < 1


def test_peak_outside_chart_raises(ball_chart):
    with pytest.raises(OutOfChartError):
        peak_function(ball_chart, [0, 0])
