import numpy as np
import pytest

from levibound.cutoffs import CutoffPair, chi1, chi2, chi_witness, witness_alpha

T = np.linspace(0, 1.5, 3001)


def test_chi1_shape():
    f = chi1(T)[0]
    assert np.all(f[T <= 0.5] == 1) and np.all(f[T >= 1] == 0)
    assert np.all(np.diff(f) <= 1e-15)


def test_chi2_convex_increasing():
    f, d1, d2, _ = chi2(T)
    assert np.all(f[T <= 0.5] == 0)
    assert np.all(d1 >= 0) and np.all(d2 >= 0)
    assert chi2(1.0)[0] == pytest.approx(1 / 16)


def test_witness_cutoff():
    f, d1, d2, _ = chi_witness(T)
    assert np.allclose(f[T <= 0.5], T[T <= 0.5])
    assert np.allclose(f[T >= 1], 0.75)  # concavity caps the plateau at 1/2 + 1/4
    assert np.all(d2 <= 1e-12)


@pytest.mark.parametrize("fn", [chi1, chi2, chi_witness])
def test_derivatives_match_finite_differences(fn):
    t = np.linspace(0.05, 1.45, 57)
    h = 1e-6
    vals = fn(t)
    for k in range(3):
        fd = (fn(t + h)[k] - fn(t - h)[k]) / (2 * h)
        assert np.allclose(fd, vals[k + 1], atol=1e-4 * max(1, np.abs(vals[k + 1]).max()))


def test_c3_joins():
    rep = CutoffPair.default().smoothness_report()
    for jumps in rep.values():
        assert max(jumps) < 1e-3


def test_alpha_positive_and_stable():
    a = witness_alpha()
    assert 0 < a < np.inf
    assert witness_alpha(20_000) == pytest.approx(a, rel=1e-3)
