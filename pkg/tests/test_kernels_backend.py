"""The compiled kernels must match the numpy fallback."""

import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from levibound import _pykernels, kernels

ck = pytest.importorskip("levibound._ckernels")


def test_block_series_parity(rng):
    s = np.concatenate([[0.0], rng.uniform(0, 0.99, 100)])
    for m in (1, 2, 3):
        a = _pykernels.block_series(s, m, 100_000, 1e-12)
        b = ck.block_series(s, m, 100_000, 1e-12)
        for x, y in zip(a, b):
            assert np.allclose(x, y, rtol=1e-12)


def test_block_series_closed_form():
    # [DERIVED] sum_k C(m+k, k) s^k = (1-s)^-(m+1)
    s = np.array([0.0, 0.5, 0.9, 0.999])
    S, dS, d2S, _, _ = kernels.block_series(s, 2, 10**7, 1e-13)
    assert np.allclose(S, (1 - s) ** -3, rtol=1e-10)
    assert np.allclose(dS, 3 * (1 - s) ** -4, rtol=1e-8)
    assert np.allclose(d2S, 12 * (1 - s) ** -5, rtol=1e-7)


def test_poly_eval_parity(rng):
    alpha = rng.integers(0, 3, (12, 3))
    beta = rng.integers(0, 3, (12, 3))
    coef = rng.normal(size=12) + 1j * rng.normal(size=12)
    zs = rng.normal(size=(30, 3)) + 1j * rng.normal(size=(30, 3))
    zs[0] = 0
    for x, y in zip(_pykernels.poly_eval(zs, alpha, beta, coef), ck.poly_eval(zs, alpha, beta, coef)):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-12)


def test_poly_eval_values():
    # P = z1 * conj(z1) * z2^2: Pz1 = conj(z1) z2^2, Pz2z2 = 2 |z1|^2
    z = np.array([[1 + 1j, 2.0]])
    P, Pz, Pzb, Pzz, Pzzb, _ = kernels.poly_eval(z, [[1, 2]], [[1, 0]], [1.0])
    assert P[0] == pytest.approx(8)
    assert Pz[0, 0] == pytest.approx((1 - 1j) * 4)
    assert Pzz[0, 1, 1] == pytest.approx(4)
    assert Pzzb[0, 0, 0] == pytest.approx(4)


def test_backend_selected():
    assert kernels.BACKEND == "cython"


def test_pure_fallback_env():
    code = "from levibound import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, LEVIBOUND_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
