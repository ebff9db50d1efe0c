"""Compare the compiled and pure-numpy kernel backends.

Run with ``python benchmarks/bench_kernels.py``.  Prints median wall times
and the largest relative disagreement between the two backends.
"""

import argparse
import timeit

import numpy as np

from levibound import _pykernels

try:
    from levibound import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _cases(rng):
    s = np.concatenate([rng.uniform(0, 0.9, 200), 1 - np.geomspace(1e-1, 1e-3, 50)])
    series = (s, 2, 200_000, 1e-10)
    n, terms = 3, 40
    alpha = rng.integers(0, 4, (terms, n))
    beta = rng.integers(0, 4, (terms, n))
    coef = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    zs = rng.normal(size=(2000, n)) + 1j * rng.normal(size=(2000, n))
    poly = (zs * 0.5, alpha, beta, coef)
    return {"block_series": series, "poly_eval": poly}


def _max_rel(a, b):
    worst = 0.0
    for x, y in zip(a, b):
        x, y = np.asarray(x), np.asarray(y)
        scale = np.maximum(np.abs(x), 1e-300)
        worst = max(worst, float(np.max(np.abs(x - y) / scale)))
    return worst


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cases = _cases(np.random.default_rng(args.seed))
    print(f"{'kernel':<14}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}{'max rel diff':>15}")
    for name, arg in cases.items():
        py = getattr(_pykernels, name)
        t_py = min(timeit.repeat(lambda: py(*arg), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:<14}{t_py:>14.2f}{'n/a':>14}{'n/a':>10}{'n/a':>15}")
            continue
        cy = getattr(_ckernels, name)
        t_cy = min(timeit.repeat(lambda: cy(*arg), number=1, repeat=args.repeat)) * 1e3
        diff = _max_rel(py(*arg), cy(*arg))
        print(f"{name:<14}{t_py:>14.2f}{t_cy:>14.2f}{t_py / t_cy:>10.1f}{diff:>15.2e}")


if __name__ == "__main__":
    main()
