"""Concrete smooth cutoff functions for the barrier and witness constructions.

All three are built from the C^3 smoothstep ``s(t) = 35t^4 - 84t^5 + 70t^6 - 20t^7``
(first three derivatives vanish at both ends), or are piecewise polynomials
with three continuous derivatives.  Every function returns
``(f, f', f'', f''')`` evaluated elementwise.
"""

from dataclasses import dataclass

import numpy as np


def smoothstep(v):
    """C^3 smoothstep on [0, 1] (clamped outside) with three derivatives."""
    v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
    s = v**4 * (35 - 84 * v + 70 * v**2 - 20 * v**3)
    d1 = 140 * v**3 * (1 - v) ** 3
    d2 = 420 * v**2 * (1 - v) ** 2 * (1 - 2 * v)
    d3 = 840 * v * (1 - v) * (1 - 5 * v + 5 * v**2)
    return s, d1, d2, d3


def _smoothstep_integral(v):
    v = np.clip(v, 0.0, 1.0)
    return 7 * v**5 - 14 * v**6 + 10 * v**7 - 2.5 * v**8


def chi1(t):
    """Decreasing cutoff: 1 for t < 1/2, 0 for t > 1."""
    t = np.asarray(t, dtype=float)
    s, d1, d2, d3 = smoothstep(2 * t - 1)
    return 1 - s, -2 * d1, -4 * d2, -8 * d3


def chi2(t):
    """Convex increasing: 0 for t < 1/2, ``(t - 1/2)^4`` beyond."""
    u = np.maximum(np.asarray(t, dtype=float) - 0.5, 0.0)
    return u**4, 4 * u**3, 12 * u**2, 24 * u


PLATEAU = 0.75


def chi_witness(t):
    """Concave cutoff with chi(t) = t on [0, 1/2] and chi = 3/4 on [1, inf).

    chi' decreases smoothly from 1 to 0 across [1/2, 1]; concavity forces the
    plateau value 1/2 + 1/4 rather than 1.
    """
    t = np.asarray(t, dtype=float)
    v = 2 * t - 1
    s, d1, d2, _ = smoothstep(v)
    mid = 0.5 + 0.5 * (np.clip(v, 0, 1) - _smoothstep_integral(v))
    f = np.where(t <= 0.5, t, np.where(t >= 1.0, PLATEAU, mid))
    f1 = np.where(t <= 0.5, 1.0, 1.0 - s)
    f2 = np.where(t <= 0.5, 0.0, -2 * d1)
    f3 = np.where(t <= 0.5, 0.0, -4 * d2)
    return f, f1, f2, f3


def log_chi_derivs(t):
    """``(log chi)'`` and ``(log chi)''`` for the witness cutoff (t > 0)."""
    f, f1, f2, _ = chi_witness(t)
    return f1 / f, f2 / f - (f1 / f) ** 2


def witness_alpha(grid=10_000):
    """``alpha = -min_{t in [1/2, 1]} (t (log chi)''(t) + chi'(t))`` on a uniform grid."""
    t = np.linspace(0.5, 1.0, grid)
    _, f1, _, _ = chi_witness(t)
    _, l2 = log_chi_derivs(t)
    return float(max(0.0, -(t * l2 + f1).min()))


def join_jumps(fn, joins, h=1e-6):
    """Largest jump of f, f', f'', f''' across each join point.

    One-sided limits are estimated by linear extrapolation from ``x +- h`` and
    ``x +- 2h``, which removes the O(h) slope contribution.
    """
    out = []
    for x in joins:
        def side(sgn):
            a = np.array(fn(np.array([x + sgn * h])))[:, 0]
            b = np.array(fn(np.array([x + 2 * sgn * h])))[:, 0]
            return 2 * a - b

        out.append(np.abs(side(-1) - side(1)))
    return np.max(out, axis=0)


@dataclass(frozen=True)
class CutoffPair:
    """The three cutoffs plus the certified witness constant ``alpha``."""

    chi1: object = chi1
    chi2: object = chi2
    chiP: object = chi_witness
    alpha: float = 0.0

    @classmethod
    def default(cls):
        return cls(alpha=witness_alpha())

    def smoothness_report(self):
        return {
            "chi1": join_jumps(self.chi1, (0.5, 1.0)).tolist(),
            "chi2": join_jumps(self.chi2, (0.5,)).tolist(),
            "chiP": join_jumps(self.chiP, (0.5, 1.0)).tolist(),
        }
