"""Exact-rational cores for correlation-style ratios.

Doubles are dyadic rationals, so sums of products of finitely many doubles
are exact integers after a common power-of-two rescaling. Computing the
squared statistic num^2 / (d1 * d2) in big-int arithmetic and rounding once
(Python's int/int true division is correctly rounded) gives:

  * r(x, x) == 1.0 and cos(v, v) == 1.0 exactly,
  * |result| <= 1.0 always (Cauchy-Schwarz holds in exact arithmetic),
  * exact zero-variance detection,
  * bit-identical output under any input scaling that is exact in IEEE
    arithmetic (every power-of-two scaling; other factors on fixtures whose
    entries make the per-element product exact).

Inputs are 1-D float64 arrays; conversion cost is linear and only paid at
metric-reporting boundaries, never inside optimizer loops.
"""

from __future__ import annotations

import math

import numpy as np


def _to_scaled_ints(x: np.ndarray) -> list[int]:
    """Represent every entry as an integer under one power-of-two scaling."""
    ratios = [float(v).as_integer_ratio() for v in x]
    shift = max(d.bit_length() for _, d in ratios) - 1
    # every denominator is 2**k with k <= shift, so the shift difference is exact
    return [n << (shift - (d.bit_length() - 1)) for n, d in ratios]


def _signed_sqrt_ratio(num: int, d1: int, d2: int) -> float:
    """sign(num) * sqrt(num^2 / (d1*d2)) with a single rounding at the end."""
    if num == 0:
        return 0.0
    q = (num * num) / (d1 * d2)
    return math.copysign(math.sqrt(q), 1.0 if num > 0 else -1.0)


def exact_corr_sq(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Pearson r and r^2 of two equal-length vectors, exact-core.

    Returns (r, r_sq). Raises ValueError if either vector is constant;
    callers translate that into their domain error.
    """
    a = _to_scaled_ints(np.ascontiguousarray(x, dtype=np.float64))
    b = _to_scaled_ints(np.ascontiguousarray(y, dtype=np.float64))
    n = len(a)
    sa, sb = sum(a), sum(b)
    # centered values scaled by n: n*x_i - sum(x); scale cancels in the ratio
    ca = [n * v - sa for v in a]
    cb = [n * v - sb for v in b]
    num = sum(p * q for p, q in zip(ca, cb))
    d1 = sum(p * p for p in ca)
    d2 = sum(q * q for q in cb)
    if d1 == 0 or d2 == 0:
        raise ValueError("constant input")
    r = _signed_sqrt_ratio(num, d1, d2)
    r_sq = (num * num) / (d1 * d2) if num else 0.0
    return r, r_sq


def exact_cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity with the exact-rational core; raises on zero norm."""
    a = _to_scaled_ints(np.ascontiguousarray(u, dtype=np.float64))
    b = _to_scaled_ints(np.ascontiguousarray(v, dtype=np.float64))
    num = sum(p * q for p, q in zip(a, b))
    d1 = sum(p * p for p in a)
    d2 = sum(q * q for q in b)
    if d1 == 0 or d2 == 0:
        raise ValueError("zero vector")
    return _signed_sqrt_ratio(num, d1, d2)
