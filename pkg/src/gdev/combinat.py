"""Falling factorials, exact and in log space."""

from __future__ import annotations

import math
from fractions import Fraction


def falling(x: int, k: int) -> int:
    """Exact falling factorial (x)_k = x(x-1)...(x-k+1); zero once a factor hits 0."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = 1
    for j in range(k):
        out *= x - j
        if out == 0:
            return 0
    return out


def log_falling(x: float, k: int) -> float:
    """log (x)_k for real x >= k; -inf when the product vanishes."""
    if k == 0:
        return 0.0
    if x - k + 1 <= 0:
        return -math.inf
    return math.lgamma(x + 1) - math.lgamma(x - k + 1)


def falling_ratio(a: int, b: int, k: int) -> Fraction:
    """(a)_k / (b)_k as an exact rational."""
    den = falling(b, k)
    if den == 0:
        raise ZeroDivisionError(f"({b})_{k} vanishes")
    return Fraction(falling(a, k), den)


def pair_count(n: int) -> int:
    return n * (n - 1) // 2
