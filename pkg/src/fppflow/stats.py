"""Binomial proportion intervals."""
from __future__ import annotations

import math

from scipy.stats import norm


def wilson_interval(k: int, n: int, level: float = 0.99) -> tuple[float, float]:
    """Two-sided Wilson score interval for ``k`` successes in ``n`` trials."""
    z = float(norm.ppf(0.5 + level / 2))
    return _wilson(k, n, z)


def wilson_upper(k: int, n: int, level: float = 0.99) -> float:
    """One-sided upper Wilson bound at confidence ``level``."""
    return _wilson(k, n, float(norm.ppf(level)))[1]


def _wilson(k, n, z):
    if n <= 0:
        raise ValueError("need at least one trial")
    phat = k / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi
