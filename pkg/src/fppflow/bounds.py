"""Closed-form constants and bounds from the large-deviation argument.

Includes the Chernoff exponent for Bernoulli capacities near 1, the choice of
``lambda`` and ``p0``, the renormalised counterpart, the zero-flow bound for
exponentially tall cylinders and exact counts of diamond-connected edge sets
and L1-connected vertex sets (lattice animals) containing a fixed element.
"""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass
from typing import Callable, Hashable

import numpy as np

from .flow import OracleSizeError
from .lattice import diamond_neighbors


@dataclass(frozen=True)
class BoundParams:
    p: float
    eps: float
    d: int
    lam: float
    c: float
    rho: float = 0.0  # ln h(n) / n^(d-1)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.c <= 1:
            raise ValueError("growth constant c must exceed 1")
        if not 0 <= self.p <= 1:
            raise ValueError("p must be in [0,1]")
        if not 0 <= self.eps < 1:
            raise ValueError("eps must be in [0,1)")


def _log_mgf_term(p: float, lam: float) -> float:
    """``ln(p + (1-p) e^lam)`` without overflow for large ``lam``."""
    if p >= 1:
        return 0.0
    if p <= 0:
        return lam
    return lam + math.log1p(-p) + math.log1p(p / (1 - p) * math.exp(-lam)) if lam > 30 \
        else math.log(p + (1 - p) * math.exp(lam))


def chebyshev_exponent(bp: BoundParams) -> float:
    """``-rho - ln c + lam (1 - eps) - ln(p + (1-p) e^lam)``.

    A positive value is a certified decay rate of ``alpha(eps)`` at speed
    ``n^(d-1)``.
    """
    return -bp.rho - math.log(bp.c) + bp.lam * (1 - bp.eps) - _log_mgf_term(bp.p, bp.lam)


def choose_lambda_p0(eps: float, c: float) -> tuple[float, float]:
    """Smallest ``lam`` with ``lam (1-eps) >= 3 ln c`` and the matching ``p0``.

    ``p0`` solves ``p + (1-p) e^lam = c``, rounded up to the next float so
    that every float ``p >= p0`` gives an exponent of at least ``ln c - rho``.
    """
    if not 0 <= eps < 1:
        raise ValueError("eps must be in [0,1)")
    if c <= 1:
        raise ValueError("c must exceed 1")
    lam = 3 * math.log(c) / (1 - eps)
    # 1 - p0 = (c - 1) / (e^lam - 1), written to stay finite for large lam
    q0 = math.exp(math.log(c - 1) - math.log(math.expm1(lam)))
    p0 = max(1.0 - q0, 0.0)
    # round up so that 1 - p0 never exceeds q0; if even the float just below 1
    # is too small, p0 becomes 1.0 because no smaller float qualifies
    while p0 < 1.0 and Fraction(1) - Fraction(p0) > Fraction(q0):
        p0 = math.nextafter(p0, 1.0)
    return lam, p0


def renorm_exponent(c_prime: float, lam: float, d: int, delta_K: float,
                    eps_ratio: float = 0.0) -> float:
    """Bracket of the block-level bound.

    ``-ln c' + lam/3^d (1 - eps_ratio) - ln(1 + delta_K (e^lam - 1))`` where
    ``eps_ratio = eps n^(d-1) / u`` with ``u`` the number of blocks in a cut.
    """
    return (-math.log(c_prime) + lam / 3 ** d * (1 - eps_ratio)
            - math.log1p(delta_K * math.expm1(lam)))


def choose_lambda_delta(c_prime: float, d: int) -> tuple[float, float]:
    """``lam = 2 * 3^d * 3 ln c'`` and the largest admissible ``delta_K``.

    The second value solves ``ln(1 + delta (e^lam - 1)) = ln c'``.
    """
    lam = 2 * 3 ** d * 3 * math.log(c_prime)
    return lam, (c_prime - 1) / math.expm1(lam)


def epsilon0_renorm(K: int, d: int, eta: float | None = None) -> float:
    """``1 / (2 K^(d-1))``, scaled by ``eta`` for a truncated general law."""
    if K < 2 or K % 2:
        raise ValueError("K must be an even integer >= 2")
    eps0 = 1.0 / (2 * K ** (d - 1))
    return eps0 if eta is None else eta * eps0


def log_zero_flow_bound(n: int, h: int, p: float, d: int) -> float:
    """Natural log of ``[1 - (1-p)^((n+1)^(d-1))]^h``.

    A cylinder with ``(n+1)^(d-1)`` columns has nonzero flow only if each of
    its ``h`` levels has an open vertical edge.
    """
    cols = (n + 1) ** (d - 1)
    if p <= 0:
        return -math.inf
    if p >= 1:
        return 0.0
    closed_all = math.exp(cols * math.log1p(-p))
    return h * math.log1p(-closed_all)


def zero_flow_bound(n: int, h: int, p: float, d: int) -> float:
    return math.exp(log_zero_flow_bound(n, h, p, d))


# -- lattice animals ---------------------------------------------------------

def _redelmeier(root: Hashable, neighbors: Callable[[Hashable], list], s_max: int) -> list[int]:
    """Number of connected sets of each size ``1..s_max`` that contain ``root``.

    Each set is produced exactly once: the untried frontier only grows with
    elements never offered before.
    """
    counts = [0] * (s_max + 1)

    def extend(size, untried, seen):
        untried = list(untried)
        while untried:
            x = untried.pop()
            counts[size + 1] += 1
            if size + 1 < s_max:
                fresh = [y for y in neighbors(x) if y not in seen]
                extend(size + 1, untried + fresh, seen | set(fresh))

    counts[1] = 1
    if s_max > 1:
        first = neighbors(root)
        extend(1, first, {root, *first})
    return counts[1:]


_DIAMOND_CAP = {2: 6, 3: 4}


@dataclass(frozen=True)
class AnimalCount:
    size: int
    count: int

    @property
    def growth(self) -> float:
        """Per-element growth ``count^(1/size)``."""
        return self.count ** (1.0 / self.size)


def diamond_root(d: int):
    """The vertical edge at the origin, in ``(lower endpoint, axis)`` form."""
    return ((0,) * d, d - 1)


def count_diamond_sets(s: int, d: int) -> AnimalCount:
    """Diamond-connected edge sets of ``s`` edges containing the vertical edge at 0."""
    if d not in _DIAMOND_CAP or not 1 <= s <= _DIAMOND_CAP[d]:
        raise OracleSizeError(f"size {s} in d={d} is outside the enumeration caps {_DIAMOND_CAP}")
    counts = _redelmeier(diamond_root(d), _cached(diamond_neighbors), s)
    return AnimalCount(s, counts[-1])


_VERTEX_CAP = {2: 10, 3: 7}


def _l1_neighbors(x):
    out = []
    for i in range(len(x)):
        for sgn in (-1, 1):
            out.append(x[:i] + (x[i] + sgn,) + x[i + 1:])
    return out


def count_vertex_animals(s: int, d: int) -> AnimalCount:
    """L1-connected vertex sets of size ``s`` containing the origin (block-level count)."""
    if d not in _VERTEX_CAP or not 1 <= s <= _VERTEX_CAP[d]:
        raise OracleSizeError(f"size {s} in d={d} is outside the enumeration caps {_VERTEX_CAP}")
    counts = _redelmeier((0,) * d, _l1_neighbors, s)
    return AnimalCount(s, counts[-1])


def growth_table(d: int, kind: str = "diamond") -> list[AnimalCount]:
    cap = (_DIAMOND_CAP if kind == "diamond" else _VERTEX_CAP)[d]
    fn = count_diamond_sets if kind == "diamond" else count_vertex_animals
    return [fn(s, d) for s in range(1, cap + 1)]


def _cached(fn):
    cache = {}

    def wrapper(x):
        if x not in cache:
            cache[x] = fn(x)
        return cache[x]

    return wrapper


def bounds_grid(eps_values, c_values, p_offsets=(0.0, 0.5, 1.0), rho: float = 0.0):
    """Evaluate the exponent at ``p`` between ``p0`` and 1 for every ``(eps, c)``.

    Returns rows ``(eps, c, lam, p0, p, exponent, ln c - rho)``.
    """
    rows = []
    for eps in eps_values:
        for c in c_values:
            lam, p0 = choose_lambda_p0(eps, c)
            for t in p_offsets:
                p = p0 + t * (1 - p0)
                e = chebyshev_exponent(BoundParams(p, eps, 2, lam, c, rho))
                rows.append((eps, c, lam, p0, p, e, math.log(c) - rho))
    return np.array(rows)
