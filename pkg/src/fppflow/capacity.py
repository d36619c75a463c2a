"""Capacity distributions, reproducible i.i.d. fields and Bernoulli truncation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .lattice import LatticeGraph

# critical bond-percolation thresholds; 3d value is a numerical estimate
P_C_DEFAULT = {2: 0.5, 3: 0.2488}


class HypothesisError(ValueError):
    """Raised when F(0) < 1 - p_c fails."""


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Bernoulli parameter outside [0,1]: {self.p}")

    is_atomic = True

    @property
    def atoms(self):
        return [(0.0, 1.0 - self.p), (1.0, self.p)]

    def cdf(self, x: float) -> float:
        if x < 0:
            return 0.0
        return 1.0 - self.p if x < 1 else 1.0

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return (u < self.p).astype(np.float64)

    def to_dict(self):
        return {"type": "bernoulli", "p": self.p}


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("capacities must be nonnegative")

    is_atomic = True

    @property
    def atoms(self):
        return [(self.value, 1.0)]

    def cdf(self, x: float) -> float:
        return 1.0 if x >= self.value else 0.0

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        return np.full(u.shape, float(self.value))

    def to_dict(self):
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class Exponential:
    rate: float

    def cdf(self, x: float) -> float:
        return 0.0 if x <= 0 else -math.expm1(-self.rate * x)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return -np.log1p(-u) / self.rate

    def to_dict(self):
        return {"type": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class Uniform:
    a: float
    b: float

    def cdf(self, x: float) -> float:
        if x <= self.a:
            return 0.0
        if x >= self.b:
            return 1.0
        return (x - self.a) / (self.b - self.a)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        return self.a + (self.b - self.a) * u

    def to_dict(self):
        return {"type": "uniform", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class PointMassMixture:
    """Finitely many atoms plus an optional continuous tail.

    ``atoms`` is a tuple of ``(value, probability)``; the tail receives the
    remaining mass ``tail_weight``.
    """

    atoms: tuple[tuple[float, float], ...]
    tail: Union[Exponential, Uniform, None] = None
    tail_weight: float = 0.0

    def __post_init__(self):
        atoms = tuple((float(v), float(w)) for v, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if any(v < 0 or w < 0 for v, w in atoms) or self.tail_weight < 0:
            raise ValueError("atoms and weights must be nonnegative")
        if self.tail is None and self.tail_weight:
            raise ValueError("tail_weight given without a tail")
        if isinstance(self.tail, Uniform) and not 0 <= self.tail.a < self.tail.b:
            raise ValueError("uniform tail needs 0 <= a < b")
        if isinstance(self.tail, Exponential) and self.tail.rate <= 0:
            raise ValueError("exponential tail needs a positive rate")
        total = sum(w for _, w in atoms) + self.tail_weight
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total}, not 1")

    @property
    def is_atomic(self) -> bool:
        return self.tail is None or self.tail_weight == 0

    def cdf(self, x: float) -> float:
        if x < 0:
            return 0.0
        mass = sum(w for v, w in self.atoms if v <= x)
        if self.tail is not None:
            mass += self.tail_weight * self.tail.cdf(x)
        return min(mass, 1.0)

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        # one uniform per edge: pick the component, then reuse the rescaled
        # position inside that component's slice of [0,1)
        weights = [w for _, w in self.atoms] + [self.tail_weight]
        cum = np.cumsum(weights)
        cum[-1] = max(cum[-1], 1.0)
        comp = np.minimum(np.searchsorted(cum, u, side="right"), len(weights) - 1)
        out = np.empty(u.shape)
        for i, (v, _) in enumerate(self.atoms):
            out[comp == i] = v
        if self.tail is not None:
            sel = comp == len(self.atoms)
            if sel.any():
                start = cum[-2] if len(cum) > 1 else 0.0
                inner = (u[sel] - start) / self.tail_weight
                out[sel] = self.tail.ppf(np.clip(inner, 0.0, np.nextafter(1.0, 0)))
        return out

    def to_dict(self):
        out = {"type": "mixture", "atoms": [list(a) for a in self.atoms]}
        if self.tail is not None:
            out["tail"] = self.tail.to_dict()
            out["tail_weight"] = self.tail_weight
        return out


CapacityDistribution = Union[Bernoulli, Constant, PointMassMixture]


def parse_distribution(cfg: dict) -> CapacityDistribution:
    """Build a distribution from its declarative JSON form."""
    kind = cfg.get("type")
    if kind == "bernoulli":
        return Bernoulli(float(cfg["p"]))
    if kind == "constant":
        return Constant(float(cfg["value"]))
    if kind == "mixture":
        tail = None
        if "tail" in cfg:
            t = cfg["tail"]
            if t["type"] == "exponential":
                tail = Exponential(float(t["rate"]))
            elif t["type"] == "uniform":
                tail = Uniform(float(t["a"]), float(t["b"]))
            else:
                raise ValueError(f"unknown tail type {t['type']!r}")
        return PointMassMixture(tuple(tuple(a) for a in cfg.get("atoms", [])), tail,
                                float(cfg.get("tail_weight", 0.0)))
    raise ValueError(f"unknown distribution type {kind!r}")


def cdf(dist: CapacityDistribution, x: float) -> float:
    return dist.cdf(x)


@dataclass(frozen=True)
class SeedSpec:
    seed: int
    replicate: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.replicate < 0:
            raise ValueError("replicate id must be >= 0")

    def uniforms(self, n: int) -> np.ndarray:
        """The first ``n`` numbers of this replicate's counter-based stream.

        Entry ``i`` depends only on ``(seed, replicate, i)``.
        """
        bitgen = np.random.Philox(np.random.SeedSequence([self.seed, self.replicate]))
        return np.random.Generator(bitgen).random(n)


@dataclass(frozen=True, eq=False)
class CapacityField:
    graph: LatticeGraph
    values: np.ndarray
    distribution: CapacityDistribution
    seed: SeedSpec | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != (self.graph.n_edges,):
            raise ValueError("need exactly one capacity per edge")
        if (vals < 0).any():
            raise ValueError("capacities must be nonnegative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def is_binary(self) -> bool:
        return bool(np.isin(self.values, (0.0, 1.0)).all())

    @property
    def exact(self) -> bool:
        """Atomic distributions are solved in exact rational arithmetic."""
        return bool(self.distribution.is_atomic)

    def regenerate(self) -> "CapacityField":
        if self.seed is None:
            raise ValueError("field has no seed provenance")
        return sample_capacities(self.graph, self.distribution, self.seed)

    def to_csv(self) -> str:
        lines = ["edge,capacity"]
        lines += [f"{i},{v!r}" for i, v in enumerate(self.values.tolist())]
        return "\n".join(lines) + "\n"


def sample_capacities(g: LatticeGraph, dist: CapacityDistribution, seed: SeedSpec) -> CapacityField:
    return CapacityField(g, dist.from_uniform(seed.uniforms(g.n_edges)), dist, seed)


def choose_eta(dist: CapacityDistribution, p_c: float, max_halvings: int = 60) -> float:
    """Largest ``x0 / 2**j`` with ``1 - F(eta) > p_c``.

    ``x0`` is the smallest positive atom of ``dist`` if it has one, else 1.
    """
    f0 = dist.cdf(0.0)
    if not f0 < 1.0 - p_c:
        raise HypothesisError(f"F(0) = {f0} is not below 1 - p_c = {1.0 - p_c}")
    positive = [v for v, w in getattr(dist, "atoms", ()) if v > 0 and w > 0]
    eta = min(positive) if positive else 1.0
    for _ in range(max_halvings + 1):
        if 1.0 - dist.cdf(eta) > p_c:
            return eta
        eta /= 2.0
    raise HypothesisError(f"no eta found after {max_halvings} halvings")


def truncate(f: CapacityField, eta: float) -> CapacityField:
    """Bernoulli field ``1{t(e) > eta}`` (strict)."""
    if eta < 0:
        raise ValueError("eta must be >= 0")
    p_prime = 1.0 - f.distribution.cdf(eta)
    return CapacityField(f.graph, (f.values > eta).astype(np.float64), Bernoulli(min(max(p_prime, 0.0), 1.0)),
                         f.seed, {"truncated_from": f.distribution.to_dict(), "eta": eta})


def restrict(f: CapacityField, sub: LatticeGraph) -> CapacityField:
    """The same capacities seen on a sub-box of the field's graph."""
    g = f.graph
    if not (g.contains(sub.lo) and g.contains(sub.hi)):
        raise ValueError(f"{sub!r} is not inside {g!r}")
    values = np.empty(sub.n_edges)
    for a in range(g.d):
        sl = [slice(l - gl, h - gl + 1) for l, h, gl in zip(sub.lo, sub.hi, g.lo)]
        sl[a] = slice(sl[a].start, sl[a].stop - 1)
        values[sub.axis_edges[a].ravel()] = f.values[g.axis_edges[a][tuple(sl)].ravel()]
    return CapacityField(sub, values, f.distribution, f.seed, {"restricted_from": [list(g.lo), list(g.hi)]})
