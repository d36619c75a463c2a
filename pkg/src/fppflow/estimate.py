"""Monte Carlo estimation of ``alpha(eps) = P[phi <= eps n^(d-1)]`` and its rate."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

from .capacity import CapacityDistribution, SeedSpec, sample_capacities
from .flow import flow_value
from .lattice import CylinderSpec, build_cylinder
from .parallel import run_chunks
from .stats import wilson_interval, wilson_upper

HEIGHT_KINDS = ("constant", "linear", "power", "exponential")


@dataclass(frozen=True)
class HeightFunction:
    """``h(n)``: constant ``c``, linear ``c n``, power ``n^a`` or ``base^(r n^(d-1))``.

    Values are floored and never below 1.
    """

    kind: str = "linear"
    c: float = 1.0
    a: float = 1.0
    base: float = 2.0
    r: float = 1.0

    def __post_init__(self):
        if self.kind not in HEIGHT_KINDS:
            raise ValueError(f"unknown height kind {self.kind!r}")

    def __call__(self, n: int, d: int) -> int:
        if self.kind == "constant":
            h = self.c
        elif self.kind == "linear":
            h = self.c * n
        elif self.kind == "power":
            h = n ** self.a
        else:
            h = self.base ** (self.r * n ** (d - 1))
        return max(1, int(math.floor(h)))

    def log_ratio(self, n: int, d: int) -> float:
        """``ln h(n) / n^(d-1)``, the quantity that must vanish."""
        return math.log(self(n, d)) / n ** (d - 1)


@dataclass(frozen=True)
class ExperimentSpec:
    d: int
    n_values: tuple[int, ...]
    distribution: CapacityDistribution
    epsilons: tuple[float, ...]
    replicates: int
    seed: int
    height: HeightFunction = field(default_factory=HeightFunction)

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if any(e < 0 for e in self.epsilons):
            raise ValueError("eps must be >= 0")
        for n in self.n_values:
            if n < 1 or self.height(n, self.d) < 1:
                raise ValueError(f"invalid side/height at n={n}")


@dataclass
class AlphaRow:
    n: int
    h: int
    eps: float
    replicates: int
    hits: int
    alpha: float
    ci: tuple[float, float]
    upper_one_sided: float
    rate: float | None  # None when alpha_hat == 0
    rate_ci: tuple[float, float]
    rate_lower_censored: float | None

    @property
    def censored(self) -> bool:
        return self.hits == 0

    @property
    def rate_or_bound(self) -> float:
        """Point rate, or its one-sided lower bound when no replicate hit."""
        return self.rate_lower_censored if self.censored else self.rate


@dataclass
class EstimationReport:
    rows: list[AlphaRow]
    wall_time: float
    level: float = 0.99

    CSV_HEADER = ("n,h,eps,replicates,hits,alpha_hat,ci_lo,ci_hi,upper_one_sided,"
                  "rate,rate_ci_lo,rate_ci_hi,rate_lower_censored")

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            vals = [r.n, r.h, r.eps, r.replicates, r.hits, r.alpha, *r.ci, r.upper_one_sided,
                    r.rate, *r.rate_ci, r.rate_lower_censored]
            lines.append(",".join("" if v is None else repr(v) for v in vals))
        return "\n".join(lines) + "\n"


def replicate_id(n: int, r: int) -> int:
    """Replicate ids depend on ``(n, r)`` only, not on the rest of the sweep."""
    return (n << 32) | r


@lru_cache(maxsize=8)
def _graph(d, n, h):
    return build_cylinder(CylinderSpec.cube(d, n, h))


def _flows_chunk(args):
    d, n, h, dist, seed, reps = args
    g = _graph(d, n, h)
    return [flow_value(g, sample_capacities(g, dist, SeedSpec(seed, replicate_id(n, r)))) for r in reps]


def _chunks(n: int, size: int = 500) -> list[range]:
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def sample_flows(spec: ExperimentSpec, n: int, threads: int = 1) -> list:
    h = spec.height(n, spec.d)
    jobs = [(spec.d, n, h, spec.distribution, spec.seed, c) for c in _chunks(spec.replicates)]
    out = []
    for part in run_chunks(_flows_chunk, jobs, threads):
        out.extend(part)
    return out


def summarize(n: int, h: int, d: int, eps: float, flows, level: float = 0.99) -> AlphaRow:
    R = len(flows)
    hits = sum(1 for phi in flows if phi <= eps * n ** (d - 1))
    area = n ** (d - 1)
    ci = wilson_interval(hits, R, level)
    upper = wilson_upper(hits, R, level)

    def to_rate(a):
        return math.inf if a <= 0 else -math.log(a) / area + 0.0

    rate = None if hits == 0 else to_rate(hits / R)
    censored = to_rate(upper) if hits == 0 else None
    return AlphaRow(n, h, eps, R, hits, hits / R, ci, upper, rate,
                    (to_rate(ci[1]), to_rate(ci[0])), censored)


def estimate_alpha(spec: ExperimentSpec, threads: int = 1, level: float = 0.99) -> EstimationReport:
    """Fraction of replicates with ``phi <= eps n^(d-1)`` for every ``(n, eps)``.

    All epsilons at a given ``n`` share the same sampled fields.
    """
    t0 = time.perf_counter()
    rows = []
    for n in spec.n_values:
        flows = sample_flows(spec, n, threads)
        h = spec.height(n, spec.d)
        for eps in spec.epsilons:
            rows.append(summarize(n, h, spec.d, eps, flows, level))
    return EstimationReport(rows, time.perf_counter() - t0, level)


@dataclass
class SweepResult:
    report: EstimationReport
    floor: float
    above_floor: dict[float, bool]

    def min_rate(self, eps: float) -> float:
        return min(r.rate_or_bound for r in self.report.rows if r.eps == eps)


def rate_sweep(spec: ExperimentSpec, floor: float = 0.05, threads: int = 1) -> SweepResult:
    """Rates over an increasing list of sides and whether they stay above ``floor``.

    A censored row (no replicate hit) contributes its one-sided lower bound.
    """
    if list(spec.n_values) != sorted(set(spec.n_values)):
        raise ValueError("n values must be strictly increasing")
    report = estimate_alpha(spec, threads)
    above = {}
    for eps in spec.epsilons:
        above[eps] = all(r.rate_or_bound >= floor for r in report.rows if r.eps == eps)
    return SweepResult(report, floor, above)
