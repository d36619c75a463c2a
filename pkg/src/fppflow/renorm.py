"""Coarse graining of bond percolation into blocks of side K.

Block ``x`` is ``K*x + ]-K/2, K/2]^d``, i.e. the integer points with
``K*x_i - K/2 + 1 <= y_i <= K*x_i + K/2``.  Its event-block is the union of
the 3^d blocks at L-infinity distance at most 1.  A block is good when

* its box carries an open cluster touching all 2d faces (event U),
* its box carries exactly one open cluster of diameter >= ceil(K/3), and
* so does each of the 2d boxes obtained by shifting it by K/2 along an axis.

Boxes are given as inclusive ``(lo, hi)`` coordinate tuples.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .capacity import P_C_DEFAULT, Bernoulli, CapacityField, SeedSpec, sample_capacities
from .stats import wilson_interval
from .flow import FlowNetwork, OracleSizeError
from .lattice import LatticeGraph

Box = tuple[tuple[int, ...], tuple[int, ...]]


class CoverageError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class CounterexampleError(RuntimeError):
    """Good blocks without the open path they are supposed to guarantee."""

    def __init__(self, message: str, instance: dict):
        super().__init__(message)
        self.instance = instance

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.instance, fh)


def _check_K(K: int) -> None:
    if K < 2 or K % 2:
        raise ValueError(f"block side K must be an even integer >= 2, got {K}")


def threshold(K: int) -> int:
    """Integer diameter threshold standing for K/3."""
    return -(-K // 3)


def block_box(x: Sequence[int], K: int) -> Box:
    _check_K(K)
    return (tuple(K * c - K // 2 + 1 for c in x), tuple(K * c + K // 2 for c in x))


def shift_box(box: Box, shift: Sequence[int]) -> Box:
    lo, hi = box
    return tuple(a + s for a, s in zip(lo, shift)), tuple(b + s for b, s in zip(hi, shift))


def shifts(K: int, d: int) -> list[tuple[int, ...]]:
    """The 2d vectors ``+-(K/2) e_i``."""
    out = []
    for i in range(d):
        for sgn in (1, -1):
            v = [0] * d
            v[i] = sgn * K // 2
            out.append(tuple(v))
    return out


def block_of(y: Sequence[int], K: int) -> tuple[int, ...]:
    """Index of the block containing the lattice point ``y``."""
    return tuple((c + K // 2 - 1) // K for c in y)


def rescale_region(lo: Sequence, hi: Sequence, K: int, lower_open: bool = False) -> list[tuple[int, ...]]:
    """Indices of the blocks meeting the box ``[lo, hi]`` of R^d.

    With ``lower_open`` the box is ``]lo, hi]`` instead, so that
    ``rescale_region(-K/2, K/2, K, lower_open=True)`` is exactly the origin.
    """
    _check_K(K)
    half = Fraction(K, 2)
    ranges = []
    # block x covers the real interval ]K x - K/2, K x + K/2]
    for a, b in zip(lo, hi):
        a, b = Fraction(a), Fraction(b)
        if lower_open:
            first = math.floor((a - half) / K) + 1
        else:
            first = math.ceil((a - half) / K)
        last = math.ceil((b + half) / K) - 1
        ranges.append(range(first, last + 1))
    return [tuple(x) for x in itertools.product(*ranges)]


def class_of(x: Sequence[int]) -> int:
    """Label in ``1..3^d`` of the class of ``x`` modulo 3."""
    label = 0
    for c in x:
        label = 3 * label + c % 3
    return label + 1


# -- clusters inside a box ---------------------------------------------------

def _box_slices(g: LatticeGraph, box: Box):
    lo, hi = box
    if not (g.contains(lo) and g.contains(hi)):
        raise CoverageError(f"box {lo}..{hi} is not covered by the field on {g.lo}..{g.hi}")
    return [slice(a - l, b - l + 1) for a, b, l in zip(lo, hi, g.lo)]


def _clusters(f: CapacityField, box: Box):
    """Open clusters of the box: per-component min and max coordinates."""
    g = f.graph
    sl = _box_slices(g, box)
    shape = tuple(s.stop - s.start for s in sl)
    ids = np.arange(int(np.prod(shape))).reshape(shape)
    rows, cols = [], []
    for a, idx in enumerate(g.axis_edges):
        sub = list(sl)
        sub[a] = slice(sl[a].start, sl[a].stop - 1)
        if sub[a].stop <= sub[a].start:
            continue
        is_open = f.values[idx[tuple(sub)]] == 1
        lower = [slice(None)] * len(shape)
        upper = [slice(None)] * len(shape)
        lower[a] = slice(0, -1)
        upper[a] = slice(1, None)
        rows.append(ids[tuple(lower)][is_open])
        cols.append(ids[tuple(upper)][is_open])
    r = np.concatenate(rows) if rows else np.empty(0, int)
    c = np.concatenate(cols) if cols else np.empty(0, int)
    n = ids.size
    adj = coo_matrix((np.ones(r.size, dtype=np.int8), (r, c)), shape=(n, n))
    ncomp, labels = connected_components(adj, directed=False)
    local = np.indices(shape).reshape(len(shape), -1).T
    mins = np.full((ncomp, len(shape)), np.iinfo(np.int64).max)
    maxs = np.full((ncomp, len(shape)), -1)
    for a in range(len(shape)):
        np.minimum.at(mins[:, a], labels, local[:, a])
        np.maximum.at(maxs[:, a], labels, local[:, a])
    return labels, mins, maxs, np.array(shape)


def event_U(f: CapacityField, box: Box) -> bool:
    """Some open cluster of the box meets all 2d faces of its inner boundary."""
    _, mins, maxs, shape = _clusters(f, box)
    return bool(((mins == 0) & (maxs == shape - 1)).all(axis=1).any())


def box_diameter(box: Box) -> int:
    return max(b - a for a, b in zip(*box))


def event_W(f: CapacityField, box: Box, m: int) -> bool:
    """Exactly one open cluster of the box has diameter at least ``m``."""
    if m > box_diameter(box):
        raise ValueError(f"threshold {m} exceeds the box diameter {box_diameter(box)}")
    _, mins, maxs, _ = _clusters(f, box)
    diam = (maxs - mins).max(axis=1)
    return int((diam >= m).sum()) == 1


# -- block process -----------------------------------------------------------

@dataclass(frozen=True)
class BlockEvents:
    U: bool
    W: bool
    W_shifted: tuple[bool, ...]

    @property
    def good(self) -> bool:
        return self.U and self.W and all(self.W_shifted)


@dataclass
class BlockProcess:
    K: int
    field: CapacityField
    events: dict[tuple[int, ...], BlockEvents]

    def X(self, x: Sequence[int]) -> int:
        return int(self.events[tuple(x)].good)

    @property
    def good(self) -> set[tuple[int, ...]]:
        return {x for x, ev in self.events.items() if ev.good}

    def to_csv(self) -> str:
        d = self.field.graph.d
        head = [f"x{i + 1}" for i in range(d)] + ["U", "W"] + [f"W_s{j}" for j in range(2 * d)] + ["X"]
        lines = [",".join(head)]
        for x in sorted(self.events):
            ev = self.events[x]
            row = list(x) + [int(ev.U), int(ev.W)] + [int(w) for w in ev.W_shifted] + [int(ev.good)]
            lines.append(",".join(str(v) for v in row))
        return "\n".join(lines) + "\n"


def block_events(f: CapacityField, x: Sequence[int], K: int) -> BlockEvents:
    box = block_box(x, K)
    m = threshold(K)
    return BlockEvents(
        event_U(f, box),
        event_W(f, box, m),
        tuple(event_W(f, shift_box(box, y), m) for y in shifts(K, len(x))),
    )


def block_process(f: CapacityField, K: int, domain: Iterable[Sequence[int]]) -> BlockProcess:
    if not f.is_binary:
        raise TypeError("the block process needs a 0/1 field")
    _check_K(K)
    return BlockProcess(K, f, {tuple(x): block_events(f, x, K) for x in domain})


def support_box(domain: Iterable[Sequence[int]], K: int) -> Box:
    """Smallest box holding every block of ``domain`` and its shifted boxes."""
    dom = np.array([tuple(x) for x in domain])
    lo = K * dom.min(axis=0) - K // 2 + 1 - K // 2
    hi = K * dom.max(axis=0) + K // 2 + K // 2
    return tuple(int(v) for v in lo), tuple(int(v) for v in hi)


# -- dependency structure ----------------------------------------------------

def edge_codes(lo: Sequence[int], hi: Sequence[int]) -> np.ndarray:
    """Integer codes of the edges with both endpoints in ``[lo, hi]``."""
    d = len(lo)
    out = []
    for a in range(d):
        ranges = [np.arange(l, h + (0 if i == a else 1)) for i, (l, h) in enumerate(zip(lo, hi))]
        grid = np.meshgrid(*ranges, indexing="ij")
        out.append(encode_edges(np.stack([g.ravel() for g in grid], axis=1), a))
    return np.concatenate(out)


_CODE_BITS = 14


def encode_edges(lower: np.ndarray, axis: int) -> np.ndarray:
    off = 1 << (_CODE_BITS - 1)
    code = np.zeros(len(lower), dtype=np.int64)
    for i in range(lower.shape[1]):
        code = (code << _CODE_BITS) | (lower[:, i].astype(np.int64) + off)
    return code * 4 + axis


def decode_edge(code: int, d: int) -> tuple[tuple[int, ...], int]:
    off = 1 << (_CODE_BITS - 1)
    axis = code % 4
    code //= 4
    x = []
    for _ in range(d):
        x.append((code & ((1 << _CODE_BITS) - 1)) - off)
        code >>= _CODE_BITS
    return tuple(reversed(x)), int(axis)


def dependency_support(x: Sequence[int], K: int) -> np.ndarray:
    """Sorted codes of every lattice edge that ``X_K(x)`` looks at."""
    box = block_box(x, K)
    parts = [edge_codes(*box)] + [edge_codes(*shift_box(box, y)) for y in shifts(K, len(x))]
    return np.unique(np.concatenate(parts))


def event_block_box(x: Sequence[int], K: int) -> Box:
    lo, _ = block_box([c - 1 for c in x], K)
    _, hi = block_box([c + 1 for c in x], K)
    return lo, hi


# -- delta_K -------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaEstimate:
    K: int
    d: int
    p: float
    replicates: int
    bad: int
    estimate: float
    ci: tuple[float, float]


def _delta_chunk(args):
    K, d, p, seed, reps = args
    lo, hi = support_box([(0,) * d], K)
    g = LatticeGraph(lo, hi)
    dist = Bernoulli(p)
    bad = 0
    for r in reps:
        f = sample_capacities(g, dist, SeedSpec(seed, r))
        bad += not block_events(f, (0,) * d, K).good
    return bad


def estimate_delta_K(K: int, p: float, replicates: int, seed: int, d: int = 2,
                     threads: int = 1, level: float = 0.99) -> DeltaEstimate:
    """Monte Carlo estimate of ``P[X_K(0) = 0]`` with a Wilson interval."""
    from .parallel import run_chunks

    _check_K(K)
    if replicates < 1:
        raise ValueError("need at least one replicate")
    if p <= P_C_DEFAULT.get(d, 0.0):
        warnings.warn(f"p={p} is not above p_c({d}); blocks will mostly be bad", stacklevel=2)
    bad = sum(run_chunks(_delta_chunk, [(K, d, p, seed, c) for c in _chunks(replicates)], threads))
    return DeltaEstimate(K, d, p, replicates, bad, bad / replicates,
                         wilson_interval(bad, replicates, level))


def _chunks(n: int, size: int = 250) -> list[range]:
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


# -- exact enumeration ---------------------------------------------------------

def exact_event_probabilities(box: Box, p, m: int | None = None) -> dict[str, Fraction]:
    """``P[U]`` and ``P[W(m)]`` for the box by summing over every configuration.

    ``p`` is turned into a Fraction; the box may have at most 20 edges.
    """
    g = LatticeGraph(*box)
    if g.n_edges > 20:
        raise OracleSizeError(f"{g.n_edges} edges exceeds the enumeration limit of 20")
    p = Fraction(str(p)) if isinstance(p, float) else Fraction(p)
    if m is None:
        m = 1
    pU = pW = Fraction(0)
    dist = Bernoulli(float(p))
    for bits in itertools.product((0, 1), repeat=g.n_edges):
        f = CapacityField(g, np.array(bits, dtype=float), dist)
        k = sum(bits)
        w = p ** k * (1 - p) ** (g.n_edges - k)
        if event_U(f, box):
            pU += w
        if event_W(f, box, m):
            pW += w
    return {"U": pU, "W": pW}


# -- rescaled cylinder and crossing paths ------------------------------------

@dataclass(frozen=True)
class RescaledCylinder:
    """Blocks meeting ``[0,n]^{d-1} x [0,h]`` with their bottom and top layers.

    ``graph`` is the lattice cylinder spanned laterally by the blocks and
    vertically by ``[0, h]``; it is where block paths turn into open paths.
    """

    d: int
    n: int
    h: int
    K: int
    domain: tuple[tuple[int, ...], ...]
    bottom: frozenset
    top: frozenset

    @classmethod
    def build(cls, d: int, n: int, h: int, K: int) -> "RescaledCylinder":
        domain = rescale_region((0,) * d, (n,) * (d - 1) + (h,), K)
        bottom = frozenset(rescale_region((0,) * d, (n,) * (d - 1) + (0,), K))
        top = frozenset(rescale_region((0,) * (d - 1) + (h,), (n,) * (d - 1) + (h,), K))
        return cls(d, n, h, K, tuple(domain), bottom, top)

    def graph(self) -> LatticeGraph:
        lo, _ = block_box(self.domain[0], self.K)
        _, hi = block_box(self.domain[-1], self.K)
        return LatticeGraph(lo[:-1] + (0,), hi[:-1] + (self.h,))

    def field_graph(self) -> LatticeGraph:
        return LatticeGraph(*support_box(self.domain, self.K))


def find_good_block_path(bp: BlockProcess, cyl: RescaledCylinder) -> list[tuple[int, ...]] | None:
    """Shortest L1 path of good blocks from the bottom layer to the top layer."""
    good = bp.good & set(cyl.domain)
    prev = {x: None for x in sorted(good & cyl.bottom)}
    queue = deque(prev)
    while queue:
        x = queue.popleft()
        if x in cyl.top:
            path = []
            while x is not None:
                path.append(x)
                x = prev[x]
            return path[::-1]
        for i in range(len(x)):
            for s in (-1, 1):
                y = x[:i] + (x[i] + s,) + x[i + 1:]
                if y in good and y not in prev:
                    prev[y] = x
                    queue.append(y)
    return None


def construct_crossing_path(f: CapacityField, block_path: Sequence[Sequence[int]], K: int,
                            bottom: int, top: int) -> list[tuple[int, ...]]:
    """Open path from height ``bottom`` to height ``top`` inside the union of the blocks.

    Every block must be good, consecutive blocks L1-neighbours, the first
    block must contain height ``bottom`` and the last height ``top``.  A
    failure under these conditions raises :class:`CounterexampleError`.
    """
    path = [tuple(x) for x in block_path]
    if not path:
        raise PreconditionError("empty block path")
    for x, y in zip(path, path[1:]):
        if sum(abs(a - b) for a, b in zip(x, y)) != 1:
            raise PreconditionError(f"blocks {x} and {y} are not L1-neighbours")
    for x in path:
        if not block_events(f, x, K).good:
            raise PreconditionError(f"block {x} is bad")
    if not block_box(path[0], K)[0][-1] <= bottom <= block_box(path[0], K)[1][-1]:
        raise PreconditionError("first block does not meet the bottom level")
    if not block_box(path[-1], K)[0][-1] <= top <= block_box(path[-1], K)[1][-1]:
        raise PreconditionError("last block does not meet the top level")

    g = f.graph
    allowed = np.zeros(g.n_vertices, dtype=bool)
    for x in set(path):
        lo, hi = block_box(x, K)
        inside = ((g.coords >= lo) & (g.coords <= hi)).all(axis=1)
        allowed |= inside
    h = g.coords[:, -1]
    allowed &= (h >= bottom) & (h <= top)
    starts = np.flatnonzero(allowed & (h == bottom)).tolist()
    prev = {s: None for s in starts}
    queue = deque(starts)
    adj = g.adjacency
    vals = f.values
    while queue:
        u = queue.popleft()
        if h[u] == top:
            out = []
            while u is not None:
                out.append(tuple(int(c) for c in g.coords[u]))
                u = prev[u]
            return out[::-1]
        for v, e in adj[u]:
            if allowed[v] and vals[e] == 1 and v not in prev:
                prev[v] = u
                queue.append(v)
    raise CounterexampleError(
        "good block path without an open crossing inside its blocks",
        {"K": K, "bottom": bottom, "top": top, "block_path": [list(x) for x in path],
         "lo": list(g.lo), "hi": list(g.hi), "values": vals.astype(int).tolist()},
    )


def count_block_disjoint_paths(bp: BlockProcess, cyl: RescaledCylinder) -> int:
    """Most vertex-disjoint L1 paths of good blocks from bottom to top layer."""
    good = sorted(bp.good & set(cyl.domain))
    index = {x: i for i, x in enumerate(good)}
    net = FlowNetwork(2 * len(good))
    for x, i in index.items():
        net.add_pair(2 * i, 2 * i + 1, 1)
        for a in range(len(x)):
            for s in (-1, 1):
                y = x[:a] + (x[a] + s,) + x[a + 1:]
                if y in index:
                    net.add_pair(2 * i + 1, 2 * index[y], 1)
    sources = [2 * index[x] for x in good if x in cyl.bottom]
    sinks = [2 * index[x] + 1 for x in good if x in cyl.top]
    if not sources or not sinks:
        return 0
    return int(net.max_flow(sources, sinks))
