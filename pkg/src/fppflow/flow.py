"""Maximal flow between the bottom and top faces of a lattice cylinder.

The solver is Dinic's blocking-flow algorithm on arc pairs.  An undirected
lattice edge of capacity ``c`` becomes two arcs ``u->v`` and ``v->u`` of
capacity ``c`` that act as each other's residual reverse, so the net flow on
the edge is ``c - residual(u->v)``.  All bottom vertices are sources and all
top vertices sinks, which is the same as wiring an unbounded super-source and
super-sink.

Capacities are kept as Python ``int`` when integral, ``Fraction`` when the
distribution is atomic, and ``float`` otherwise.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from typing import Sequence

import numpy as np

from .capacity import CapacityField
from .lattice import LatticeGraph, is_separating

FLOAT_TOL = 1e-9


class OracleSizeError(ValueError):
    """Instance too large for an exhaustive oracle."""


class FlowNetwork:
    """Residual network of arc pairs; arc ``a`` and ``a ^ 1`` are mutual reverses."""

    def __init__(self, n: int):
        self.n = n
        self.head: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list = []

    def add_pair(self, u: int, v: int, cap_uv, cap_vu=0) -> int:
        a = len(self.to)
        self.to += [v, u]
        self.cap += [cap_uv, cap_vu]
        self.head[u].append(a)
        self.head[v].append(a + 1)
        return a

    def _levels(self, sources, sinks, tol):
        level = [-1] * self.n
        for s in sources:
            level[s] = 0
        queue = deque(sources)
        head, to, cap = self.head, self.to, self.cap
        stop = None
        while queue:
            u = queue.popleft()
            lu = level[u]
            if stop is not None and lu >= stop:
                break
            for a in head[u]:
                v = to[a]
                if level[v] < 0 and cap[a] > tol:
                    level[v] = lu + 1
                    if v in sinks and stop is None:
                        stop = lu + 1
                    queue.append(v)
        return level, stop is not None

    def max_flow(self, sources: Sequence[int], sinks: Sequence[int], tol=0):
        """Push a maximum flow from ``sources`` to ``sinks``; returns its value.

        ``tol`` is the residual below which an arc counts as saturated
        (0 for exact arithmetic).
        """
        sources = list(sources)
        sinkset = set(sinks)
        if sinkset.intersection(sources):
            raise ValueError("sources and sinks must be disjoint")
        head, to, cap = self.head, self.to, self.cap
        total = 0
        while True:
            level, reached = self._levels(sources, sinkset, tol)
            if not reached:
                break
            it = [0] * self.n
            for s in sources:
                stack: list[int] = []
                u = s
                while True:
                    if u in sinkset:
                        f = min(cap[a] for a in stack)
                        cut = None
                        for i, a in enumerate(stack):
                            cap[a] -= f
                            cap[a ^ 1] += f
                            if cut is None and cap[a] <= tol:
                                cut = i
                        total += f
                        del stack[cut:]
                        u = to[stack[-1]] if stack else s
                        continue
                    adj = head[u]
                    i = it[u]
                    lu1 = level[u] + 1
                    while i < len(adj):
                        a = adj[i]
                        if cap[a] > tol and level[to[a]] == lu1:
                            break
                        i += 1
                    it[u] = i
                    if i < len(adj):
                        stack.append(adj[i])
                        u = to[adj[i]]
                    else:
                        level[u] = -1
                        if not stack:
                            break
                        a = stack.pop()
                        u = to[a ^ 1]
                        it[u] += 1
        return total

    def reachable(self, sources: Sequence[int], tol=0) -> np.ndarray:
        seen = np.zeros(self.n, dtype=bool)
        seen[list(sources)] = True
        queue = deque(sources)
        while queue:
            u = queue.popleft()
            for a in self.head[u]:
                v = self.to[a]
                if not seen[v] and self.cap[a] > tol:
                    seen[v] = True
                    queue.append(v)
        return seen


# -- exact number handling ---------------------------------------------------

def _as_numbers(field_: CapacityField) -> tuple[list, Number]:
    """Capacities as Python numbers plus the saturation tolerance."""
    vals = field_.values
    if np.all(vals == np.round(vals)):
        return [int(v) for v in vals.tolist()], 0
    if field_.exact:
        return [Fraction(v) for v in vals.tolist()], 0
    return vals.tolist(), FLOAT_TOL * max(1.0, float(vals.max()))


def _lattice_network(g: LatticeGraph, caps: list) -> FlowNetwork:
    net = FlowNetwork(g.n_vertices)
    for (u, v), c in zip(g.edges.tolist(), caps):
        net.add_pair(u, v, c, c)
    return net


# -- public types ------------------------------------------------------------

@dataclass
class Stream:
    """Per-edge flow magnitude ``g`` and orientation.

    ``forward[e]`` is True when fluid runs from the edge's first endpoint
    (``g.edges[e, 0]``) to its second.
    """

    magnitude: list
    forward: list

    @classmethod
    def from_net(cls, net: Sequence) -> "Stream":
        return cls([abs(x) for x in net], [x >= 0 for x in net])

    @classmethod
    def zero(cls, g: LatticeGraph) -> "Stream":
        return cls([0] * g.n_edges, [True] * g.n_edges)

    def net(self) -> list:
        return [m if f else -m for m, f in zip(self.magnitude, self.forward)]


@dataclass
class FlowResult:
    value: Number
    stream: Stream
    cut: list[int]
    cut_value: Number
    exact: bool

    def to_json(self, include_flows: bool = False) -> str:
        out = {
            "value": float(self.value),
            "value_exact": str(self.value) if self.exact else None,
            "cut_value": float(self.cut_value),
            "cut": self.cut,
            "cut_size": len(self.cut),
        }
        if include_flows:
            out["flows"] = [float(x) for x in self.stream.net()]
        return json.dumps(out)


@dataclass
class PathPacking:
    """Edge-disjoint open paths, each a vertex list plus its edge list."""

    vertices: list[list[int]] = field(default_factory=list)
    edges: list[list[int]] = field(default_factory=list)

    def __len__(self):
        return len(self.edges)


@dataclass(frozen=True)
class Violation:
    kind: str  # "negative", "capacity" or "conservation"
    where: int  # edge index, or vertex index for conservation
    detail: str


def _solve(g: LatticeGraph, field_: CapacityField):
    caps, tol = _as_numbers(field_)
    net = _lattice_network(g, caps)
    value = net.max_flow(g.bottom.tolist(), g.top.tolist(), tol)
    return net, caps, tol, value


def flow_value(g: LatticeGraph, field_: CapacityField) -> Number:
    """Maximal flow only, without cut extraction."""
    return _solve(g, field_)[3]


def _pruned_cut(g: LatticeGraph, net: FlowNetwork, tol) -> list[int]:
    side = net.reachable(g.bottom.tolist(), tol)
    u, v = g.edges[:, 0], g.edges[:, 1]
    cut = np.flatnonzero(side[u] != side[v]).tolist()
    # greedy minimality in index order; one pass suffices since separation is monotone
    kept = list(cut)
    for e in cut:
        trial = [x for x in kept if x != e]
        if is_separating(trial, g):
            kept = trial
    return kept


def max_flow(g: LatticeGraph, field_: CapacityField) -> FlowResult:
    net, caps, tol, value = _solve(g, field_)
    flows = [c - net.cap[2 * e] for e, c in enumerate(caps)]
    if tol:
        flows = [0.0 if abs(x) <= tol else x for x in flows]
    cut = _pruned_cut(g, net, tol)
    cut_value = sum((caps[e] for e in cut), 0)
    return FlowResult(value, Stream.from_net(flows), cut, cut_value, tol == 0)


def min_cut(g: LatticeGraph, field_: CapacityField) -> list[int]:
    return max_flow(g, field_).cut


def validate_stream(g: LatticeGraph, field_: CapacityField, s: Stream, tol: float | None = None):
    """Value of a feasible stream, or the first violated constraint.

    Conservation is checked at every vertex off both faces.  Read literally
    it would also bind the bottom face, which would force every stream to
    carry zero flow.
    """
    caps, ctol = _as_numbers(field_)
    if tol is None:
        tol = ctol
    for e, (m, c) in enumerate(zip(s.magnitude, caps)):
        if m < -tol:
            return Violation("negative", e, f"g={m}")
        if m > c + tol:
            return Violation("capacity", e, f"g={m} > t={c}")
    excess = [0] * g.n_vertices
    for (u, v), x in zip(g.edges.tolist(), s.net()):
        excess[u] -= x
        excess[v] += x
    face = g.is_bottom | g.is_top
    for w in np.flatnonzero(~face).tolist():
        if abs(excess[w]) > tol * max(1, len(g.adjacency[w])):
            return Violation("conservation", w, f"net inflow {excess[w]}")
    value = 0
    top = g.is_top
    for (u, v), x in zip(g.edges.tolist(), s.net()):
        # lower endpoint comes first, so only v can be the top vertex
        if top[v] and not top[u]:
            value += x
    return value


def slab_upper_bound(g: LatticeGraph, field_: CapacityField) -> Number:
    """Minimum over levels of the total capacity of the vertical edges crossing it."""
    caps, _ = _as_numbers(field_)
    vert = g.axis_edges[-1]
    sums = []
    for j in range(vert.shape[-1]):
        sums.append(sum((caps[e] for e in vert[..., j].ravel().tolist()), 0))
    return min(sums)


# -- disjoint open paths -----------------------------------------------------

def _decompose(g: LatticeGraph, net_flow: list) -> tuple[PathPacking, list]:
    """Split a bottom-to-top flow into paths, cancelling cycles on the way."""
    out: list[dict[int, list]] = [dict() for _ in range(g.n_vertices)]
    for e, ((u, v), x) in enumerate(zip(g.edges.tolist(), net_flow)):
        if x > 0:
            out[u][e] = [v, x]
        elif x < 0:
            out[v][e] = [u, -x]
    top = g.is_top
    packing, amounts = PathPacking(), []
    for s in g.bottom.tolist():
        while out[s]:
            path, pedges = [s], []
            pos = {s: 0}
            u = s
            while not top[u]:
                e, (v, _) = next(iter(out[u].items()))
                if v in pos:
                    i = pos[v]
                    cyc = pedges[i:] + [e]
                    f = min(out[_tail(g, c, out)][c][1] for c in cyc)
                    for c in cyc:
                        _consume(g, out, c, f)
                    for w in path[i + 1:]:
                        del pos[w]
                    del path[i + 1:]
                    del pedges[i:]
                    u = v
                    continue
                pedges.append(e)
                path.append(v)
                pos[v] = len(path) - 1
                u = v
            f = min(out[_tail(g, c, out)][c][1] for c in pedges)
            for c in pedges:
                _consume(g, out, c, f)
            packing.vertices.append(path)
            packing.edges.append(pedges)
            amounts.append(f)
    return packing, amounts


def _tail(g, e, out):
    u, v = g.edges[e]
    return int(u) if e in out[u] else int(v)


def _consume(g, out, e, f):
    t = _tail(g, e, out)
    rec = out[t][e]
    rec[1] -= f
    if rec[1] <= 0:
        del out[t][e]


def count_disjoint_open_paths(g: LatticeGraph, field_: CapacityField) -> tuple[int, PathPacking]:
    if not field_.is_binary:
        raise TypeError("disjoint open paths need a 0/1 capacity field")
    res = max_flow(g, field_)
    packing, amounts = _decompose(g, res.stream.net())
    assert all(a == 1 for a in amounts) and len(packing) == res.value
    return int(res.value), packing


def validate_packing(g: LatticeGraph, field_: CapacityField, packing: PathPacking) -> bool:
    """Independent check: open, bottom-to-top, pairwise edge-disjoint."""
    used = set()
    for verts, edges in zip(packing.vertices, packing.edges):
        if len(verts) != len(edges) + 1 or not edges:
            return False
        if not g.is_bottom[verts[0]] or not g.is_top[verts[-1]]:
            return False
        for x, y, e in zip(verts, verts[1:], edges):
            if {int(a) for a in g.edges[e]} != {x, y} or field_.values[e] != 1:
                return False
            if e in used:
                return False
            used.add(e)
    return True


# -- exhaustive oracles ------------------------------------------------------

def brute_force_min_cut(g: LatticeGraph, field_: CapacityField, method: str = "partition"):
    """Minimum of ``V(E)`` over separating edge sets, by exhaustion.

    ``"subsets"`` scans every edge subset (at most 16 edges).  ``"partition"``
    scans every vertex set ``S`` holding the bottom face and missing the top
    face and takes the edge boundary of ``S`` (at most 25 edges); each
    separating set contains such a boundary, so both minima agree.
    """
    caps, _ = _as_numbers(field_)
    if g.n_edges > 25:
        raise OracleSizeError(f"{g.n_edges} edges exceeds the oracle limit of 25")
    if method == "subsets":
        if g.n_edges > 16:
            raise OracleSizeError(f"{g.n_edges} edges exceeds the subset-scan limit of 16")
        best = None
        for mask in range(1 << g.n_edges):
            E = [e for e in range(g.n_edges) if mask >> e & 1]
            val = sum((caps[e] for e in E), 0)
            if best is not None and val >= best:
                continue
            if is_separating(E, g):
                best = val
        return best
    if method != "partition":
        raise ValueError(f"unknown method {method!r}")
    free = np.flatnonzero(~(g.is_bottom | g.is_top)).tolist()
    edges = g.edges.tolist()
    best = None
    for mask in range(1 << len(free)):
        side = g.is_bottom.copy()
        for i, w in enumerate(free):
            if mask >> i & 1:
                side[w] = True
        val = sum((c for (u, v), c in zip(edges, caps) if side[u] != side[v]), 0)
        if best is None or val < best:
            best = val
    return best


def _clean_paths(g: LatticeGraph, open_mask) -> list[tuple[int, int]]:
    """Open simple paths that touch the bottom only at their start and the top
    only at their end, as ``(first edge, edge bitmask)``."""
    adj = g.adjacency
    paths = []
    for s in g.bottom.tolist():
        stack = [(s, 0, {s}, None)]
        while stack:
            u, mask, seen, first = stack.pop()
            for v, e in adj[u]:
                if not open_mask[e] or v in seen or g.is_bottom[v]:
                    continue
                m2 = mask | (1 << e)
                f2 = e if first is None else first
                if g.is_top[v]:
                    paths.append((f2, m2))
                else:
                    stack.append((v, m2, seen | {v}, f2))
    return paths


def brute_force_packing(g: LatticeGraph, field_: CapacityField, limit: int = 24) -> int:
    """Largest set of edge-disjoint open bottom-to-top paths, by backtracking."""
    if g.n_edges > limit:
        raise OracleSizeError(f"{g.n_edges} edges exceeds the packing-oracle limit of {limit}")
    open_mask = field_.values == 1
    groups: dict[int, list[int]] = {}
    for first, mask in _clean_paths(g, open_mask):
        groups.setdefault(first, []).append(mask)
    # each clean path leaves the bottom face through a distinct first edge
    buckets = [sorted(set(v)) for _, v in sorted(groups.items())]
    best = 0

    def search(i, used, count):
        nonlocal best
        if count + len(buckets) - i <= best:
            return
        if i == len(buckets):
            best = count
            return
        for p in buckets[i]:
            if not p & used:
                search(i + 1, used | p, count + 1)
        search(i + 1, used, count)

    search(0, 0, 0)
    return best
