"""Cylinder graphs on Z^d, plaquettes and diamond connectivity, cut predicates.

Vertices of a box are indexed in C (lexicographic) order of their
coordinates.  Edges are stored with their lexicographically smaller endpoint
first and are sorted lexicographically by ``(u, v)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class InvalidSpecError(ValueError):
    pass


Coord = tuple[int, ...]
Edge = tuple[Coord, Coord]


@dataclass(frozen=True)
class CylinderSpec:
    """The box ``[0,k_1] x ... x [0,k_{d-1}] x [0,m]``."""

    d: int
    k: tuple[int, ...]
    m: int

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(x) for x in self.k))
        if self.d < 2:
            raise InvalidSpecError(f"dimension must be >= 2, got d={self.d}")
        if len(self.k) != self.d - 1:
            raise InvalidSpecError(f"k needs d-1={self.d - 1} sides, got {len(self.k)}")
        if any(x < 1 for x in self.k):
            raise InvalidSpecError(f"all sides must be >= 1, got k={self.k}")
        if self.m < 1:
            raise InvalidSpecError(f"height must be >= 1, got m={self.m}")

    @classmethod
    def cube(cls, d: int, n: int, h: int) -> "CylinderSpec":
        return cls(d, (n,) * (d - 1), h)

    def to_dict(self) -> dict:
        return {"d": self.d, "k": list(self.k), "m": self.m}


class LatticeGraph:
    """Nearest-neighbour graph of the integer points of the box ``[lo, hi]``.

    The last axis is the vertical one: the bottom face is ``x_d = lo_d`` and
    the top face is ``x_d = hi_d``.
    """

    def __init__(self, lo: Sequence[int], hi: Sequence[int], spec: CylinderSpec | None = None):
        self.lo = tuple(int(x) for x in lo)
        self.hi = tuple(int(x) for x in hi)
        self.d = len(self.lo)
        if self.d < 2 or len(self.hi) != self.d:
            raise InvalidSpecError("box needs matching lo/hi of dimension >= 2")
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise InvalidSpecError(f"empty box lo={self.lo} hi={self.hi}")
        self.spec = spec
        self.shape = tuple(h - l + 1 for l, h in zip(self.lo, self.hi))
        self.n_vertices = int(np.prod(self.shape))

        grids = np.indices(self.shape).reshape(self.d, -1).T
        self.coords = grids + np.asarray(self.lo)
        ids = np.arange(self.n_vertices).reshape(self.shape)

        us, vs, axes = [], [], []
        for a in range(self.d):
            lower = [slice(None)] * self.d
            upper = [slice(None)] * self.d
            lower[a] = slice(0, -1)
            upper[a] = slice(1, None)
            us.append(ids[tuple(lower)].ravel())
            vs.append(ids[tuple(upper)].ravel())
            axes.append(np.full(us[-1].size, a))
        u = np.concatenate(us)
        v = np.concatenate(vs)
        ax = np.concatenate(axes)
        order = np.lexsort((v, u))
        self.edges = np.stack([u[order], v[order]], axis=1)
        self.edge_axis = ax[order]
        self.n_edges = len(self.edges)

        # edge index laid out on the grid of lower endpoints, one array per axis
        rank = np.empty(self.n_edges, dtype=np.int64)
        rank[order] = np.arange(self.n_edges)
        self.axis_edges = []
        start = 0
        for a in range(self.d):
            shp = list(self.shape)
            shp[a] -= 1
            cnt = us[a].size
            self.axis_edges.append(rank[start:start + cnt].reshape(shp))
            start += cnt

        last = self.coords[:, -1]
        self.bottom = np.flatnonzero(last == self.lo[-1])
        self.top = np.flatnonzero(last == self.hi[-1])
        self.is_bottom = last == self.lo[-1]
        self.is_top = last == self.hi[-1]

    def __repr__(self):
        return f"LatticeGraph(lo={self.lo}, hi={self.hi})"

    def vertex_index(self, x: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(np.subtract(x, self.lo)), self.shape))

    def contains(self, x: Sequence[int]) -> bool:
        return all(l <= c <= h for c, l, h in zip(x, self.lo, self.hi))

    def edge_index(self, x: Sequence[int], y: Sequence[int]) -> int:
        x, y = tuple(x), tuple(y)
        if x > y:
            x, y = y, x
        diff = np.subtract(y, x)
        if np.abs(diff).sum() != 1 or not (self.contains(x) and self.contains(y)):
            raise KeyError(f"no edge {x}-{y} in {self!r}")
        a = int(np.flatnonzero(diff)[0])
        return int(self.axis_edges[a][tuple(np.subtract(x, self.lo))])

    def edge_coords(self, e: int) -> Edge:
        u, v = self.edges[e]
        return tuple(int(c) for c in self.coords[u]), tuple(int(c) for c in self.coords[v])

    def edge_set(self, indices: Iterable[int]) -> list[Edge]:
        return [self.edge_coords(int(e)) for e in indices]

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per vertex, the list of ``(neighbour, edge index)`` pairs."""
        adj = [[] for _ in range(self.n_vertices)]
        for e, (u, v) in enumerate(self.edges.tolist()):
            adj[u].append((v, e))
            adj[v].append((u, e))
        return adj

    def axis_values(self, values: np.ndarray) -> list[np.ndarray]:
        """Rearrange a per-edge array into one grid-shaped array per axis."""
        values = np.asarray(values)
        return [values[idx] for idx in self.axis_edges]

    def to_json(self) -> str:
        return json.dumps({
            "spec": self.spec.to_dict() if self.spec else None,
            "lo": list(self.lo),
            "hi": list(self.hi),
            "vertices": self.coords.tolist(),
            "edges": self.edges.tolist(),
            "bottom": self.bottom.tolist(),
            "top": self.top.tolist(),
        })


def build_cylinder(spec: CylinderSpec) -> LatticeGraph:
    return LatticeGraph((0,) * spec.d, tuple(spec.k) + (spec.m,), spec=spec)


def expected_counts(lo: Sequence[int], hi: Sequence[int]) -> tuple[int, int]:
    """Closed-form vertex and edge counts of a box."""
    shape = [h - l + 1 for l, h in zip(lo, hi)]
    nv = int(np.prod(shape))
    ne = sum(nv // s * (s - 1) for s in shape)
    return nv, ne


# -- plaquettes --------------------------------------------------------------

@dataclass(frozen=True)
class Plaquette:
    """Unit (d-1)-cube crossing an edge at its midpoint.

    Coordinates are kept doubled so that every corner is an integer:
    ``center2`` is twice the midpoint and ``axis`` (0-based) is the
    direction of the edge, normal to the plaquette.
    """

    center2: Coord
    axis: int

    @property
    def center(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(c, 2) for c in self.center2)

    def intervals2(self) -> list[tuple[int, int]]:
        return [(c, c) if i == self.axis else (c - 1, c + 1) for i, c in enumerate(self.center2)]

    def intervals(self) -> list[tuple[Fraction, Fraction]]:
        return [(Fraction(a, 2), Fraction(b, 2)) for a, b in self.intervals2()]

    def intersects(self, other: "Plaquette") -> bool:
        return all(a1 <= b2 and a2 <= b1
                   for (a1, b1), (a2, b2) in zip(self.intervals2(), other.intervals2()))


def _check_edge(e: Edge) -> tuple[Coord, Coord, int]:
    x, y = tuple(e[0]), tuple(e[1])
    diff = [b - a for a, b in zip(x, y)]
    nz = [i for i, t in enumerate(diff) if t]
    if len(nz) != 1 or abs(diff[nz[0]]) != 1:
        raise ValueError(f"{x}-{y} is not a nearest-neighbour edge")
    return x, y, nz[0]


def plaquette_of(e: Edge) -> Plaquette:
    x, y, a = _check_edge(e)
    return Plaquette(tuple(p + q for p, q in zip(x, y)), a)


def diamond_adjacent(e1: Edge, e2: Edge) -> bool:
    return plaquette_of(e1).intersects(plaquette_of(e2))


def edge_key(e: Edge) -> tuple[Coord, int]:
    """Canonical ``(lower endpoint, axis)`` form of an edge of Z^d."""
    x, y, a = _check_edge(e)
    return (min(x, y), a)


def key_edge(key: tuple[Coord, int]) -> Edge:
    x, a = key
    y = list(x)
    y[a] += 1
    return x, tuple(y)


def diamond_neighbors(key: tuple[Coord, int]) -> list[tuple[Coord, int]]:
    """All edges of Z^d other than ``key`` whose plaquette meets its plaquette."""
    x, a = key
    d = len(x)
    p = plaquette_of(key_edge(key))
    out = []
    # plaquette centres are within L-inf distance 1 of each other
    for off in np.ndindex(*(3,) * d):
        w = tuple(xi + o - 1 for xi, o in zip(x, off))
        for b in range(d):
            if (w, b) == key:
                continue
            if p.intersects(plaquette_of(key_edge((w, b)))):
                out.append((w, b))
    return out


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x: int, y: int) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        self.parent[max(rx, ry)] = min(rx, ry)
        return True


def diamond_connected(edges: Iterable[Edge]) -> bool:
    """Whether the edges form a single component under diamond adjacency."""
    edges = list(edges)
    if not edges:
        raise ValueError("diamond connectivity of an empty edge set is undefined")
    plaq = [plaquette_of(e) for e in edges]
    c = np.array([p.center2 for p in plaq])
    ax = np.array([p.axis for p in plaq])
    d = c.shape[1]
    radius = np.ones((len(plaq), d), dtype=int)
    radius[np.arange(len(plaq)), ax] = 0
    gap = np.abs(c[:, None, :] - c[None, :, :])
    touch = (gap <= radius[:, None, :] + radius[None, :, :]).all(axis=2)
    uf = UnionFind(len(plaq))
    n_comp = len(plaq)
    for i, j in zip(*np.nonzero(np.triu(touch, 1))):
        if uf.union(int(i), int(j)):
            n_comp -= 1
    return n_comp == 1


# -- cut predicates ----------------------------------------------------------

def is_separating(E: Iterable[int], g: LatticeGraph) -> bool:
    """True iff no path from the bottom face to the top face avoids ``E``."""
    keep = np.ones(g.n_edges, dtype=bool)
    idx = np.fromiter((int(e) for e in E), dtype=np.int64)
    keep[idx] = False
    u, v = g.edges[keep, 0], g.edges[keep, 1]
    adj = coo_matrix((np.ones(u.size, dtype=np.int8), (u, v)), shape=(g.n_vertices,) * 2)
    _, labels = connected_components(adj, directed=False)
    return not np.intersect1d(labels[g.bottom], labels[g.top]).size


def is_cut(E: Iterable[int], g: LatticeGraph) -> bool:
    """Separating and minimal under inclusion."""
    E = sorted(set(int(e) for e in E))
    if not is_separating(E, g):
        return False
    return all(not is_separating(E[:i] + E[i + 1:], g) for i in range(len(E)))
