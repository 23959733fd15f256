"""Immutable sparse undirected graphs and neighborhood primitives.

A :class:`Graph` stores each edge once in canonical (u < v) order plus a
compressed sparse adjacency with both directed arcs, so edge-subset
operations and O(deg) iteration are both cheap. Instances are frozen after
construction and safe for concurrent shared reads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected weighted graph, no self-loops, no parallel edges."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    arc_weights: np.ndarray
    arc_edge: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray

    @property
    def m(self) -> int:
        return int(self.edge_u.shape[0])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def neighbor_weights(self, v: int) -> np.ndarray:
        return self.arc_weights[self.indptr[v]:self.indptr[v + 1]]

    @property
    def has_unit_weights(self) -> bool:
        return bool(np.all(self.edge_w == 1.0))

    def adjacency(self, weighted: bool = True) -> sp.csr_matrix:
        data = self.arc_weights if weighted else np.ones_like(self.arc_weights)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()),
                             shape=(self.n, self.n))

    def with_edge_weights(self, w: np.ndarray) -> "Graph":
        """Same topology, new per-edge weights (canonical edge order)."""
        w = np.asarray(w, dtype=np.float64)
        if w.shape != self.edge_w.shape:
            raise ValueError("weight array shape mismatch")
        if not np.all(np.isfinite(w)) or np.any(w == 0.0):
            raise ValueError("edge weights must be finite and nonzero")
        return Graph(self.n, self.indptr, self.indices,
                     _freeze(w[self.arc_edge]), self.arc_edge,
                     self.edge_u, self.edge_v, _freeze(w))

    def scaled(self, factor: float) -> "Graph":
        return self.with_edge_weights(self.edge_w * float(factor))

    def edge_subgraph(self, mask: np.ndarray) -> "Graph":
        """Graph on the same vertex set keeping only edges where mask is True."""
        mask = np.asarray(mask, dtype=bool)
        return from_edge_arrays(self.n, self.edge_u[mask], self.edge_v[mask],
                                self.edge_w[mask], validate=False)

    def induced_subgraph(self, vertices: np.ndarray) -> tuple["Graph", np.ndarray]:
        """Subgraph induced on ``vertices``, relabeled 0..k-1.

        Returns (subgraph, vertices) with vertices sorted; position in the
        array is the new label.
        """
        vertices = np.unique(np.asarray(vertices, dtype=np.int64))
        lookup = np.full(self.n, -1, dtype=np.int64)
        lookup[vertices] = np.arange(vertices.shape[0])
        keep = (lookup[self.edge_u] >= 0) & (lookup[self.edge_v] >= 0)
        g = from_edge_arrays(vertices.shape[0],
                             lookup[self.edge_u[keep]], lookup[self.edge_v[keep]],
                             self.edge_w[keep], validate=False)
        return g, vertices


def from_edge_arrays(n: int, u, v, w=None, validate: bool = True) -> Graph:
    """Build a Graph from parallel edge arrays.

    Rejects self-loops, duplicate edges (in either orientation), out-of-range
    endpoints, and non-finite or zero weights.
    """
    u = np.asarray(u, dtype=np.int64).ravel()
    v = np.asarray(v, dtype=np.int64).ravel()
    if w is None:
        w = np.ones(u.shape[0], dtype=np.float64)
    w = np.asarray(w, dtype=np.float64).ravel()
    if not (u.shape == v.shape == w.shape):
        raise ValueError("edge arrays must have equal length")
    n = int(n)
    if n < 0:
        raise ValueError("vertex count must be nonnegative")
    if validate:
        if u.size and (u.min() < 0 or v.min() < 0 or max(u.max(), v.max()) >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(u == v):
            raise ValueError("self-loops are not allowed")
        if not np.all(np.isfinite(w)) or np.any(w == 0.0):
            raise ValueError("edge weights must be finite and nonzero")

    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    order = np.lexsort((hi, lo))
    lo, hi, w = lo[order], hi[order], w[order]
    if validate and lo.size > 1:
        dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
        if np.any(dup):
            k = int(np.flatnonzero(dup)[0])
            raise ValueError(f"duplicate edge ({lo[k]}, {hi[k]})")

    m = lo.shape[0]
    src = np.concatenate([lo, hi])
    dst = np.concatenate([hi, lo])
    arc_w = np.concatenate([w, w])
    arc_e = np.concatenate([np.arange(m, dtype=np.int64)] * 2)
    arc_order = np.lexsort((dst, src))
    src, dst, arc_w, arc_e = src[arc_order], dst[arc_order], arc_w[arc_order], arc_e[arc_order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return Graph(n, _freeze(indptr), _freeze(dst), _freeze(arc_w), _freeze(arc_e),
                 _freeze(lo), _freeze(hi), _freeze(w))


def from_edges(n: int, edges: Iterable[tuple]) -> Graph:
    """Build a Graph from an iterable of (u, v) or (u, v, weight) tuples."""
    rows = list(edges)
    if not rows:
        return from_edge_arrays(n, [], [], [])
    if len(rows[0]) == 2:
        u, v = zip(*rows)
        return from_edge_arrays(n, u, v)
    u, v, w = zip(*rows)
    return from_edge_arrays(n, u, v, w)


def empty_graph(n: int) -> Graph:
    return from_edge_arrays(n, [], [], [])


def _frontier_neighbors(g: Graph, frontier: np.ndarray) -> np.ndarray:
    starts = g.indptr[frontier]
    ends = g.indptr[frontier + 1]
    counts = ends - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    # Gather all adjacency slices without a per-vertex Python loop.
    offsets = np.repeat(starts, counts)
    within = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    return g.indices[offsets + within]


def ball(g: Graph, v: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertices within hop distance r of v, with exact distances.

    Returns (vertices, distances), vertices sorted ascending.
    """
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if not (0 <= v < g.n):
        raise ValueError("vertex out of range")
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[v] = 0
    frontier = np.array([v], dtype=np.int64)
    for depth in range(1, r + 1):
        nbrs = _frontier_neighbors(g, frontier)
        if nbrs.size == 0:
            break
        nbrs = np.unique(nbrs)
        new = nbrs[dist[nbrs] < 0]
        if new.size == 0:
            break
        dist[new] = depth
        frontier = new
    verts = np.flatnonzero(dist >= 0)
    return verts, dist[verts]


def distance_matrix(g: Graph, ell: int) -> sp.csr_matrix:
    """Symmetric 0/1 matrix of exact-distance-ell pairs (identity at ell=0)."""
    if ell < 0:
        raise ValueError("distance must be nonnegative")
    if ell == 0:
        return sp.identity(g.n, dtype=np.float64, format="csr")
    rows = []
    cols = []
    for v in range(g.n):
        verts, dists = ball(g, v, ell)
        at = verts[dists == ell]
        rows.append(np.full(at.shape[0], v, dtype=np.int64))
        cols.append(at)
    rows = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.empty(0, dtype=np.int64)
    data = np.ones(rows.shape[0], dtype=np.float64)
    return sp.csr_matrix((data, (rows, cols)), shape=(g.n, g.n))


def distance_matrices(g: Graph, ell_max: int) -> list[sp.csr_matrix]:
    """All exact-distance matrices A^(0)..A^(ell_max) from one BFS sweep.

    One breadth-first pass per vertex serves every level, so this is about
    ell_max times cheaper than repeated :func:`distance_matrix` calls.
    """
    if ell_max < 0:
        raise ValueError("distance must be nonnegative")
    rows = [[] for _ in range(ell_max + 1)]
    cols = [[] for _ in range(ell_max + 1)]
    for v in range(g.n):
        verts, dists = ball(g, v, ell_max)
        for s in range(1, ell_max + 1):
            at = verts[dists == s]
            if at.size:
                rows[s].append(np.full(at.shape[0], v, dtype=np.int64))
                cols[s].append(at)
    out = [sp.identity(g.n, dtype=np.float64, format="csr")]
    for s in range(1, ell_max + 1):
        r = np.concatenate(rows[s]) if rows[s] else np.empty(0, dtype=np.int64)
        c = np.concatenate(cols[s]) if cols[s] else np.empty(0, dtype=np.int64)
        out.append(sp.csr_matrix((np.ones(r.shape[0]), (r, c)),
                                 shape=(g.n, g.n)))
    return out


@dataclass(frozen=True)
class Component:
    vertices: np.ndarray
    n_vertices: int
    n_edges: int

    @property
    def excess(self) -> int:
        """Tree-excess |E| - |V| + 1; zero for trees and isolated vertices."""
        return self.n_edges - self.n_vertices + 1


@dataclass(frozen=True)
class ComponentReport:
    labels: np.ndarray
    components: tuple[Component, ...]

    @property
    def excesses(self) -> np.ndarray:
        return np.array([c.excess for c in self.components], dtype=np.int64)


def connected_components(g: Graph) -> ComponentReport:
    """Vertex partition into connected components with per-component tree-excess."""
    if g.n == 0:
        return ComponentReport(np.empty(0, dtype=np.int64), ())
    ncomp, labels = csgraph.connected_components(g.adjacency(weighted=False),
                                                 directed=False)
    labels = labels.astype(np.int64)
    sizes = np.bincount(labels, minlength=ncomp)
    edge_counts = np.bincount(labels[g.edge_u], minlength=ncomp) if g.m else np.zeros(ncomp, dtype=np.int64)
    order = np.argsort(labels, kind="stable")
    bounds = np.cumsum(sizes)
    comps = []
    start = 0
    for c in range(ncomp):
        verts = order[start:bounds[c]]
        start = bounds[c]
        comps.append(Component(_freeze(np.sort(verts)), int(sizes[c]), int(edge_counts[c])))
    return ComponentReport(_freeze(labels), tuple(comps))


def write_edgelist(g: Graph, path) -> None:
    """Plain text edge list: header ``n m`` then ``u v w`` per line (0-indexed)."""
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v, w in zip(g.edge_u, g.edge_v, g.edge_w):
            fh.write(f"{u} {v} {w:.17g}\n")


def read_edgelist(path) -> Graph:
    """Parse the edge-list format written by :func:`write_edgelist`.

    Rejects self-loops and duplicate edges; round-trips weights exactly for
    values representable in 17 significant digits.
    """
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("edge list header must be 'n m'")
        n, m = int(header[0]), int(header[1])
        u = np.empty(m, dtype=np.int64)
        v = np.empty(m, dtype=np.int64)
        w = np.empty(m, dtype=np.float64)
        for k in range(m):
            parts = fh.readline().split()
            if len(parts) != 3:
                raise ValueError(f"malformed edge line {k + 2}")
            u[k], v[k], w[k] = int(parts[0]), int(parts[1]), float(parts[2])
        if fh.readline().strip():
            raise ValueError("trailing content after declared edge count")
    return from_edge_arrays(n, u, v, w)
