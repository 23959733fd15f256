"""Heavy-ball excision: splitting a graph into a bounded-degree bulk and a
union of induced balls around heavy vertices, plus certification utilities.

A vertex v is r-heavy when its radius-r ball (induced subgraph, counted by
vertices, v included) exceeds D^r vertices with D = d(1+epsilon). The radius
assigned to v is one past its largest heavy radius, so v is L-light for every
L >= ell(v). The union H of induced balls B_{ell(v)}(v) is removed edgewise;
what remains is the bulk.

Scaling note: exact per-vertex BFS everywhere would be quadratic in ball
volume. All heavy-ball searches here are screened by walk-count upper bounds
W_r = 1 + sum_{u ~ v} W_{r-1}(u) >= |B_r(v)|, which are exact at r = 1 and
sound by induction, so exact BFS only runs on the few vertices the screen
cannot rule out.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.csgraph as csgraph

from . import kernels
from .graphs import Graph, ComponentReport, ball, connected_components


class EpsilonValidityWarning(UserWarning):
    """Raised when epsilon is below the regime the structural guarantees assume."""


def _epsilon_floor(d: float) -> float:
    return 1500.0 * ((100.0 + np.log(d)) / d) ** (1.0 / 3.0)


def _warn_epsilon(d: float, epsilon: float) -> None:
    floor = _epsilon_floor(d)
    if epsilon < floor:
        warnings.warn(
            f"epsilon={epsilon:g} is below the asymptotic validity floor "
            f"{floor:.4g} for d={d:g}; structural guarantees are heuristic "
            "at this scale",
            EpsilonValidityWarning,
            stacklevel=3,
        )


def _component_sizes_per_vertex(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    ncomp, labels = csgraph.connected_components(g.adjacency(weighted=False),
                                                 directed=False)
    sizes = np.bincount(labels, minlength=ncomp)
    return labels.astype(np.int64), sizes[labels].astype(np.int64)


def compute_heaviness_radii(g: Graph, d: float, epsilon: float) -> np.ndarray:
    """Per-vertex heaviness radius ell(v).

    ell(v) is the least ell such that |B_L(v)| <= (d(1+epsilon))^L for every
    L >= ell. Lightness is automatic once (d(1+epsilon))^L reaches the size
    of v's component, which caps the search.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if d < 1:
        raise ValueError("d must be at least 1")
    _warn_epsilon(d, epsilon)
    D = d * (1.0 + epsilon)
    n = g.n
    heavy_level = np.zeros(n, dtype=np.int64)
    if n == 0 or g.m == 0:
        return heavy_level

    _, comp_size = _component_sizes_per_vertex(g)
    deg = g.degrees.astype(np.int64)

    # r = 1 is exact: |B_1(v)| = 1 + deg(v).
    b1 = 1 + deg
    heavy_level[b1 > D] = 1

    adj = g.adjacency(weighted=False)
    W = np.minimum(b1, comp_size).astype(np.float64)
    max_comp = int(comp_size.max())
    r = 2
    while float(D) ** r < max_comp:
        W = 1.0 + adj @ W
        np.minimum(W, comp_size, out=W)
        cand = np.flatnonzero((W > float(D) ** r) & (comp_size > float(D) ** r))
        if cand.size:
            sizes = kernels.ball_sizes_batch(g.indptr, g.indices, cand, r)
            exact_r = sizes[:, r]
            W[cand] = exact_r  # exact value is itself a valid upper bound
            heavy = cand[exact_r > float(D) ** r]
            heavy_level[heavy] = r
        r += 1
    return heavy_level + (heavy_level > 0)


@dataclass(frozen=True)
class ExcisionResult:
    """Edge partition of a graph into near-forest part H and bulk B."""

    graph: Graph
    ell: np.ndarray
    near_forest: Graph
    bulk: Graph
    boundary: np.ndarray
    epsilon: float
    d: float

    @property
    def D(self) -> float:
        return self.d * (1.0 + self.epsilon)


def excise(g: Graph, d: float, epsilon: float) -> ExcisionResult:
    """Remove the union of induced heavy balls from g.

    H is the union of induced balls B_{ell(v)}(v); the bulk keeps the
    remaining edges on the full vertex set. The two edge sets partition E(g)
    exactly, and every bulk degree is at most d(1+epsilon) by construction
    (a violation would make the vertex 1-heavy, sending its edges to H);
    that bound is still verified on every call.
    """
    ell = compute_heaviness_radii(g, d, epsilon)
    edge_mark = np.zeros(g.m, dtype=bool)
    heavy = np.flatnonzero(ell > 0)
    if heavy.size:
        kernels.mark_ball_edges(g.indptr, g.indices, g.arc_edge,
                                heavy, ell[heavy], edge_mark)
    near_forest = g.edge_subgraph(edge_mark)
    bulk = g.edge_subgraph(~edge_mark)
    deg_b = bulk.degrees
    D = d * (1.0 + epsilon)
    if np.any(deg_b > D):
        v = int(np.argmax(deg_b))
        raise AssertionError(f"bulk degree {int(deg_b[v])} at vertex {v} exceeds {D}")
    boundary = np.flatnonzero((deg_b > 0) & (near_forest.degrees > 0))
    return ExcisionResult(g, ell, near_forest, bulk, boundary, float(epsilon), float(d))


@dataclass(frozen=True)
class NearForestReport:
    components: tuple[tuple[int, int, int], ...]  # (size, edges, excess) for components with edges
    isolated: int
    max_excess: int

    @property
    def passed(self) -> bool:
        return self.max_excess <= 1


def verify_near_forest(h: Graph) -> NearForestReport:
    """Check that every connected component has tree-excess at most one."""
    report = connected_components(h)
    rows = []
    isolated = 0
    max_excess = 0
    for comp in report.components:
        if comp.n_edges == 0:
            isolated += 1
            continue
        rows.append((comp.n_vertices, comp.n_edges, comp.excess))
        max_excess = max(max_excess, comp.excess)
    return NearForestReport(tuple(rows), isolated, max_excess)


@dataclass(frozen=True)
class PseudorandomCertificate:
    """Outcome of the two ball-growth conditions against (delta, D).

    Condition 1: |B_r(u)| <= D^{r-1} delta for all u and r >= 1.
    Condition 2: at most D^r vertices of the marked set within distance r,
    for all u and r >= 0.
    """

    delta: float
    D: float
    violations: tuple[tuple, ...]  # (vertex, radius, observed, bound, which)
    checked_vertices: int

    @property
    def valid(self) -> bool:
        return len(self.violations) == 0


def _walk_bound_rounds(g: Graph, seed_vec: np.ndarray, add_self: bool):
    """Generator of successive walk-count upper bounds.

    Yields (r, W_r) for r = 1, 2, ... where W_r bounds |B_r| when seeded with
    1 + deg (add_self=True) or the marked-count within distance r when seeded
    with the mark indicator (add_self=False adds the vertex's own indicator).
    """
    adj = g.adjacency(weighted=False)
    W = seed_vec.astype(np.float64)
    r = 1
    while True:
        yield r, W
        W = (1.0 if add_self else 0.0) + adj @ W + (0.0 if add_self else seed_vec)
        r += 1


def verify_pseudorandom(h: Graph, boundary: np.ndarray, delta: float, D: float,
                        max_violations: int = 1000) -> PseudorandomCertificate:
    """Certify ball growth |B_r| <= D^{r-1} delta and marked-set density <= D^r.

    Only vertices with at least one edge are scanned; isolated vertices
    satisfy both conditions whenever delta >= 1 (enforced). Walk-count
    screens keep the exact BFS work restricted to vertices the bounds
    cannot clear.
    """
    if delta < 1:
        raise ValueError("delta must be at least 1")
    if D <= 1:
        raise ValueError("D must exceed 1")
    s_mask = np.zeros(h.n, dtype=bool)
    boundary = np.asarray(boundary, dtype=np.int64)
    s_mask[boundary] = True

    violations: list[tuple] = []
    active = np.flatnonzero(h.degrees > 0)
    # r = 0 marked-set condition: |S cap B_0| <= 1 = D^0, always true.
    if active.size == 0:
        return PseudorandomCertificate(float(delta), float(D), (), 0)

    labels, comp_size = _component_sizes_per_vertex(h)
    s_per_comp = np.bincount(labels[s_mask], minlength=int(labels.max()) + 1)
    s_in_comp = s_per_comp[labels]

    adj = h.adjacency(weighted=False)
    deg = h.degrees.astype(np.int64)
    W = np.minimum(1 + deg, comp_size).astype(np.float64)
    s_vec = s_mask.astype(np.float64)
    WS = np.minimum(s_vec + adj @ s_vec, s_in_comp)

    max_comp = int(comp_size.max())
    max_s = int(s_in_comp.max())
    need: dict[int, int] = {}

    # A ball can only violate while the bound is below the best a priori cap
    # (component size, marked count in component); both bounds grow
    # geometrically, so this loop is short.
    r = 1
    while True:
        size_bound = delta * float(D) ** (r - 1)
        s_bound = float(D) ** r
        size_open = size_bound < max_comp
        s_open = s_bound < max_s
        if not (size_open or s_open):
            break
        over = np.zeros(h.n, dtype=bool)
        if size_open:
            over |= W > size_bound
        if s_open:
            over |= WS > s_bound
        for v in np.flatnonzero(over):
            need[int(v)] = r
        W = np.minimum(1.0 + adj @ W, comp_size)
        WS = np.minimum(adj @ WS + s_vec, s_in_comp)
        r += 1

    if need:
        verts = np.array(sorted(need), dtype=np.int64)
        rmax = max(need.values())
        sizes, counts = kernels.ball_profile_batch(h.indptr, h.indices, verts, rmax, s_mask)
        for i, v in enumerate(verts):
            for rr in range(1, rmax + 1):
                b = delta * float(D) ** (rr - 1)
                if sizes[i, rr] > b:
                    violations.append((int(v), rr, int(sizes[i, rr]), b, "ball"))
                sb = float(D) ** rr
                if counts[i, rr] > sb:
                    violations.append((int(v), rr, int(counts[i, rr]), sb, "marked"))
                if len(violations) >= max_violations:
                    break
            if len(violations) >= max_violations:
                break
    return PseudorandomCertificate(float(delta), float(D), tuple(violations), int(active.size))


def observed_delta(h: Graph, D: float) -> tuple[float, int, int]:
    """Max over vertices and radii r >= 1 of |B_r(v)| / D^{r-1}.

    Returns (delta, argmax vertex, argmax radius). An edgeless graph reports
    delta 1 at radius 1 (every ball is the vertex itself).
    """
    if D <= 1:
        raise ValueError("D must exceed 1")
    if h.n == 0:
        return 1.0, -1, 1
    deg = h.degrees.astype(np.int64)
    best = float(1 + deg.max()) if h.n else 1.0
    best_v = int(np.argmax(deg))
    best_r = 1
    if h.m == 0:
        return 1.0, best_v, 1

    labels, comp_size = _component_sizes_per_vertex(h)
    max_comp = int(comp_size.max())
    adj = h.adjacency(weighted=False)
    W = np.minimum(1 + deg, comp_size).astype(np.float64)
    r = 2
    while float(D) ** (r - 1) < max_comp / best:
        W = np.minimum(1.0 + adj @ W, comp_size)
        threshold = best * float(D) ** (r - 1)
        cand = np.flatnonzero((W > threshold) & (comp_size > threshold))
        if cand.size:
            sizes = kernels.ball_sizes_batch(h.indptr, h.indices, cand, r)
            W[cand] = sizes[:, r]
            for i, v in enumerate(cand):
                for rr in range(1, r + 1):
                    ratio = sizes[i, rr] / float(D) ** (rr - 1)
                    if ratio > best:
                        best, best_v, best_r = float(ratio), int(v), rr
        r += 1
    return best, best_v, best_r


@dataclass(frozen=True)
class ClusterGraph:
    """Heavy vertices as nodes; an edge when their assigned balls intersect."""

    nodes: np.ndarray        # original vertex ids with ell > 0
    node_weight: np.ndarray  # (1+epsilon)^ell
    edge_a: np.ndarray       # indices into ``nodes``
    edge_b: np.ndarray
    edge_weight: np.ndarray  # ell(u) + ell(v)

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edge_a.shape[0])


def build_cluster_graph(g: Graph, excision: ExcisionResult) -> ClusterGraph:
    """Intersection structure of the excised balls.

    Nodes are vertices with positive radius; two nodes join when their
    induced balls share a vertex, detected by co-membership over cached
    ball vertex lists.
    """
    ell = excision.ell
    heavy = np.flatnonzero(ell > 0).astype(np.int64)
    eps = excision.epsilon
    node_weight = (1.0 + eps) ** ell[heavy]
    if heavy.size == 0:
        z = np.empty(0, dtype=np.int64)
        return ClusterGraph(heavy, node_weight, z, z, np.empty(0, dtype=np.float64))

    # membership[w] = list of heavy-node indices whose ball contains w
    members: list[tuple[np.ndarray, int]] = []
    for idx, v in enumerate(heavy):
        verts, _ = ball(g, int(v), int(ell[v]))
        members.append((verts, idx))
    owner_vertex = np.concatenate([verts for verts, _ in members])
    owner_node = np.concatenate([np.full(verts.shape[0], idx, dtype=np.int64)
                                 for verts, idx in members])
    order = np.argsort(owner_vertex, kind="stable")
    owner_vertex = owner_vertex[order]
    owner_node = owner_node[order]
    # Expand co-membership pairs within each run of equal vertex.
    run_starts = np.flatnonzero(np.r_[True, owner_vertex[1:] != owner_vertex[:-1]])
    run_ends = np.r_[run_starts[1:], owner_vertex.shape[0]]
    pair_a = []
    pair_b = []
    for s, e in zip(run_starts, run_ends):
        k = e - s
        if k < 2:
            continue
        grp = owner_node[s:e]
        ia, ib = np.triu_indices(k, 1)
        pair_a.append(grp[ia])
        pair_b.append(grp[ib])
    if pair_a:
        a = np.concatenate(pair_a)
        b = np.concatenate(pair_b)
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        keys = np.unique(lo * heavy.size + hi)
        ea = (keys // heavy.size).astype(np.int64)
        eb = (keys % heavy.size).astype(np.int64)
    else:
        ea = np.empty(0, dtype=np.int64)
        eb = np.empty(0, dtype=np.int64)
    ew = (ell[heavy[ea]] + ell[heavy[eb]]).astype(np.float64)
    return ClusterGraph(heavy, node_weight, ea, eb, ew)


def _two_sweep_diameter(g: Graph, comp_vertices: np.ndarray) -> int:
    """Double-BFS diameter estimate (exact on trees, lower bound in general)."""
    if comp_vertices.shape[0] <= 1:
        return 0
    start = int(comp_vertices[0])
    verts, dists = ball(g, start, g.n)
    far = int(verts[np.argmax(dists)])
    _, dists2 = ball(g, far, g.n)
    return int(dists2.max())


@dataclass(frozen=True)
class ComponentStats:
    components: tuple[tuple[int, int, int, int], ...]  # (size, edges, excess, diameter)
    max_size: int
    sum_sq_nontrivial: int
    weighted_cluster_diameter: float


def component_stats(h: Graph, cluster: ClusterGraph) -> ComponentStats:
    """Per-component size/excess/diameter plus cluster-path statistics.

    Diameters use the two-sweep heuristic (exact on trees). The weighted
    cluster diameter is a two-sweep shortest-path estimate over the cluster
    graph with edge weights ell(u) + ell(v).
    """
    report = connected_components(h)
    rows = []
    max_size = 0
    ssq = 0
    for comp in report.components:
        if comp.n_vertices > 1:
            ssq += comp.n_vertices ** 2
        if comp.n_edges == 0:
            continue
        diam = _two_sweep_diameter(h, comp.vertices)
        rows.append((comp.n_vertices, comp.n_edges, comp.excess, diam))
        max_size = max(max_size, comp.n_vertices)

    wdiam = 0.0
    if cluster.n_nodes:
        import scipy.sparse as sp
        k = cluster.n_nodes
        if cluster.n_edges:
            data = np.concatenate([cluster.edge_weight, cluster.edge_weight])
            rows_ = np.concatenate([cluster.edge_a, cluster.edge_b])
            cols_ = np.concatenate([cluster.edge_b, cluster.edge_a])
            adj = sp.csr_matrix((data, (rows_, cols_)), shape=(k, k))
            dist0 = csgraph.dijkstra(adj, indices=0)
            finite = np.isfinite(dist0)
            far = int(np.argmax(np.where(finite, dist0, -1.0)))
            dist1 = csgraph.dijkstra(adj, indices=far)
            wdiam = float(np.max(dist1[np.isfinite(dist1)]))
    return ComponentStats(tuple(rows), int(max_size), int(ssq), wdiam)
