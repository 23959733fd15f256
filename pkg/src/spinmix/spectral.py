"""Bethe Hessian, nonbacktracking operator, and the spectral-norm checks
backing the decomposition pipeline.

All norm estimates use power iteration on the squared operator (restarted,
Rayleigh quotient), so only matvecs are needed; dense eigensolvers appear
only as the small-case path and in matrix square roots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graphs import Graph, ball, connected_components, distance_matrices, distance_matrix
from .generate import CenteredInteraction
from .rng import RngSeed, as_generator


@dataclass(frozen=True)
class SpectralEstimate:
    value: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    bound: float
    passed: bool
    iterations: int = 0
    converged: bool = True
    applicable: bool = True

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "bound": self.bound,
                "pass": bool(self.passed), "iterations": self.iterations,
                "converged": bool(self.converged), "applicable": bool(self.applicable)}


def spectral_radius(matvec, dim: int, seed=None, tol: float = 1e-8,
                    max_iter: int = 5000, restarts: int = 3) -> SpectralEstimate:
    """Largest |eigenvalue| of a symmetric operator.

    Power iteration runs on the squared operator, so eigenvalue sign flips
    cannot stall convergence; three independent random starts guard against
    an unlucky orthogonal initialization.
    """
    if dim == 0:
        return SpectralEstimate(0.0, 0, True)
    gen = as_generator(seed if seed is not None else RngSeed(0x5bec, 0))
    best = 0.0
    total_iters = 0
    all_conv = True
    for _ in range(restarts):
        v = gen.standard_normal(dim)
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        v /= nv
        lam_prev = np.inf
        conv = False
        lam = 0.0
        for it in range(max_iter):
            w = matvec(matvec(v))
            lam = float(v @ w)
            nw = np.linalg.norm(w)
            total_iters += 1
            if nw == 0:
                lam = 0.0
                conv = True
                break
            v = w / nw
            if abs(lam - lam_prev) <= tol * max(abs(lam), 1.0):
                conv = True
                break
            lam_prev = lam
        best = max(best, max(lam, 0.0))
        all_conv = all_conv and conv
    return SpectralEstimate(float(np.sqrt(best)), total_iters, all_conv)


def operator_norm_nonsym(matvec, rmatvec, dim: int, seed=None, tol: float = 1e-8,
                         max_iter: int = 5000, restarts: int = 3) -> SpectralEstimate:
    """Largest singular value via power iteration on A^T A."""
    est = spectral_radius(lambda v: rmatvec(matvec(v)), dim, seed=seed, tol=tol,
                          max_iter=max_iter, restarts=restarts)
    # spectral_radius reports rho(A^T A) = sigma_max^2; undo the square
    return SpectralEstimate(float(np.sqrt(est.value)), est.iterations,
                            est.converged)


def _sym_norm(M, seed=None) -> SpectralEstimate:
    """Spectral norm of a symmetric sparse/dense matrix."""
    dim = M.shape[0]
    if dim == 0:
        return SpectralEstimate(0.0, 0, True)
    if dim <= 500:
        A = M.toarray() if sp.issparse(M) else np.asarray(M)
        val = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (A + A.T)))))
        return SpectralEstimate(val, 0, True)
    return spectral_radius(lambda v: M @ v, dim, seed=seed)


def _op_norm(M, seed=None) -> SpectralEstimate:
    """Largest singular value of a general sparse/dense matrix."""
    dim = M.shape[0]
    if dim == 0:
        return SpectralEstimate(0.0, 0, True)
    if dim <= 500:
        A = M.toarray() if sp.issparse(M) else np.asarray(M)
        return SpectralEstimate(float(np.linalg.norm(A, 2)), 0, True)
    MT = M.T.tocsr() if sp.issparse(M) else M.T
    return operator_norm_nonsym(lambda v: M @ v, lambda v: MT @ v, dim, seed=seed)


def smallest_eigenvalue(M, seed=None) -> float:
    """lambda_min of a symmetric matrix: dense for <= 500 dims, else the
    Gershgorin shift c I - M turns it into a norm computation."""
    dim = M.shape[0]
    if dim == 0:
        return 0.0
    if dim <= 500:
        A = M.toarray() if sp.issparse(M) else np.asarray(M)
        return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])
    A = M.tocsr() if sp.issparse(M) else sp.csr_matrix(M)
    absA = abs(A)
    c = float((absA.sum(axis=1)).max())  # Gershgorin upper bound on |lambda|
    est = spectral_radius(lambda v: c * v - A @ v, dim, seed=seed)
    return c - est.value


@dataclass(frozen=True)
class BetheHessian:
    graph: Graph
    t: float
    matrix: sp.csr_matrix

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


def bethe_hessian(g: Graph, t: float) -> BetheHessian:
    """BH(t) = ((D_G - I) t^2 - t A + I) / (1 - t^2), topology only
    (edge weights are ignored; A is the unweighted adjacency)."""
    if not -1.0 < t < 1.0:
        raise ValueError("t must lie in (-1, 1)")
    n = g.n
    A = g.adjacency(weighted=False).astype(np.float64)
    deg = g.degrees.astype(np.float64)
    denom = 1.0 - t * t
    diag = ((deg - 1.0) * t * t + 1.0) / denom
    M = sp.diags(diag, format="csr") + (-t / denom) * A
    return BetheHessian(g, float(t), M.tocsr())


def bethe_inverse_series_check(tree: Graph, t: float) -> float:
    """Max-abs entry of BH(t) @ (sum_s A^(s) t^s) - I on a tree.

    The distance-matrix series terminates at the diameter, where the inverse
    identity is exact, so the residual is pure floating-point noise.
    """
    for comp in connected_components(tree).components:
        if comp.excess > 0:
            raise ValueError("series truncation is exact only on forests")
    bh = bethe_hessian(tree, t).matrix
    n = tree.n
    # one BFS per vertex builds the whole terminating series row t^dist
    rows, cols, data = [], [], []
    for v in range(n):
        verts, dists = ball(tree, v, n)
        rows.append(np.full(verts.shape[0], v, dtype=np.int64))
        cols.append(verts)
        data.append(t ** dists.astype(np.float64))
    series = sp.csr_matrix((np.concatenate(data),
                            (np.concatenate(rows), np.concatenate(cols))),
                           shape=(n, n))
    resid = bh @ series - sp.identity(n, format="csr")
    if resid.nnz == 0:
        return 0.0
    return float(np.max(np.abs(resid.data)))


@dataclass(frozen=True)
class NonbacktrackingMatrix:
    """2m x 2m arc operator: B[uv, xy] = c(xy) iff v = x and u != y."""

    matrix: sp.csr_matrix
    arc_src: np.ndarray
    arc_dst: np.ndarray
    twin: np.ndarray

    @property
    def n_arcs(self) -> int:
        return int(self.arc_src.shape[0])


def nonbacktracking(g: Graph) -> NonbacktrackingMatrix:
    """Arc-indexed nonbacktracking operator weighted by the graph's edge
    weights (c(xy) = weight of edge {x, y})."""
    n = g.n
    deg = g.degrees
    arc_src = np.repeat(np.arange(n, dtype=np.int64), deg)
    arc_dst = g.indices.astype(np.int64)
    two_m = arc_src.shape[0]
    keys = arc_src * n + arc_dst
    twin = np.searchsorted(keys, arc_dst * n + arc_src).astype(np.int64)

    counts = deg[arc_dst].astype(np.int64)
    total = int(counts.sum())
    rows = np.repeat(np.arange(two_m, dtype=np.int64), counts)
    starts = g.indptr[arc_dst].astype(np.int64)
    csum = np.cumsum(counts) - counts
    cols = np.repeat(starts, counts) + (np.arange(total, dtype=np.int64)
                                        - np.repeat(csum, counts))
    keep = cols != twin[rows]
    vals = g.arc_weights[cols[keep]]
    B = sp.csr_matrix((vals, (rows[keep], cols[keep])), shape=(two_m, two_m))
    return NonbacktrackingMatrix(B, arc_src, arc_dst, twin)


def nonbacktracking_nilpotence_check(tree: Graph, max_arcs: int = 2000) -> int:
    """Smallest k with B^k = 0 on a tree (raises if the input is not a
    forest or exceeds the arc budget)."""
    if 2 * tree.m > max_arcs:
        raise ValueError(f"arc count {2 * tree.m} exceeds budget {max_arcs}")
    for comp in connected_components(tree).components:
        if comp.excess > 0:
            raise ValueError("nonbacktracking matrix is nilpotent only on forests")
    B = nonbacktracking(tree).matrix
    if B.nnz == 0:
        return 1
    M = B.copy()
    k = 1
    limit = 2 * tree.m + 2
    while M.nnz and k <= limit:
        M = (B @ M).tocsr()
        M.eliminate_zeros()
        k += 1
    if M.nnz:
        raise AssertionError("operator failed to vanish within the arc budget")
    return k


def bulk_spectral_check(bulk, d: float, epsilon: float, seed=None,
                        slack: float = 1.2) -> CheckResult:
    """Spectral norm of the bulk interaction against slack * 2 sqrt(d(1+eps)).

    Accepts a Graph with signed/real weights or a CenteredInteraction; the
    centered case is measured on the adjacency scale (the beta/sqrt(d)
    prefactor is divided out). The degree precondition max deg <= d(1+eps)
    is enforced.
    """
    D = d * (1.0 + epsilon)
    if isinstance(bulk, CenteredInteraction):
        g = bulk.graph
        if bulk.scale <= 0:
            raise ValueError("centered interaction needs beta > 0 for norm rescaling")
        scale = bulk.scale

        def op(v, _b=bulk, _s=scale):
            return _b.matvec(v) / _s
    else:
        g = bulk
        adj = g.adjacency(weighted=True)

        def op(v, _a=adj):
            return _a @ v
    if g.m and int(g.degrees.max()) > D:
        raise ValueError(f"bulk max degree {int(g.degrees.max())} exceeds {D}")
    est = spectral_radius(op, g.n, seed=seed)
    bound = slack * 2.0 * np.sqrt(d * (1.0 + epsilon))
    return CheckResult("bulk_norm", est.value, float(bound), est.value <= bound,
                       est.iterations, est.converged)


def distance_norm_check(comp: Graph, s_vertices: np.ndarray, Delta: float,
                        D: float, ell_max: int, seed=None) -> list[dict]:
    """Exact-distance-matrix norms against the three pseudorandom-tree bounds:

        |A^(l)|     <= D^(l/2) (l+1) (Delta/D)      (l >= 1)
        |A^(l)_S|   <= D^(l/2) (l+1)
        |A^(l) A|   <= D^(l/2) (l+1) (2 Delta / sqrt(D))  (l >= 1)

    The full and product bounds are stated for l >= 1; at l = 0 they are
    still reported but flagged not applicable.
    """
    s_vertices = np.asarray(s_vertices, dtype=np.int64)
    A = comp.adjacency(weighted=False).astype(np.float64)
    levels = distance_matrices(comp, ell_max)
    out = []
    for ell in range(ell_max + 1):
        Al = levels[ell].astype(np.float64)
        scale = float(D) ** (ell / 2.0) * (ell + 1)
        full_est = _sym_norm(Al, seed=seed)
        sub = Al[s_vertices][:, s_vertices] if s_vertices.size else sp.csr_matrix((0, 0))
        s_est = _sym_norm(sub, seed=seed)
        prod_est = _op_norm((Al @ A).tocsr(), seed=seed)
        b_full = scale * Delta / D
        b_s = scale
        b_prod = scale * 2.0 * Delta / np.sqrt(D)
        out.append({
            "ell": ell,
            "full": CheckResult("dist_full", full_est.value, b_full,
                                full_est.value <= b_full, full_est.iterations,
                                full_est.converged, applicable=ell >= 1),
            "restricted": CheckResult("dist_restricted", s_est.value, b_s,
                                      s_est.value <= b_s, s_est.iterations,
                                      s_est.converged),
            "product": CheckResult("dist_product", prod_est.value, b_prod,
                                   prod_est.value <= b_prod, prod_est.iterations,
                                   prod_est.converged, applicable=ell >= 1),
        })
    return out


@dataclass(frozen=True)
class ControlMatrixTree:
    """C^2 = (1 - s0^2) BH(-s0) with s0 = gamma / sqrt(D), assembled sparse."""

    C2: sp.csr_matrix
    gamma: float
    D: float
    s0: float

    def sqrt(self) -> np.ndarray:
        """Dense symmetric square root, eigenvalues clamped below at 1e-12."""
        dim = self.C2.shape[0]
        if dim > 500:
            raise ValueError("dense square root capped at 500 vertices")
        A = self.C2.toarray()
        w, V = np.linalg.eigh(0.5 * (A + A.T))
        w = np.maximum(w, 1e-12)
        return (V * np.sqrt(w)) @ V.T

    def min_eigenvalue(self, seed=None) -> float:
        return smallest_eigenvalue(self.C2, seed=seed)


def control_matrix_tree(tree: Graph, gamma: float, D: float) -> ControlMatrixTree:
    """Control matrix for the tree annealing path.

    C^2 = (D_G - I) s0^2 + s0 A + I entrywise, which is BH(-s0) scaled by
    (1 - s0^2); every entry is nonnegative for s0 in [0, 1).
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if D <= 0:
        raise ValueError("D must be positive")
    for comp in connected_components(tree).components:
        if comp.excess > 0:
            raise ValueError("control matrix construction requires a forest")
    s0 = gamma / np.sqrt(D)
    bh = bethe_hessian(tree, -s0)
    C2 = ((1.0 - s0 * s0) * bh.matrix).tocsr()
    return ControlMatrixTree(C2, float(gamma), float(D), float(s0))


def localization_norm_tree_check(tree: Graph, gamma: float, D: float,
                                 delta_obs: float, seed=None) -> CheckResult:
    """|C Cov C| on a uniform-coupling tree against 1 + 8 Delta/((1-gamma)^2 D).

    Couplings are gamma/sqrt(D) on every edge, zero field; the covariance
    comes from the closed-form tanh-product formula and C from the tree
    control matrix.
    """
    from .ising import tree_covariance_closed_form

    if tree.n > 500:
        raise ValueError("dense check capped at 500 vertices")
    ctrl = control_matrix_tree(tree, gamma, D)
    C = ctrl.sqrt()
    if tree.m:
        weighted = tree.with_edge_weights(np.full(tree.m, gamma / np.sqrt(D)))
    else:
        weighted = tree
    cov = tree_covariance_closed_form(weighted)
    M = C @ cov @ C
    val = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (M + M.T)))))
    bound = 1.0 + 8.0 * delta_obs / ((1.0 - gamma) ** 2 * D)
    return CheckResult("localization_norm_tree", val, float(bound), val <= bound)
