"""Random graph generation: two-community block models, edge signings, and
centered interaction operators."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graphs import Graph, from_edge_arrays
from .rng import RngSeed, as_generator


def _skip_sample(total: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Indices of successes among ``total`` independent Bernoulli(p) trials.

    Geometric-gap skipping: expected O(total * p) work instead of ``total``
    draws, exact in distribution.
    """
    if total <= 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(total, dtype=np.int64)
    chunks = []
    pos = -1
    block = max(256, int(total * p * 1.25) + 16)
    while True:
        gaps = rng.geometric(p, size=block).astype(np.int64)
        positions = pos + np.cumsum(gaps)
        inside = positions < total
        if inside.all():
            chunks.append(positions)
            pos = int(positions[-1])
            continue
        chunks.append(positions[inside])
        break
    return np.concatenate(chunks) if len(chunks) > 1 else chunks[0]


def _triangular_pairs(ids: np.ndarray, p: float, rng: np.random.Generator):
    """Sample each unordered pair within ``ids`` independently with prob p."""
    s = ids.shape[0]
    total = s * (s - 1) // 2
    k = _skip_sample(total, p, rng)
    if k.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    # Pairs (a, b), a < b, enumerated with first coordinate slowest:
    # offsets[a] = number of pairs with first coordinate <= a.
    offsets = np.cumsum(np.arange(s - 1, -1, -1, dtype=np.int64))
    a = np.searchsorted(offsets, k, side="right")
    start = offsets[a] - (s - 1 - a)
    b = a + 1 + (k - start)
    return ids[a], ids[b]


def _bipartite_pairs(ids_a: np.ndarray, ids_b: np.ndarray, p: float,
                     rng: np.random.Generator):
    total = ids_a.shape[0] * ids_b.shape[0]
    k = _skip_sample(total, p, rng)
    if k.size == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return ids_a[k // ids_b.shape[0]], ids_b[k % ids_b.shape[0]]


def gen_sbm(n: int, d: float, lam: float, seed: RngSeed) -> tuple[Graph, np.ndarray]:
    """Two-community stochastic block model.

    Each vertex gets a uniform label sigma in {-1, +1}; pairs with equal
    labels edge with probability (d + lam sqrt d)/n, unequal with
    (d - lam sqrt d)/n. lam = 0 reduces to the Erdos-Renyi G(n, d/n).

    Returns (graph, sigma). Deterministic in ``seed``.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if d <= 0:
        raise ValueError("d must be positive")
    root = float(np.sqrt(d))
    if d - abs(lam) * root < 0:
        raise ValueError("d - |lambda| sqrt(d) must be nonnegative")
    if d + abs(lam) * root >= n:
        raise ValueError("d + |lambda| sqrt(d) must be below n")
    p_in = (d + lam * root) / n
    p_out = (d - lam * root) / n
    if not (0.0 <= p_out <= 1.0 and 0.0 <= p_in <= 1.0):
        raise ValueError("edge probabilities fall outside [0, 1]")

    rng = as_generator(seed)
    sigma = (rng.integers(0, 2, size=n, dtype=np.int64) * 2 - 1).astype(np.int8)
    plus = np.flatnonzero(sigma == 1).astype(np.int64)
    minus = np.flatnonzero(sigma == -1).astype(np.int64)

    u1, v1 = _triangular_pairs(plus, p_in, rng)
    u2, v2 = _triangular_pairs(minus, p_in, rng)
    u3, v3 = _bipartite_pairs(plus, minus, p_out, rng)
    u = np.concatenate([u1, u2, u3])
    v = np.concatenate([v1, v2, v3])
    return from_edge_arrays(n, u, v, np.ones(u.shape[0])), sigma


def random_signing(g: Graph, seed: RngSeed) -> Graph:
    """Flip each unit edge weight to -1 independently with probability 1/2."""
    if not g.has_unit_weights:
        raise ValueError("random_signing expects unit edge weights")
    rng = as_generator(seed)
    signs = rng.integers(0, 2, size=g.m, dtype=np.int64) * 2 - 1
    return g.with_edge_weights(signs.astype(np.float64))


class CenteredInteraction:
    """Sparse-plus-rank-two coupling (beta/sqrt d)(A - (d/n) 11^T - (lam sqrt d / n) ss^T)
    with the diagonal forced to zero.

    The rank-two part is never materialized; matvec costs O(m + n) using the
    coefficients a = beta sqrt(d)/n and b = beta lam / n.
    """

    def __init__(self, graph: Graph, sigma: np.ndarray, d: float, lam: float, beta: float):
        sigma = np.asarray(sigma, dtype=np.int8)
        if sigma.shape != (graph.n,):
            raise ValueError("sigma length must match vertex count")
        if not np.all(np.abs(sigma) == 1):
            raise ValueError("sigma entries must be +-1")
        self.graph = graph
        self.sigma = sigma
        self.d = float(d)
        self.lam = float(lam)
        self.beta = float(beta)
        self.scale = float(beta / np.sqrt(d))
        self.a = float(beta * np.sqrt(d) / graph.n)
        self.b = float(beta * lam / graph.n)
        self._adj = graph.adjacency(weighted=True)
        self._scaled_arcs: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def scaled_arc_weights(self) -> np.ndarray:
        """Arc weights of the sparse part, i.e. scale * signs (cached)."""
        if self._scaled_arcs is None:
            w = self.scale * self.graph.arc_weights
            w.setflags(write=False)
            self._scaled_arcs = w
        return self._scaled_arcs

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = self.scale * (self._adj @ x)
        out -= self.a * x.sum()
        out -= (self.b * float(self.sigma @ x)) * self.sigma
        # Re-zero the diagonal contribution of the rank-two part.
        out += (self.a + self.b) * x
        return out

    def masked_matvec(self, x: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """Matvec of the principal submatrix on ``mask`` (True entries)."""
        y = np.where(mask, x, 0.0)
        return np.where(mask, self.matvec(y), 0.0)

    def dense(self) -> np.ndarray:
        """Explicit matrix; refused above 500 vertices (rank-two part is dense)."""
        if self.n > 500:
            raise ValueError("refusing to densify a centered interaction with n > 500")
        A = self._adj.toarray()
        out = self.scale * A
        out -= self.a
        out -= self.b * np.outer(self.sigma, self.sigma)
        out += (self.a + self.b) * np.eye(self.n)
        return out


def build_centered(g: Graph, sigma: np.ndarray, d: float, lam: float,
                   beta: float) -> CenteredInteraction:
    """Centered interaction operator for a block-model draw with matching (d, lam)."""
    return CenteredInteraction(g, sigma, d, lam, beta)
