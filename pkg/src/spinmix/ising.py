"""Ising models over {-1,+1}^n with single-site and block heat-bath dynamics.

The measure is mu(x) propto exp(0.5 x^T J x + <h, x>). J can be a sparse
Graph (edge weights are couplings), a CenteredInteraction (sparse plus rank-2
correction), or a dense symmetric array. A dense J may carry a nonzero
diagonal: it shifts log Z by trace(J)/2 and leaves the distribution alone,
which is exactly the identity the oracle tests pin down.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .generate import CenteredInteraction
from .graphs import Graph
from .rng import RngSeed, as_generator


def _sigmoid(t: np.ndarray | float):
    return 1.0 / (1.0 + np.exp(-t))


class IsingModel:
    """Interaction + external field. The interaction may be a Graph whose
    edge weights are the couplings, a CenteredInteraction, or a dense
    symmetric ndarray."""

    def __init__(self, interaction, h=None):
        if isinstance(interaction, Graph):
            self.kind = "graph"
            self.n = interaction.n
        elif isinstance(interaction, CenteredInteraction):
            self.kind = "centered"
            self.n = interaction.graph.n
        else:
            J = np.asarray(interaction, dtype=np.float64)
            if J.ndim != 2 or J.shape[0] != J.shape[1]:
                raise ValueError("dense interaction must be square")
            if not np.allclose(J, J.T, atol=1e-12, rtol=0.0):
                raise ValueError("dense interaction must be symmetric")
            if not np.all(np.isfinite(J)):
                raise ValueError("interaction entries must be finite")
            self.kind = "dense"
            self.n = J.shape[0]
            interaction = J
        self.interaction = interaction
        if h is None:
            h = np.zeros(self.n)
        h = np.ascontiguousarray(h, dtype=np.float64)
        if h.shape != (self.n,):
            raise ValueError(f"field must have shape ({self.n},)")
        if not np.all(np.isfinite(h)):
            raise ValueError("field entries must be finite")
        self.h = h

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """J @ x for the stored J (including any dense diagonal)."""
        if self.kind == "graph":
            return self.interaction.adjacency() @ x
        if self.kind == "centered":
            return self.interaction.matvec(x)
        return self.interaction @ x

    def dense_coupling(self) -> np.ndarray:
        if self.kind == "dense":
            return np.array(self.interaction)
        if self.kind == "centered":
            return self.interaction.dense()
        if self.n > 500:
            raise ValueError("refusing to densify an interaction with n > 500")
        return self.interaction.adjacency().toarray()

    def log_weight(self, spins: np.ndarray) -> float:
        """0.5 x^T J x + <h, x> (unnormalized log mass)."""
        x = np.asarray(spins, dtype=np.float64)
        return float(0.5 * x @ self.matvec(x) + self.h @ x)

    def local_field(self, i: int, spins: np.ndarray) -> float:
        """L_i = sum_{j != i} J_ij x_j + h_i."""
        out = float(self.h[i])
        if self.kind == "graph":
            g = self.interaction
            nbrs = g.neighbors(i)
            out += float(g.neighbor_weights(i) @ spins[nbrs].astype(np.float64))
        elif self.kind == "centered":
            ci = self.interaction
            g = ci.graph
            nbrs = g.neighbors(i)
            x = spins.astype(np.float64)
            out += ci.scale * float(g.neighbor_weights(i) @ x[nbrs])
            s1 = float(spins.sum())
            ssig = float(ci.sigma.astype(np.float64) @ x)
            out -= ci.a * (s1 - float(spins[i]))
            out -= ci.b * float(ci.sigma[i]) * (ssig - float(ci.sigma[i]) * float(spins[i]))
        else:
            J = self.interaction
            x = spins.astype(np.float64)
            out += float(J[i] @ x) - float(J[i, i]) * float(x[i])
        return out


@dataclass
class SpinConfig:
    """Spin vector with integer running sums kept in sync by the dynamics.

    s1 is sum(x); s_sigma is sum(sigma * x) when a community vector sigma is
    attached (centered models), else 0.
    """

    spins: np.ndarray
    s1: int
    s_sigma: int = 0

    @staticmethod
    def from_spins(spins, sigma: np.ndarray | None = None) -> "SpinConfig":
        s = np.ascontiguousarray(spins, dtype=np.int8)
        if not np.all(np.abs(s) == 1):
            raise ValueError("spins must be +-1")
        s_sigma = int(sigma.astype(np.int64) @ s.astype(np.int64)) if sigma is not None else 0
        return SpinConfig(s, int(s.astype(np.int64).sum()), s_sigma)

    def copy(self) -> "SpinConfig":
        return SpinConfig(self.spins.copy(), self.s1, self.s_sigma)

    def sums_consistent(self, sigma: np.ndarray | None = None) -> bool:
        x = self.spins.astype(np.int64)
        if int(x.sum()) != self.s1:
            return False
        if sigma is not None and int(sigma.astype(np.int64) @ x) != self.s_sigma:
            return False
        return True


def all_plus(n: int, sigma=None) -> SpinConfig:
    return SpinConfig.from_spins(np.ones(n, dtype=np.int8), sigma)


def all_minus(n: int, sigma=None) -> SpinConfig:
    return SpinConfig.from_spins(-np.ones(n, dtype=np.int8), sigma)


def random_config(n: int, rng, sigma=None) -> SpinConfig:
    gen = as_generator(rng)
    return SpinConfig.from_spins((gen.integers(0, 2, size=n) * 2 - 1).astype(np.int8), sigma)


def glauber_flip_probability(model: IsingModel, state: SpinConfig, i: int) -> float:
    """Probability the heat-bath resample of site i lands on +1."""
    return float(_sigmoid(2.0 * model.local_field(i, state.spins)))


def glauber_step(model: IsingModel, state: SpinConfig, rng) -> SpinConfig:
    """One heat-bath update in place: uniform site, conditional resample."""
    gen = as_generator(rng)
    i = int(gen.integers(model.n))
    p_plus = glauber_flip_probability(model, state, i)
    new = np.int8(1) if gen.random() < p_plus else np.int8(-1)
    old = state.spins[i]
    if new != old:
        d = int(new) - int(old)
        state.s1 += d
        if model.kind == "centered":
            state.s_sigma += int(model.interaction.sigma[i]) * d
        state.spins[i] = new
    return state


@dataclass(frozen=True)
class ChainResult:
    final: SpinConfig
    steps: int
    observed_at: np.ndarray
    trace: dict


def _observer_value(name: str, model: IsingModel, state: SpinConfig, reference):
    if name == "mag":
        return state.s1 / model.n
    if name == "energy":
        return model.log_weight(state.spins)
    if name == "overlap":
        if reference is None:
            raise ValueError("overlap observer needs a reference vector")
        return float(reference.astype(np.float64) @ state.spins.astype(np.float64)) / model.n
    raise ValueError(f"unknown observer {name!r}")


def run_chain(model: IsingModel, init: SpinConfig, steps: int, rng,
              observers: Sequence[str] = (), stride: int = 0,
              reference: np.ndarray | None = None) -> ChainResult:
    """Run Glauber dynamics for a fixed number of steps.

    Observables are recorded every ``stride`` steps (0 disables recording).
    The chain consumes two presampled arrays per segment (sites, uniforms)
    from the generator, so a fixed seed reproduces the trace regardless of
    segmentation internals or thread count.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    gen = as_generator(rng)
    state = init.copy()
    if reference is None and model.kind == "centered":
        reference = model.interaction.sigma
    names = tuple(observers)
    record: dict[str, list] = {name: [] for name in names}
    at: list[int] = []

    def observe(step_idx: int) -> None:
        at.append(step_idx)
        for name in names:
            record[name].append(_observer_value(name, model, state, reference))

    seg = stride if (stride and names) else steps
    if names and stride:
        observe(0)
    done = 0
    while done < steps:
        take = min(seg, steps - done) if seg > 0 else steps - done
        if take == 0:
            break
        sites = gen.integers(0, model.n, size=take).astype(np.int64)
        unifs = gen.random(take)
        _advance(model, state, sites, unifs)
        done += take
        if names and stride:
            observe(done)
    return ChainResult(state, steps, np.array(at, dtype=np.int64),
                       {k: np.array(v) for k, v in record.items()})


def _advance(model: IsingModel, state: SpinConfig, sites: np.ndarray, unifs: np.ndarray) -> None:
    if model.kind == "graph":
        g = model.interaction
        state.s1 = int(kernels.glauber_chain_csr(g.indptr, g.indices,
                                                 g.arc_weights, model.h,
                                                 state.spins, sites, unifs,
                                                 state.s1))
    elif model.kind == "centered":
        ci = model.interaction
        g = ci.graph
        sums = np.array([state.s1, state.s_sigma], dtype=np.int64)
        kernels.glauber_chain_centered(g.indptr, g.indices, ci.scaled_arc_weights,
                                       model.h, state.spins, sites, unifs,
                                       ci.a, ci.b, ci.sigma, sums)
        state.s1 = int(sums[0])
        state.s_sigma = int(sums[1])
    else:
        state.s1 = int(kernels.glauber_chain_dense(model.interaction, model.h,
                                                   state.spins, sites, unifs,
                                                   state.s1))


def coupling_submatrix(model: IsingModel, block: np.ndarray) -> np.ndarray:
    """Dense J restricted to block x block, zero diagonal."""
    block = np.asarray(block, dtype=np.int64)
    k = block.shape[0]
    if model.kind == "graph":
        sub = model.interaction.adjacency().tocsr()[block][:, block].toarray()
    elif model.kind == "centered":
        ci = model.interaction
        sub = ci.scale * ci.graph.adjacency().tocsr()[block][:, block].toarray()
        sig = ci.sigma[block].astype(np.float64)
        sub -= ci.a * (np.ones((k, k)) - np.eye(k))
        sub -= ci.b * (np.outer(sig, sig) - np.eye(k))
    else:
        sub = model.interaction[np.ix_(block, block)].copy()
        np.fill_diagonal(sub, 0.0)
    return sub


def conditional_field(model: IsingModel, block: np.ndarray, state: SpinConfig) -> np.ndarray:
    """Field of the conditional Ising model on ``block`` given the rest:
    h'_i = h_i + sum_{j not in block} J_ij x_j."""
    block = np.asarray(block, dtype=np.int64)
    x = state.spins.astype(np.float64)
    full = model.matvec(x)
    inner = coupling_submatrix(model, block) @ x[block]
    out = model.h[block] + full[block] - inner
    if model.kind == "dense":
        # stored diagonal contributes J_ii x_i to (Jx)_i but is excluded from J_ij sums
        diag = np.diag(model.interaction)[block]
        out -= diag * x[block]
    return out


def _block_states(k: int) -> np.ndarray:
    idx = np.arange(1 << k, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(k)) & 1
    return (2 * bits - 1).astype(np.float64)


def resample_block(model: IsingModel, block: np.ndarray, state: SpinConfig, rng) -> None:
    """Exact conditional resample of the spins in ``block`` (in place)."""
    block = np.asarray(block, dtype=np.int64)
    k = block.shape[0]
    if k > 20:
        raise ValueError("block too large for exact conditional resampling")
    gen = as_generator(rng)
    hp = conditional_field(model, block, state)
    Jb = coupling_submatrix(model, block)
    S = _block_states(k)
    logw = 0.5 * np.einsum("si,ij,sj->s", S, Jb, S) + S @ hp
    logw -= logw.max()
    p = np.exp(logw)
    p /= p.sum()
    pick = int(np.searchsorted(np.cumsum(p), gen.random()))
    pick = min(pick, (1 << k) - 1)
    new = S[pick].astype(np.int8)
    old = state.spins[block].copy()
    state.spins[block] = new
    d = int(new.astype(np.int64).sum() - old.astype(np.int64).sum())
    state.s1 += d
    if model.kind == "centered":
        sig = model.interaction.sigma[block].astype(np.int64)
        state.s_sigma += int(sig @ new.astype(np.int64)) - int(sig @ old.astype(np.int64))


class BlockPartition:
    """Vertex partition into blocks with an owner lookup table."""

    def __init__(self, n: int, blocks: Sequence):
        self.blocks = [np.asarray(b, dtype=np.int64) for b in blocks]
        owner = np.full(n, -1, dtype=np.int64)
        for b_idx, blk in enumerate(self.blocks):
            if blk.size and (blk.min() < 0 or blk.max() >= n):
                raise ValueError("block vertex out of range")
            if np.any(owner[blk] != -1):
                raise ValueError("partition blocks overlap")
            owner[blk] = b_idx
        if np.any(owner < 0):
            raise ValueError("partition does not cover all vertices")
        self.owner = owner

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.blocks[i]


def block_glauber_step(model: IsingModel, partition, state: SpinConfig, rng) -> SpinConfig:
    """One block heat-bath step.

    A block is chosen with probability |block|/n (implemented by drawing a
    uniform vertex and taking its block), then resampled exactly from its
    conditional law given the rest. The partition must cover every vertex
    exactly once; pass a BlockPartition to amortize the owner table.
    """
    gen = as_generator(rng)
    if not isinstance(partition, BlockPartition):
        partition = BlockPartition(model.n, partition)
    u = int(gen.integers(model.n))
    blk = partition[int(partition.owner[u])]
    resample_block(model, blk, state, gen)
    return state


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation 0.5 * sum |p - q| between distribution tables."""
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise ValueError("distribution tables must have equal size")
    for name, t in (("p", p), ("q", q)):
        s = t.sum()
        if abs(s - 1.0) > 1e-9:
            raise ValueError(f"{name} sums to {s!r}, not 1")
    return float(0.5 * np.abs(p - q).sum())


def gauge_transform(model: IsingModel, signs: np.ndarray) -> IsingModel:
    """Conjugate by D = diag(signs): returns the model (DJD, Dh).

    If x ~ mu_{J,h} then Dx ~ mu_{DJD,Dh}; log Z and |Cov| entries are
    invariant. Centered interactions are not closed under conjugation
    (the rank-2 correction would lose its form), so they are rejected.
    """
    signs = np.asarray(signs)
    if signs.shape != (model.n,) or not np.all(np.abs(signs) == 1):
        raise ValueError("signs must be a +-1 vector of length n")
    s = signs.astype(np.float64)
    if model.kind == "centered":
        raise NotImplementedError("gauge of a centered interaction is not representable")
    if model.kind == "graph":
        g = model.interaction
        w = g.edge_w * s[g.edge_u] * s[g.edge_v]
        return IsingModel(g.with_edge_weights(w), s * model.h)
    J = s[:, None] * model.interaction * s[None, :]
    return IsingModel(J, s * model.h)


def tree_gauge(g: Graph, root: int = 0, skip_edge: int | None = None) -> np.ndarray:
    """Sign vector D making all spanning-tree couplings nonnegative.

    D_v is the product of coupling signs along the root-to-v path. With
    skip_edge set, that one edge is excluded from the spanning structure
    (near-tree case) and may stay negative after the transform.
    """
    n = g.n
    signs = np.zeros(n, dtype=np.int8)
    signs[root] = 1
    parent_seen = 1
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            base = g.indptr[u]
            for off, v in enumerate(g.neighbors(u)):
                arc = base + off
                if skip_edge is not None and g.arc_edge[arc] == skip_edge:
                    continue
                if signs[v] != 0:
                    continue
                w = g.arc_weights[arc]
                signs[v] = signs[u] * (1 if w > 0 else -1)
                parent_seen += 1
                nxt.append(v)
        frontier = nxt
    if parent_seen != n:
        raise ValueError("graph is not connected (after removing the designated edge)")
    m_eff = g.m - (1 if skip_edge is not None else 0)
    if m_eff != n - 1:
        raise ValueError("input is not a tree after removing the designated edge")
    return signs


def tree_covariance_closed_form(g: Graph) -> np.ndarray:
    """Zero-field covariance on a forest: Cov[i,j] = prod of tanh(J_e) along
    the unique i-j path, 1 on the diagonal, 0 across components.

    Valid for arbitrary coupling signs (conjugating by the tree gauge reduces
    to the nonnegative case and flips signs back).
    """
    from .graphs import connected_components

    n = g.n
    for comp in connected_components(g).components:
        if comp.excess > 0:
            raise ValueError("input has a cycle")
    cov = np.eye(n)
    t = np.tanh(g.arc_weights)
    for src in range(n):
        # BFS from src accumulating the running tanh product
        val = np.zeros(n)
        val[src] = 1.0
        seen = np.zeros(n, dtype=bool)
        seen[src] = True
        frontier = [src]
        while frontier:
            nxt = []
            for u in frontier:
                base = g.indptr[u]
                for off, v in enumerate(g.neighbors(u)):
                    if not seen[v]:
                        seen[v] = True
                        val[v] = val[u] * t[base + off]
                        nxt.append(v)
            frontier = nxt
        cov[src, :] = val
        cov[src, src] = 1.0
    return cov
