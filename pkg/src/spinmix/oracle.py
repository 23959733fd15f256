"""Exact quantities for small Ising models by full state enumeration.

State convention used everywhere: state index s encodes spin i as +1 when
bit i of s is set, -1 otherwise. Enumeration is chunked so n = 20 stays in
a few hundred MB and vectorizes; chunks are reduced in a fixed order, so
results are bit-identical regardless of chunk size.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .ising import IsingModel
from .rng import as_generator

MAX_ENUM_SPINS = 20
MAX_CHAIN_SPINS = 12
_CHUNK = 1 << 16


def state_spins(states: np.ndarray, n: int) -> np.ndarray:
    """Decode state indices to (k, n) arrays of +-1 spins (bit i = spin i)."""
    states = np.asarray(states, dtype=np.int64)
    bits = (states[:, None] >> np.arange(n)) & 1
    return (2 * bits - 1).astype(np.int8)


def spins_to_state(spins: np.ndarray) -> int:
    s = np.asarray(spins)
    bits = (s > 0).astype(np.int64)
    return int(bits @ (1 << np.arange(s.shape[-1], dtype=np.int64)))


class ExactOracle:
    """Partition function, distribution table, mean, covariance and the
    single-site heat-bath transition matrix, all exact."""

    def __init__(self, model: IsingModel):
        n = model.n
        if n > MAX_ENUM_SPINS:
            raise ValueError(f"exact enumeration capped at {MAX_ENUM_SPINS} spins")
        self.model = model
        self.n = n
        N = 1 << n
        J = model.dense_coupling()
        h = model.h
        lw = np.empty(N, dtype=np.float64)
        for lo in range(0, N, _CHUNK):
            hi = min(lo + _CHUNK, N)
            S = state_spins(np.arange(lo, hi), n).astype(np.float64)
            lw[lo:hi] = 0.5 * np.einsum("si,si->s", S @ J, S) + S @ h
        self.log_weights = lw
        self.logZ = float(logsumexp(lw))
        self.probs = np.exp(lw - self.logZ)
        mean = np.zeros(n)
        second = np.zeros((n, n))
        for lo in range(0, N, _CHUNK):
            hi = min(lo + _CHUNK, N)
            S = state_spins(np.arange(lo, hi), n).astype(np.float64)
            p = self.probs[lo:hi]
            mean += p @ S
            second += S.T @ (S * p[:, None])
        self.mean = mean
        cov = second - np.outer(mean, mean)
        self.cov = 0.5 * (cov + cov.T)

    @property
    def marginals(self) -> np.ndarray:
        return self.mean

    def table(self) -> np.ndarray:
        """Distribution as a (2,)*n tensor with axis i indexing spin i
        (index 0 = spin -1, index 1 = spin +1)."""
        t = self.probs.reshape((2,) * self.n)
        return t.transpose(tuple(reversed(range(self.n))))

    def sample_states(self, k: int, rng) -> np.ndarray:
        gen = as_generator(rng)
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(cum, gen.random(k), side="right")
        return np.minimum(idx, (1 << self.n) - 1).astype(np.int64)

    def sample(self, k: int, rng) -> np.ndarray:
        return state_spins(self.sample_states(k, rng), self.n)

    def transition_matrix(self) -> "sp.csr_matrix":
        """Row-sparse 2^n x 2^n single-site heat-bath kernel (n+1 nonzeros
        per row): P(x, x^flip(i)) = sigmoid(lw[y] - lw[x]) / n."""
        import scipy.sparse as sp

        n = self.n
        if n > MAX_CHAIN_SPINS:
            raise ValueError(f"explicit chain matrix capped at {MAX_CHAIN_SPINS} spins")
        N = 1 << n
        x = np.arange(N, dtype=np.int64)
        rows = [x]
        cols = [x]
        diag = np.ones(N)
        vals = [diag]
        for i in range(n):
            y = x ^ (1 << i)
            p = 1.0 / (n * (1.0 + np.exp(self.log_weights[x] - self.log_weights[y])))
            diag -= p
            rows.append(x)
            cols.append(y)
            vals.append(p)
        return sp.csr_matrix((np.concatenate(vals),
                              (np.concatenate(rows), np.concatenate(cols))),
                             shape=(N, N))

    def symmetrized_kernel(self) -> "sp.csr_matrix":
        """D^{1/2} P D^{-1/2} with D = diag(mu): entries 1/(2n cosh(dlw/2))
        off the diagonal, so no exponentials of large magnitudes appear."""
        import scipy.sparse as sp

        n = self.n
        if n > MAX_CHAIN_SPINS:
            raise ValueError(f"explicit chain matrix capped at {MAX_CHAIN_SPINS} spins")
        N = 1 << n
        x = np.arange(N, dtype=np.int64)
        rows = [x]
        cols = [x]
        diag = np.ones(N)
        vals = [diag]
        for i in range(n):
            y = x ^ (1 << i)
            dlw = self.log_weights[y] - self.log_weights[x]
            diag -= 1.0 / (n * (1.0 + np.exp(-dlw)))
            rows.append(x)
            cols.append(y)
            vals.append(1.0 / (2.0 * n * np.cosh(0.5 * dlw)))
        return sp.csr_matrix((np.concatenate(vals),
                              (np.concatenate(rows), np.concatenate(cols))),
                             shape=(N, N))


def exact_oracle_build(model: IsingModel) -> ExactOracle:
    return ExactOracle(model)
