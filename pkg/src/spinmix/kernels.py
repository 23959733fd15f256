"""Numba kernels for the hot loops: BFS batches and Glauber chains.

All kernels are sequential on purpose. Determinism contracts promise
bit-identical results regardless of thread count, so parallelism lives at
the job level (independent chains, independent components), never inside a
kernel.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def bfs_profile(indptr, indices, src, rmax, s_mask, seen, dist, queue, stamp):
    """Breadth-first ball profile around ``src`` up to depth ``rmax``.

    Returns (sizes, s_counts): sizes[r] = |B_r(src)| and s_counts[r] = number
    of marked vertices within distance r. ``seen`` carries stamps so the work
    arrays can be reused across calls without clearing.
    """
    sizes = np.zeros(rmax + 1, dtype=np.int64)
    s_counts = np.zeros(rmax + 1, dtype=np.int64)
    seen[src] = stamp
    dist[src] = 0
    queue[0] = src
    head = 0
    tail = 1
    sizes[0] = 1
    if s_mask[src]:
        s_counts[0] = 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        if du >= rmax:
            continue
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            if seen[v] != stamp:
                seen[v] = stamp
                dist[v] = du + 1
                sizes[du + 1] += 1
                if s_mask[v]:
                    s_counts[du + 1] += 1
                queue[tail] = v
                tail += 1
    for r in range(1, rmax + 1):
        sizes[r] += sizes[r - 1]
        s_counts[r] += s_counts[r - 1]
    return sizes, s_counts


@njit(cache=True)
def ball_sizes_batch(indptr, indices, sources, rmax):
    """|B_r(v)| for each source vertex and every r <= rmax."""
    n = indptr.shape[0] - 1
    seen = np.full(n, -1, dtype=np.int64)
    dist = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    s_mask = np.zeros(n, dtype=np.bool_)
    out = np.empty((sources.shape[0], rmax + 1), dtype=np.int64)
    for i in range(sources.shape[0]):
        sizes, _ = bfs_profile(indptr, indices, sources[i], rmax, s_mask, seen, dist, queue, i)
        out[i] = sizes
    return out


@njit(cache=True)
def ball_profile_batch(indptr, indices, sources, rmax, s_mask):
    """Ball sizes and marked-vertex counts for each source, r <= rmax."""
    n = indptr.shape[0] - 1
    seen = np.full(n, -1, dtype=np.int64)
    dist = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    sizes_out = np.empty((sources.shape[0], rmax + 1), dtype=np.int64)
    counts_out = np.empty((sources.shape[0], rmax + 1), dtype=np.int64)
    for i in range(sources.shape[0]):
        sizes, cnts = bfs_profile(indptr, indices, sources[i], rmax, s_mask, seen, dist, queue, i)
        sizes_out[i] = sizes
        counts_out[i] = cnts
    return sizes_out, counts_out


@njit(cache=True)
def mark_ball_edges(indptr, indices, arc_edge, centers, radii, edge_mark):
    """Set edge_mark[e] for every edge with both endpoints in some ball.

    centers[i] with radii[i] >= 1 define induced balls; an arc (u, v) with
    both endpoints within distance radii[i] of centers[i] marks its edge.
    """
    n = indptr.shape[0] - 1
    seen = np.full(n, -1, dtype=np.int64)
    dist = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for i in range(centers.shape[0]):
        src = centers[i]
        r = radii[i]
        if r <= 0:
            continue
        seen[src] = i
        dist[src] = 0
        queue[0] = src
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            du = dist[u]
            if du >= r:
                continue
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if seen[v] != i:
                    seen[v] = i
                    dist[v] = du + 1
                    queue[tail] = v
                    tail += 1
        # Second sweep over the collected ball: mark induced edges.
        for qi in range(tail):
            u = queue[qi]
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if seen[v] == i:
                    edge_mark[arc_edge[k]] = True


@njit(cache=True)
def glauber_chain_csr(indptr, indices, weights, h, spins, sites, unifs, s1):
    """Heat-bath single-site dynamics on a sparse coupling matrix, in place.

    sites[t] is the vertex resampled at step t; unifs[t] the uniform draw.
    The new spin is +1 with probability 1/(1+exp(-2 L_i)) where L_i is the
    local field excluding the diagonal. Returns the updated spin sum.
    """
    for t in range(sites.shape[0]):
        i = sites[t]
        local = h[i]
        for k in range(indptr[i], indptr[i + 1]):
            local += weights[k] * spins[indices[k]]
        p_plus = 1.0 / (1.0 + np.exp(-2.0 * local))
        new = 1 if unifs[t] < p_plus else -1
        if new != spins[i]:
            s1 += 2 * new
            spins[i] = new
    return s1


@njit(cache=True)
def glauber_chain_centered(indptr, indices, weights, h, spins, sites, unifs,
                           a, b, sigma, sums):
    """Heat-bath dynamics for sparse-plus-rank-two couplings, in place.

    The dense correction contributes -a*(S1 - x_i) - b*sigma_i*(Ssig - sigma_i x_i)
    to the local field, with S1 = sum_j x_j and Ssig = sum_j sigma_j x_j cached
    in ``sums`` (int64[2]) and updated on every flip.
    """
    for t in range(sites.shape[0]):
        i = sites[t]
        local = h[i]
        for k in range(indptr[i], indptr[i + 1]):
            local += weights[k] * spins[indices[k]]
        local -= a * (sums[0] - spins[i])
        local -= b * sigma[i] * (sums[1] - sigma[i] * spins[i])
        p_plus = 1.0 / (1.0 + np.exp(-2.0 * local))
        new = 1 if unifs[t] < p_plus else -1
        if new != spins[i]:
            sums[0] += 2 * new
            sums[1] += 2 * new * sigma[i]
            spins[i] = new


@njit(cache=True)
def glauber_chain_dense(J, h, spins, sites, unifs, s1):
    """Heat-bath dynamics with a dense coupling matrix (diagonal ignored).
    Returns the updated spin sum."""
    for t in range(sites.shape[0]):
        i = sites[t]
        local = h[i]
        for j in range(J.shape[0]):
            if j != i:
                local += J[i, j] * spins[j]
        p_plus = 1.0 / (1.0 + np.exp(-2.0 * local))
        new = 1 if unifs[t] < p_plus else -1
        if new != spins[i]:
            s1 += 2 * new
            spins[i] = new
    return s1
