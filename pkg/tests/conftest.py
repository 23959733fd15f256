import numpy as np
import pytest

from spinmix.graphs import Graph, from_edge_arrays
from spinmix.ising import IsingModel
from spinmix.rng import RngSeed


def graph_from_edges(n, edges):
    """edges: list of (u, v) or (u, v, w)."""
    if not edges:
        return from_edge_arrays(n, np.array([], dtype=np.int64),
                                np.array([], dtype=np.int64))
    u = np.array([e[0] for e in edges], dtype=np.int64)
    v = np.array([e[1] for e in edges], dtype=np.int64)
    w = np.array([e[2] if len(e) > 2 else 1.0 for e in edges])
    return from_edge_arrays(n, u, v, w)


def random_tree_edges(n, rng, low=-0.9, high=0.9):
    """Uniform-ish random labelled tree with weights in [low, high]."""
    edges = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        w = float(rng.uniform(low, high))
        while w == 0.0:
            w = float(rng.uniform(low, high))
        edges.append((u, v, w))
    return edges


def random_model(n, rng, density=0.5, scale=0.6, field_scale=0.4):
    """Random sparse signed model with Gaussian fields."""
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < density:
                edges.append((u, v, float(rng.uniform(-scale, scale)) or scale))
    g = graph_from_edges(n, edges)
    h = field_scale * rng.standard_normal(n)
    return IsingModel(g, h)


def star_graph(leaves):
    return graph_from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def path_graph(n):
    return graph_from_edges(n, [(i, i + 1) for i in range(n - 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


@pytest.fixture
def rs():
    return RngSeed(20260815, 0)
