import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import graph_from_edges, path_graph, star_graph
from oracles import adj_from_edges, ball_naive, heaviness_radius_naive
from spinmix.decompose import (EpsilonValidityWarning, build_cluster_graph,
                               component_stats, compute_heaviness_radii,
                               excise, observed_delta, verify_near_forest,
                               verify_pseudorandom)
from spinmix.generate import gen_sbm
from spinmix.graphs import connected_components
from spinmix.rng import RngSeed


def quiet_radii(g, d, eps):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EpsilonValidityWarning)
        return compute_heaviness_radii(g, d, eps)


def quiet_excise(g, d, eps):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EpsilonValidityWarning)
        return excise(g, d, eps)


class TestHeavinessRadii:
    def test_isolated_vertex(self):
        g = graph_from_edges(1, [])
        assert quiet_radii(g, 2.0, 0.5)[0] == 0

    def test_star_center_level_two(self):
        # K_{1,7} at d=2, eps=0.5: |B_1(center)| = 8 > 3 but |B_2| = 8 <= 9,
        # so the center is 1-heavy and L-light for L >= 2.
        g = star_graph(7)
        ell = quiet_radii(g, 2.0, 0.5)
        assert ell[0] == 2

    def test_light_vertex_radius_zero_ball_edgeless(self):
        g = path_graph(6)
        ell = quiet_radii(g, 2.0, 0.5)
        assert np.all(ell == 0)
        # A radius-0 ball is a single vertex, hence edgeless.

    def test_matches_naive_definition_on_er(self):
        g, _ = gen_sbm(300, 3.0, 0.0, RngSeed(31, 0))
        d, eps = 2.0, 0.25
        ell = quiet_radii(g, d, eps)
        edges = list(zip(g.edge_u, g.edge_v))
        adj = adj_from_edges(g.n, edges)
        comp_of = connected_components(g).labels
        comp_sizes = np.bincount(comp_of)
        for v in range(0, g.n, 7):
            expect = heaviness_radius_naive(adj, v, d, eps,
                                            int(comp_sizes[comp_of[v]]))
            assert ell[v] == expect, f"vertex {v}"

    def test_epsilon_monotone(self):
        g, _ = gen_sbm(400, 4.0, 0.0, RngSeed(13, 1))
        lo = quiet_radii(g, 3.0, 0.2)
        hi = quiet_radii(g, 3.0, 0.8)
        assert np.all(hi <= lo)

    def test_validity_warning_below_floor(self):
        g = path_graph(4)
        with pytest.warns(EpsilonValidityWarning):
            compute_heaviness_radii(g, 5.0, 0.5)


class TestExcise:
    def test_all_light_bulk_is_whole_graph(self):
        g = path_graph(8)
        exc = quiet_excise(g, 2.0, 0.5)
        assert exc.near_forest.m == 0
        assert exc.bulk.m == g.m
        assert exc.boundary.size == 0

    def test_star_fully_excised(self):
        g = star_graph(7)
        exc = quiet_excise(g, 2.0, 0.5)
        assert exc.near_forest.m == 7
        assert exc.bulk.m == 0

    def test_edge_partition_exact(self):
        g, _ = gen_sbm(2000, 5.0, 0.0, RngSeed(77, 0))
        exc = quiet_excise(g, 5.0, 0.5)
        assert exc.near_forest.m + exc.bulk.m == g.m
        eh = set(zip(exc.near_forest.edge_u, exc.near_forest.edge_v))
        eb = set(zip(exc.bulk.edge_u, exc.bulk.edge_v))
        assert not (eh & eb)
        eg = set(zip(g.edge_u, g.edge_v))
        assert (eh | eb) == eg

    def test_ball_union_soundness(self):
        g, _ = gen_sbm(1500, 5.0, 0.0, RngSeed(78, 0))
        exc = quiet_excise(g, 5.0, 0.5)
        adj = adj_from_edges(g.n, list(zip(g.edge_u, g.edge_v)))
        eh = set(map(tuple, np.sort(
            np.stack([exc.near_forest.edge_u, exc.near_forest.edge_v], axis=1), axis=1)))
        for v in np.flatnonzero(exc.ell > 0):
            bv = ball_naive(adj, int(v), int(exc.ell[v]))
            for u, w in zip(g.edge_u, g.edge_v):
                if u in bv and w in bv:
                    assert (min(u, w), max(u, w)) in eh

    def test_bulk_degree_bound(self):
        g, _ = gen_sbm(3000, 5.0, 0.0, RngSeed(79, 0))
        exc = quiet_excise(g, 5.0, 0.5)
        assert np.all(exc.bulk.degrees <= exc.D)

    def test_idempotence_when_bulk_all_light(self):
        g, _ = gen_sbm(2000, 5.0, 0.0, RngSeed(80, 0))
        exc = quiet_excise(g, 5.0, 0.5)
        ell2 = quiet_radii(exc.bulk, 5.0, 0.5)
        if np.all(ell2 == 0):
            exc2 = quiet_excise(exc.bulk, 5.0, 0.5)
            assert exc2.near_forest.m == 0

    def test_boundary_definition(self):
        g, _ = gen_sbm(2000, 5.0, 0.0, RngSeed(81, 0))
        exc = quiet_excise(g, 5.0, 0.5)
        degb = exc.bulk.degrees
        degh = exc.near_forest.degrees
        expect = np.flatnonzero((degb > 0) & (degh > 0))
        assert np.array_equal(exc.boundary, expect)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0.25, 0.5, 1.0]))
    def test_partition_property(self, seed, eps):
        g, _ = gen_sbm(120, 4.0, 0.0, RngSeed(seed, 0))
        exc = quiet_excise(g, 3.0, eps)
        assert exc.near_forest.m + exc.bulk.m == g.m
        assert np.all(exc.bulk.degrees <= 3.0 * (1 + eps))


class TestNearForest:
    def test_forest_passes(self):
        g = graph_from_edges(6, [(0, 1), (1, 2), (3, 4)])
        rep = verify_near_forest(g)
        assert rep.passed and rep.max_excess == 0
        assert rep.isolated == 1

    def test_two_triangles_joined_fails(self):
        edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]
        rep = verify_near_forest(graph_from_edges(6, edges))
        assert not rep.passed
        assert rep.max_excess == 2

    def test_single_cycle_component_passes(self):
        rep = verify_near_forest(graph_from_edges(4, [(0, 1), (1, 2), (2, 0)]))
        assert rep.passed and rep.max_excess == 1


class TestPseudorandomCertificate:
    def test_single_edge_valid(self):
        g = graph_from_edges(2, [(0, 1)])
        cert = verify_pseudorandom(g, np.array([], dtype=np.int64), 2.0, 2.0)
        assert cert.valid

    def test_star_violation_at_center(self):
        g = star_graph(7)
        cert = verify_pseudorandom(g, np.array([], dtype=np.int64), 4.0, 2.0)
        assert not cert.valid
        v, r, size, bound, which = cert.violations[0]
        assert (v, r, size, which) == (0, 1, 8, "ball") and bound == 4.0

    def test_boundary_condition_checked(self):
        # Condition 2: at most D^r marked vertices within distance r.
        # A star center sees all 7 marked leaves at distance 1 > D^1 = 2.
        g = star_graph(7)
        marked = np.arange(1, 8)
        cert = verify_pseudorandom(g, marked, 10.0, 2.0)
        assert not cert.valid

    def test_observed_delta_certifies(self):
        g, _ = gen_sbm(2000, 5.0, 0.0, RngSeed(90, 0))
        exc = quiet_excise(g, 5.0, 0.5)
        if exc.near_forest.m:
            delta, v, r = observed_delta(exc.near_forest, exc.D)
            cert = verify_pseudorandom(exc.near_forest, exc.boundary,
                                       max(delta, 1.0), exc.D)
            ball_violations = [x for x in cert.violations if x[4] == "ball"]
            assert not ball_violations

    def test_observed_delta_star(self):
        # Star K_{1,7}: |B_1(center)| = 8, D^0 = 1, so delta = 8 at r = 1.
        delta, v, r = observed_delta(star_graph(7), 2.0)
        assert (delta, v, r) == (8.0, 0, 1)


class TestClusterGraph:
    def test_all_light_empty(self):
        g = path_graph(8)
        exc = quiet_excise(g, 2.0, 0.5)
        cg = build_cluster_graph(g, exc)
        assert cg.n_nodes == 0 and cg.n_edges == 0

    def test_two_disjoint_stars_isolated_nodes(self):
        # Two K_{1,7} stars far apart: both centers heavy, balls disjoint.
        edges = [(0, i) for i in range(1, 8)] + [(8, 8 + i) for i in range(1, 8)]
        g = graph_from_edges(16, edges)
        exc = quiet_excise(g, 2.0, 0.5)
        cg = build_cluster_graph(g, exc)
        assert cg.n_nodes == 2 and cg.n_edges == 0

    def test_two_stars_sharing_leaf_one_edge(self):
        # Hubs 0 and 1 share leaf 2 and carry three private leaves each.
        # Hub balls (radius 2) intersect; the shared leaf itself stays light
        # (its 2-ball has exactly 9 = 3^2 vertices).
        edges = [(0, i) for i in (2, 3, 4, 5)] + [(1, i) for i in (2, 6, 7, 8)]
        g = graph_from_edges(9, edges)
        exc = quiet_excise(g, 2.0, 0.5)
        assert list(np.flatnonzero(exc.ell > 0)) == [0, 1]
        cg = build_cluster_graph(g, exc)
        assert cg.n_nodes == 2
        assert cg.n_edges == 1
        assert cg.edge_weight[0] == exc.ell[0] + exc.ell[1]
        assert np.allclose(cg.node_weight,
                           (1 + exc.epsilon) ** exc.ell[cg.nodes])


class TestComponentStats:
    def test_empty_near_forest(self):
        g = path_graph(5)
        exc = quiet_excise(g, 2.0, 0.5)
        cg = build_cluster_graph(g, exc)
        stats = component_stats(exc.near_forest, cg)
        assert stats.components == ()
        assert stats.max_size == 0
        assert stats.sum_sq_nontrivial == 0
        assert stats.weighted_cluster_diameter == 0.0

    def test_five_path_component_diameter(self):
        h = path_graph(5)
        cg = build_cluster_graph(h, quiet_excise(h, 2.0, 0.5))
        stats = component_stats(h, cg)
        assert len(stats.components) == 1
        size, m, excess, diam = stats.components[0]
        assert (size, m, excess, diam) == (5, 4, 0, 4)
        assert stats.sum_sq_nontrivial == 25

    def test_sum_sq_counts_only_nontrivial(self):
        h = graph_from_edges(7, [(0, 1), (2, 3), (3, 4)])
        cg = build_cluster_graph(h, quiet_excise(h, 2.0, 0.5))
        stats = component_stats(h, cg)
        assert stats.sum_sq_nontrivial == 4 + 9
