import numpy as np
import pytest

from conftest import graph_from_edges, random_model, random_tree_edges
from oracles import tree_cov_naive, tv_naive
from spinmix.ising import (BlockPartition, IsingModel, all_minus, all_plus,
                           block_glauber_step, conditional_field, gauge_transform,
                           glauber_flip_probability, glauber_step, random_config,
                           resample_block, run_chain, tree_covariance_closed_form,
                           tree_gauge, tv_distance)
from spinmix.oracle import ExactOracle, spins_to_state
from spinmix.rng import RngSeed


class TestGlauberStep:
    def test_free_spin_is_fair_coin(self):
        model = IsingModel(np.zeros((1, 1)), np.zeros(1))
        state = all_plus(1)
        assert glauber_flip_probability(model, state, 0) == 0.5

    def test_two_spin_stay_probability(self):
        beta = 0.9
        g = graph_from_edges(2, [(0, 1, beta)])
        model = IsingModel(g, np.zeros(2))
        state = all_plus(2)
        expect = np.exp(beta) / (np.exp(beta) + np.exp(-beta))
        assert abs(glauber_flip_probability(model, state, 0) - expect) < 1e-15

    def test_step_keeps_cached_sums(self, rng):
        model = random_model(8, rng)
        state = random_config(8, rng)
        for _ in range(200):
            glauber_step(model, state, rng)
        assert state.sums_consistent()

    def test_marginals_match_oracle(self):
        gen = np.random.default_rng(6021)
        model = random_model(8, gen, density=0.45, scale=0.5)
        orc = ExactOracle(model)
        from spinmix.diagnostics import empirical_marginals
        est, err = empirical_marginals(model, 400000, 7, 20000, RngSeed(3, 10))
        assert np.all(np.abs(est - orc.mean) < 3.5 * err + 1e-12)


class TestRunChain:
    def test_zero_steps_identity(self, rng):
        model = random_model(5, rng)
        init = random_config(5, rng)
        res = run_chain(model, init, 0, rng)
        assert np.array_equal(res.final.spins, init.spins)

    def test_saturating_field_pins_all_plus(self):
        n = 12
        model = IsingModel(np.zeros((n, n)), np.full(n, 50.0))
        res = run_chain(model, all_minus(n), 100 * n, RngSeed(1, 1))
        assert np.all(res.final.spins == 1)

    def test_fixed_seed_reproducible_trace(self, rng):
        model = random_model(7, rng)
        init = random_config(7, rng)
        a = run_chain(model, init, 5000, RngSeed(42, 0), observers=("mag", "energy"),
                      stride=100)
        b = run_chain(model, init, 5000, RngSeed(42, 0), observers=("mag", "energy"),
                      stride=100)
        assert np.array_equal(a.trace["mag"], b.trace["mag"])
        assert np.array_equal(a.trace["energy"], b.trace["energy"])
        assert np.array_equal(a.observed_at, b.observed_at)
        assert np.array_equal(a.final.spins, b.final.spins)

    def test_stride_layout(self, rng):
        model = random_model(4, rng)
        res = run_chain(model, all_plus(4), 1000, rng, observers=("mag",), stride=250)
        assert list(res.observed_at) == [0, 250, 500, 750, 1000]

    def test_overlap_observer(self, rng):
        model = random_model(4, rng)
        ref = np.array([1, -1, 1, -1], dtype=np.int8)
        res = run_chain(model, all_plus(4), 10, rng, observers=("overlap",),
                        stride=10, reference=ref)
        assert abs(res.trace["overlap"][0] - 0.0) < 1e-15


class TestConditionalField:
    def test_no_outside_interactions(self, rng):
        g = graph_from_edges(4, [(0, 1, 0.5)])
        model = IsingModel(g, np.array([0.1, -0.2, 0.3, 0.4]))
        state = all_plus(4)
        hp = conditional_field(model, np.array([0, 1]), state)
        assert np.allclose(hp, [0.1, -0.2], atol=1e-15)

    def test_single_pinned_neighbor(self):
        g = graph_from_edges(2, [(0, 1, 0.7)])
        model = IsingModel(g, np.array([0.2, 0.0]))
        state = all_minus(2)
        hp = conditional_field(model, np.array([0]), state)
        assert abs(hp[0] - (0.2 - 0.7)) < 1e-15

    def test_random_pinning_against_dense(self, rng):
        model = random_model(12, rng, density=0.4)
        state = random_config(12, rng)
        block = np.array([2, 5, 6, 9])
        hp = conditional_field(model, block, state)
        J = model.dense_coupling()
        x = state.spins.astype(float)
        outside = np.setdiff1d(np.arange(12), block)
        expect = model.h[block] + J[np.ix_(block, outside)] @ x[outside]
        assert np.max(np.abs(hp - expect)) < 1e-12


class TestBlockDynamics:
    def test_singleton_blocks_match_single_site_conditional(self, rng):
        model = random_model(5, rng)
        state = random_config(5, rng)
        # Exact conditional of a singleton block is the heat-bath law.
        p_plus = glauber_flip_probability(model, state, 3)
        hp = conditional_field(model, np.array([3]), state)
        assert abs(1.0 / (1.0 + np.exp(-2 * hp[0])) - p_plus) < 1e-14

    def test_independent_two_spin_blocks_product_law(self):
        h = np.array([0.4, -0.3, 0.0, 1.0])
        model = IsingModel(np.zeros((4, 4)), h)
        state = all_minus(4)
        counts = np.zeros(4)
        gen = np.random.default_rng(8)
        n_draws = 40000
        for _ in range(n_draws):
            s = state.copy()
            resample_block(model, np.array([0, 1]), s, gen)
            counts += (s.spins[:4] == 1)
        p = counts / n_draws
        expect = 1.0 / (1.0 + np.exp(-2 * h))
        # block {0,1} resampled from its product law; {2,3} untouched
        assert np.max(np.abs(p[:2] - expect[:2])) < 0.01
        assert p[2] == 0.0 and p[3] == 0.0

    def test_block_chain_matches_oracle_distribution(self):
        gen = np.random.default_rng(99)
        model = random_model(6, gen, density=0.5, scale=0.4)
        orc = ExactOracle(model)
        part = BlockPartition(6, [np.arange(3), np.array([3]), np.array([4]),
                                  np.array([5])])
        state = random_config(6, gen)
        burn, draws, stride = 1000, 15000, 2
        for _ in range(burn):
            block_glauber_step(model, part, state, gen)
        freq = np.zeros(64)
        for t in range(draws * stride):
            block_glauber_step(model, part, state, gen)
            if t % stride == 0:
                freq[spins_to_state(state.spins)] += 1
        freq /= freq.sum()
        # correlated draws, so only a loose TV bound is meaningful here
        assert tv_naive(freq, orc.probs) < 0.07

    def test_partition_validation(self):
        with pytest.raises(ValueError):
            BlockPartition(4, [np.array([0, 1]), np.array([1, 2, 3])])
        with pytest.raises(ValueError):
            BlockPartition(4, [np.array([0, 1])])

    def test_oversized_block_rejected(self, rng):
        model = IsingModel(np.zeros((21, 21)), np.zeros(21))
        with pytest.raises(ValueError):
            resample_block(model, np.arange(21), all_plus(21), rng)


class TestTvDistance:
    def test_equal_is_zero(self):
        p = np.array([0.25, 0.25, 0.25, 0.25])
        assert tv_distance(p, p) == 0.0

    def test_disjoint_point_masses(self):
        assert tv_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0

    def test_quarter_case(self):
        assert abs(tv_distance(np.array([0.5, 0.5]), np.array([0.75, 0.25])) - 0.25) < 1e-15

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            tv_distance(np.array([0.7, 0.7]), np.array([0.5, 0.5]))


class TestGauge:
    def test_identity_signs(self, rng):
        model = random_model(6, rng)
        same = gauge_transform(model, np.ones(6))
        assert np.max(np.abs(same.dense_coupling() - model.dense_coupling())) == 0.0
        assert np.array_equal(same.h, model.h)

    def test_two_spin_sign_flip(self):
        g = graph_from_edges(2, [(0, 1, -0.8)])
        model = IsingModel(g, np.zeros(2))
        flipped = gauge_transform(model, np.array([1, -1]))
        assert abs(flipped.dense_coupling()[0, 1] - 0.8) < 1e-15

    def test_invariants_and_conjugated_covariance(self, rng):
        model = random_model(10, rng, density=0.35)
        signs = rng.choice([-1.0, 1.0], size=10)
        other = gauge_transform(model, signs)
        a, b = ExactOracle(model), ExactOracle(other)
        assert abs(a.logZ - b.logZ) < 1e-12
        D = np.diag(signs)
        assert np.max(np.abs(b.cov - D @ a.cov @ D)) < 1e-12
        # the argmax state maps coordinatewise by D
        sa = np.argmax(a.probs)
        sb = np.argmax(b.probs)
        from spinmix.oracle import state_spins
        xa = state_spins(np.array([sa]), 10)[0].astype(float)
        xb = state_spins(np.array([sb]), 10)[0].astype(float)
        assert np.array_equal(xb, signs * xa)


class TestTreeGauge:
    def test_all_positive_tree(self, rng):
        g = graph_from_edges(5, [(0, 1, 0.3), (1, 2, 0.2), (1, 3, 0.9), (3, 4, 0.1)])
        assert np.all(tree_gauge(g) == 1)

    def test_two_path_negative(self):
        g = graph_from_edges(2, [(0, 1, -0.4)])
        signs = tree_gauge(g)
        assert list(signs) == [1, -1]

    def test_random_signed_tree_all_nonnegative(self, rng):
        edges = random_tree_edges(50, rng)
        g = graph_from_edges(50, edges)
        signs = tree_gauge(g).astype(np.float64)
        w = g.edge_w * signs[g.edge_u] * signs[g.edge_v]
        assert np.all(w >= 0)

    def test_rejects_non_tree(self):
        g = graph_from_edges(3, [(0, 1), (1, 2), (0, 2)])
        with pytest.raises(ValueError):
            tree_gauge(g)

    def test_near_tree_skip_edge(self):
        g = graph_from_edges(3, [(0, 1, -0.5), (1, 2, -0.5), (0, 2, -0.5)])
        signs = tree_gauge(g, skip_edge=2).astype(np.float64)
        w = g.edge_w * signs[g.edge_u] * signs[g.edge_v]
        assert np.all(w[:2] >= 0)


class TestTreeCovariance:
    def test_single_edge(self):
        beta = 0.45
        g = graph_from_edges(2, [(0, 1, beta)])
        cov = tree_covariance_closed_form(g)
        assert abs(cov[0, 1] - np.tanh(beta)) < 1e-15

    def test_three_path_product(self):
        b1, b2 = 0.3, 0.7
        g = graph_from_edges(3, [(0, 1, b1), (1, 2, b2)])
        cov = tree_covariance_closed_form(g)
        assert abs(cov[0, 2] - np.tanh(b1) * np.tanh(b2)) < 1e-15

    def test_matches_naive_and_oracle(self, rng):
        for n in (4, 8, 12):
            edges = random_tree_edges(n, rng)
            g = graph_from_edges(n, edges)
            cov = tree_covariance_closed_form(g)
            assert np.max(np.abs(cov - tree_cov_naive(n, edges))) < 1e-12
            orc = ExactOracle(IsingModel(g, np.zeros(n)))
            assert np.max(np.abs(cov - orc.cov)) < 1e-10

    def test_rejects_cycle(self):
        g = graph_from_edges(3, [(0, 1), (1, 2), (0, 2)])
        with pytest.raises(ValueError):
            tree_covariance_closed_form(g)


class TestMeasureProperties:
    def test_ferromagnetic_covariance_nonnegative(self, rng):
        # nonnegative couplings with a cycle and arbitrary fields
        edges = [(0, 1, 0.5), (1, 2, 0.3), (2, 3, 0.8), (3, 0, 0.2),
                 (2, 4, 0.6), (4, 5, 0.4), (5, 6, 0.9)]
        g = graph_from_edges(7, edges)
        h = rng.standard_normal(7)
        orc = ExactOracle(IsingModel(g, h))
        assert orc.cov.min() > -1e-12

    def test_field_shrinks_ferromagnetic_covariance(self, rng):
        edges = [(u, v, abs(w)) for u, v, w in random_tree_edges(6, rng)]
        g = graph_from_edges(6, edges)
        h = 0.7 * rng.standard_normal(6)
        at_h = ExactOracle(IsingModel(g, h)).cov
        at_0 = ExactOracle(IsingModel(g, np.zeros(6))).cov
        assert np.all(at_h <= at_0 + 1e-12)

    def test_bounded_density_variance_sandwich(self, rng):
        # nu = mu tilted by a bounded factor; variances compare within c.
        model = random_model(6, rng, density=0.5)
        orc = ExactOracle(model)
        tilt = 0.35 * rng.standard_normal(orc.probs.size)
        nu = orc.probs * np.exp(tilt)
        nu /= nu.sum()
        ratio = nu / orc.probs
        c = float(max(ratio.max(), 1.0 / ratio.min()))
        for _ in range(20):
            f = rng.standard_normal(orc.probs.size)
            vm = float(orc.probs @ f ** 2 - (orc.probs @ f) ** 2)
            vn = float(nu @ f ** 2 - (nu @ f) ** 2)
            assert vm / c - 1e-12 <= vn <= c * vm + 1e-12
