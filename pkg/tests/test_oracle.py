import numpy as np
import pytest

from conftest import graph_from_edges, random_model, random_tree_edges
from oracles import brute_force_ising, glauber_matrix_naive
from spinmix.ising import IsingModel
from spinmix.oracle import ExactOracle, exact_oracle_build, spins_to_state, state_spins


class TestStateCoding:
    def test_round_trip(self):
        for k in range(16):
            s = state_spins(np.array([k]), 4)[0]
            assert spins_to_state(s) == k

    def test_bit_i_is_spin_i(self):
        s = state_spins(np.array([0b0101]), 4)[0]
        assert list(s) == [1, -1, 1, -1]


class TestClosedForms:
    def test_single_free_spin(self):
        orc = ExactOracle(IsingModel(np.zeros((1, 1)), np.zeros(1)))
        assert abs(orc.logZ - np.log(2.0)) < 1e-14
        assert abs(orc.mean[0]) < 1e-14
        assert abs(orc.cov[0, 0] - 1.0) < 1e-14

    def test_two_spins_coupled(self):
        beta = 0.37
        g = graph_from_edges(2, [(0, 1, beta)])
        orc = ExactOracle(IsingModel(g, np.zeros(2)))
        assert abs(np.exp(orc.logZ) - (2 * np.exp(beta) + 2 * np.exp(-beta))) < 1e-12
        assert abs(orc.cov[0, 1] - np.tanh(beta)) < 1e-14

    def test_diagonal_shift(self, rng):
        model = random_model(6, rng)
        J = model.dense_coupling()
        c = 0.8
        shifted = IsingModel(J + c * np.eye(6), model.h)
        a, b = ExactOracle(model), ExactOracle(shifted)
        assert abs(b.logZ - a.logZ - c * 6 / 2) < 1e-12
        assert np.max(np.abs(a.probs - b.probs)) < 1e-12


class TestAgainstBruteForce:
    def test_random_models(self, rng):
        for n in (2, 3, 5, 7):
            model = random_model(n, rng, density=0.6)
            orc = ExactOracle(model)
            logZ, probs, mean, cov = brute_force_ising(model.dense_coupling(), model.h)
            assert abs(orc.logZ - logZ) < 1e-11
            assert np.max(np.abs(orc.probs - probs)) < 1e-12
            assert np.max(np.abs(orc.mean - mean)) < 1e-11
            assert np.max(np.abs(orc.cov - cov)) < 1e-11

    def test_probabilities_normalized_cov_psd(self, rng):
        for _ in range(5):
            model = random_model(8, rng, density=0.4)
            orc = ExactOracle(model)
            assert abs(orc.probs.sum() - 1.0) < 1e-12
            assert np.max(np.abs(orc.cov - orc.cov.T)) == 0.0
            assert np.linalg.eigvalsh(orc.cov)[0] > -1e-10

    def test_size_cap(self):
        with pytest.raises(ValueError):
            exact_oracle_build(IsingModel(np.zeros((21, 21)), np.zeros(21)))


class TestTransitionMatrix:
    def test_against_naive_matrix(self, rng):
        model = random_model(4, rng)
        P = ExactOracle(model).transition_matrix().toarray()
        ref = glauber_matrix_naive(model.dense_coupling(), model.h)
        assert np.max(np.abs(P - ref)) < 1e-13

    def test_rows_sum_to_one(self, rng):
        model = random_model(6, rng)
        P = ExactOracle(model).transition_matrix()
        assert np.max(np.abs(P.sum(axis=1) - 1.0)) < 1e-12

    def test_detailed_balance_and_stationarity(self, rng):
        for _ in range(6):
            model = random_model(6, rng, density=0.5)
            orc = ExactOracle(model)
            P = orc.transition_matrix().toarray()
            mu = orc.probs
            flow = mu[:, None] * P
            assert np.max(np.abs(flow - flow.T)) < 1e-12
            assert np.max(np.abs(mu @ P - mu)) < 1e-12

    def test_symmetrized_kernel_similar_to_p(self, rng):
        model = random_model(5, rng)
        orc = ExactOracle(model)
        S = orc.symmetrized_kernel().toarray()
        assert np.max(np.abs(S - S.T)) < 1e-12
        half = np.sqrt(orc.probs)
        P = orc.transition_matrix().toarray()
        assert np.max(np.abs(half[:, None] * P / half[None, :] - S)) < 1e-10

    def test_table_axis_convention(self, rng):
        model = random_model(3, rng)
        orc = ExactOracle(model)
        t = orc.table()
        # spin vector (+1, -1, +1) is state 0b101; axis index 1 means +1.
        assert abs(t[1, 0, 1] - orc.probs[0b101]) == 0.0

    def test_sampler_matches_distribution(self, rng):
        model = random_model(4, rng)
        orc = ExactOracle(model)
        k = 200000
        states = orc.sample_states(k, rng)
        freq = np.bincount(states, minlength=16) / k
        sig = np.sqrt(orc.probs * (1 - orc.probs) / k)
        assert np.all(np.abs(freq - orc.probs) < 5 * sig + 1e-4)
