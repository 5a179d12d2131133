"""Simulator: determinism, conditional independence, exact joint law."""

import math

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from neurograph import (
    CapabilityError,
    InitMode,
    InputError,
    SimConfig,
    SpikeSample,
    WeightMatrix,
    admissible_initial_past,
    exact_transition_distribution,
    membrane_potential,
    rng_for,
    sigmoid,
    simulate,
)
from neurograph.experiments import scenario_matrix


class TestInitialPast:
    def test_all_spike_at_zero(self):
        past = admissible_initial_past(3, 4)
        assert past.shape == (3, 4)
        assert past.sum() == 3
        assert (past[:, 3] == 1).all()

    def test_bernoulli_conditioned_every_row_spikes(self):
        for seed in range(5):
            past = admissible_initial_past(
                6, 5, InitMode.BERNOULLI_CONDITIONED, rng_for(seed), p=0.2
            )
            assert past.shape == (6, 5)
            assert past.any(axis=1).all()

    def test_single_bin_must_spike(self):
        for mode in InitMode:
            past = admissible_initial_past(1, 1, mode, rng_for(0))
            assert past[0, 0] == 1

    def test_requires_generator_for_bernoulli(self):
        with pytest.raises(InputError):
            admissible_initial_past(2, 2, InitMode.BERNOULLI_CONDITIONED)


class TestSimulate:
    def test_zero_weights_rate_is_half(self):
        w = WeightMatrix.zeros(3)
        s = simulate(w, SimConfig(horizon=10_000, memory_cap=50, seed=123))
        observed = s.data[:, 50:]
        assert observed.shape == (3, 10_000)
        assert abs(observed.mean() - 0.5) < 0.02

    def test_deterministic_reruns(self):
        w = scenario_matrix(1)
        cfg = SimConfig(horizon=100, memory_cap=50, seed=42)
        a = simulate(w, cfg)
        b = simulate(w, cfg)
        np.testing.assert_array_equal(a.data, b.data)

    def test_different_seeds_differ(self):
        w = WeightMatrix.zeros(2)
        a = simulate(w, SimConfig(horizon=200, memory_cap=10, seed=1))
        b = simulate(w, SimConfig(horizon=200, memory_cap=10, seed=2))
        assert (a.data != b.data).any()

    def test_prefix_property(self):
        # A shorter run is the exact prefix of a longer one (same stream),
        # which is what lets one replica share a single simulation across
        # the whole horizon grid.
        w = scenario_matrix(1)
        small = simulate(w, SimConfig(horizon=500, memory_cap=50, seed=9))
        big = simulate(w, SimConfig(horizon=2000, memory_cap=50, seed=9))
        np.testing.assert_array_equal(small.data, big.data[:, : 50 + 500])

    def test_conditional_frequency_matches_rate(self):
        # One strong directed weight: P(spike | reset two bins ago and the
        # presynaptic neuron fired last bin) = sigmoid(10/2) = sigmoid(5).
        w = np.zeros((2, 2))
        w[1, 0] = 10.0
        s = simulate(
            WeightMatrix(w), SimConfig(horizon=60_000, memory_cap=30, seed=77)
        )
        x = s.data
        k = 30
        hits = spikes = 0
        for t in range(2, s.horizon + 1):
            r = k + t - 1
            if x[0, r - 1] == 0 and x[0, r - 2] == 1 and x[1, r - 1] == 1:
                hits += 1
                spikes += int(x[0, r])
        assert hits > 3000
        freq = spikes / hits
        expected = sigmoid(5.0)
        # 5 sigma of binomial noise
        assert abs(freq - expected) < 5 * math.sqrt(expected * (1 - expected) / hits)

    def test_conditional_independence_chi2(self):
        # Joint draws factorize given the past: chi-square independence
        # test on the 2x2 table conditioned on one fixed recent history.
        w = np.zeros((2, 2))
        w[1, 0] = 1.0
        w[0, 1] = -0.5
        s = simulate(
            WeightMatrix(w), SimConfig(horizon=100_000, memory_cap=20, seed=5)
        )
        x = s.data
        k = 20
        table = np.zeros((2, 2), dtype=int)
        for t in range(3, s.horizon + 1):
            r = k + t - 1
            # history: both spiked at t-2, only neuron 1 at t-1
            if (
                x[0, r - 2] == 1
                and x[1, r - 2] == 1
                and x[0, r - 1] == 0
                and x[1, r - 1] == 1
            ):
                table[x[0, r], x[1, r]] += 1
        assert table.sum() > 2000
        _, p_value, _, _ = chi2_contingency(table, correction=False)
        assert p_value > 0.001

    def test_rate_params_bracket_holds_empirically(self):
        w = scenario_matrix(1)
        delta = w.rate_floor()
        s = simulate(w, SimConfig(horizon=2000, memory_cap=50, seed=3))
        for t in range(1, 200):
            for i in range(5):
                v = membrane_potential(s, w, i, t)
                assert delta <= sigmoid(v) <= 1 - delta


class TestExactTransition:
    def test_uniform_for_zero_weights(self):
        s = simulate(WeightMatrix.zeros(2), SimConfig(horizon=5, memory_cap=3, seed=0))
        dist = exact_transition_distribution(s, WeightMatrix.zeros(2), 3)
        np.testing.assert_allclose(dist, [0.25] * 4, rtol=1e-15)

    def test_single_neuron(self):
        w = WeightMatrix.zeros(1)
        s = simulate(w, SimConfig(horizon=6, memory_cap=2, seed=1))
        dist = exact_transition_distribution(s, w, 4)
        p = sigmoid(membrane_potential(s, w, 0, 4))
        np.testing.assert_allclose(dist, [1 - p, p], rtol=1e-15)

    def test_product_structure_three_neurons(self):
        w3 = WeightMatrix(scenario_matrix(1).weights[:3, :3].copy())
        s = simulate(w3, SimConfig(horizon=50, memory_cap=10, seed=2))
        t = 37
        dist = exact_transition_distribution(s, w3, t)
        assert math.isclose(dist.sum(), 1.0, abs_tol=1e-12)
        # independent per-neuron product oracle
        probs = [
            sigmoid(membrane_potential(s, w3, i, t)) for i in range(3)
        ]
        for config in range(8):
            expected = 1.0
            for i in range(3):
                bit = (config >> i) & 1
                expected *= probs[i] if bit else 1 - probs[i]
            assert math.isclose(dist[config], expected, rel_tol=1e-12)

    def test_sums_to_one_many_histories(self):
        w = scenario_matrix(1)
        s = simulate(w, SimConfig(horizon=200, memory_cap=50, seed=8))
        for t in range(1, 201, 7):
            dist = exact_transition_distribution(s, w, t)
            assert abs(dist.sum() - 1.0) < 1e-12

    def test_guard_on_large_networks(self):
        w = WeightMatrix.zeros(13)
        s = simulate(w, SimConfig(horizon=3, memory_cap=2, seed=0))
        with pytest.raises(CapabilityError):
            exact_transition_distribution(s, w, 1)


class TestScenario4Dynamics:
    def test_sample_is_admissible_and_alive(self):
        w = scenario_matrix(4, base_seed=0)
        s = simulate(w, SimConfig(horizon=1000, memory_cap=50, seed=0))
        assert s.is_admissible()
        rates = s.data[:, 50:].mean(axis=1)
        assert (rates > 0.05).all() and (rates < 0.95).all()
