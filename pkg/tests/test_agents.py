"""Agent act/observe contracts across bandit and saddle kinds."""

import math

import numpy as np
import pytest

from optbandits.agents import (
    AgentSpec,
    act,
    exp3_defaults,
    init_bandit_state,
    init_saddle_state,
    observe,
)
from optbandits.optimism import Policy, SolverConfig, ts_policy_mc
from optbandits.posteriors import GaussianPosterior, PosteriorMatrix, RngStream
from optbandits.saddle import ConstrainedBandit, Simplex, counterexample_problem


class TestAct:
    def test_ts_single_arm(self):
        spec = AgentSpec("ts")
        state = init_bandit_state(spec, 1)
        np.testing.assert_array_equal(act(spec, state, RngStream(0)).probs, [1.0])

    def test_ucb_round_one_tie_breaks_low(self):
        spec = AgentSpec("ucb")
        state = init_bandit_state(spec, 4)
        pol = act(spec, state, RngStream(0))
        np.testing.assert_array_equal(pol.probs, [1.0, 0.0, 0.0, 0.0])

    def test_ucb_budget_grows_with_round(self):
        spec = AgentSpec("ucb")
        state = init_bandit_state(spec, 2)
        # arm 0 well-observed at a low mean; arm 1 untouched with a lower prior mean
        state = observe(spec, state, 0, -0.1)
        for _ in range(30):
            state = observe(spec, state, 0, -0.1)
        pol = act(spec, state, RngStream(0))
        assert pol.probs[1] == 1.0  # uncertainty bonus dominates at log t

    def test_vbos_deterministic_and_consumes_no_randomness(self):
        spec = AgentSpec("vbos")
        state = init_bandit_state(spec, 3)
        state = observe(spec, state, 1, 2.0)
        rng = RngStream(7)
        before = rng.generator.bit_generator.state["state"]["state"]
        pol1 = act(spec, state, rng)
        after = rng.generator.bit_generator.state["state"]["state"]
        assert before == after
        pol2 = act(spec, state, RngStream(99))
        np.testing.assert_array_equal(pol1.probs, pol2.probs)

    def test_ts_frequencies_match_probability_of_optimality(self):
        spec = AgentSpec("ts")
        state = init_bandit_state(spec, 3)
        for arm, r in ((0, 1.1), (1, 0.4), (2, -0.3), (0, 0.9)):
            state = observe(spec, state, arm, r)
        rng = RngStream(5)
        counts = np.zeros(3)
        n = 100_000
        for _ in range(n):
            counts += act(spec, state, rng).probs
        freq = counts / n
        ref = ts_policy_mc(state.posteriors, RngStream(6), 200_000).probs
        se = np.sqrt(ref * (1.0 - ref) / n)
        assert np.all(np.abs(freq - ref) <= 3.0 * se + 1e-4)

    def test_saddle_vbos_on_counterexample(self):
        spec = AgentSpec("saddle_vbos", solver_cfg=SolverConfig(tolerance=1e-10))
        prob = counterexample_problem()
        state = init_saddle_state(spec, prob.posteriors, prob.dual_set)
        pol = act(spec, state, RngStream(0))
        assert pol.probs[0] >= 1.0 - 1e-6

    def test_saddle_ts_counterexample_two_policies(self):
        spec = AgentSpec("saddle_ts")
        prob = counterexample_problem()
        state = init_saddle_state(spec, prob.posteriors, prob.dual_set)
        rng = RngStream(1)
        n = 10_000
        half_half = 0
        for _ in range(n):
            pol = act(spec, state, rng)
            if abs(pol.probs[0] - 0.5) < 1e-6:
                half_half += 1
            else:
                assert pol.probs[0] > 1.0 - 1e-6
        se = math.sqrt(0.25 / n)
        assert abs(half_half / n - 0.5) <= 3.0 * se


class TestObserve:
    def test_bandit_update_is_local(self):
        spec = AgentSpec("ts")
        state = init_bandit_state(spec, 3)
        out = observe(spec, state, 2, 1.5)
        assert out.posteriors[2].n_obs == 1
        assert out.posteriors[0].n_obs == 0
        assert out.posteriors[1].n_obs == 0
        assert out.round == state.round + 1

    def test_game_update_touches_one_cell(self):
        spec = AgentSpec("saddle_ts")
        matrix = PosteriorMatrix.iid(2, 2, 0.0, 1.0, 1.0)
        state = init_saddle_state(spec, matrix, Simplex(2))
        out = observe(spec, state, None, (0, 1, 0.7))
        assert out.matrix.cell(0, 1).n_obs == 1
        assert out.matrix.cell(0, 0).n_obs == 0

    def test_constrained_update_touches_whole_column(self):
        spec = AgentSpec("saddle_vbos")
        matrix = PosteriorMatrix.iid(3, 2, 0.0, 1.0, 1.0)
        state = init_saddle_state(spec, matrix, ConstrainedBandit(3, 2.0))
        out = observe(spec, state, None, (1, np.array([0.1, -0.2, 0.3])))
        assert [out.matrix.cell(i, 1).n_obs for i in range(3)] == [1, 1, 1]
        assert [out.matrix.cell(i, 0).n_obs for i in range(3)] == [0, 0, 0]

    def test_out_of_range_action(self):
        spec = AgentSpec("ts")
        state = init_bandit_state(spec, 2)
        with pytest.raises(ValueError):
            observe(spec, state, 5, 1.0)


class TestExp3:
    def test_defaults(self):
        rate, mix = exp3_defaults(10, 1000)
        assert rate == pytest.approx(math.sqrt(math.log(10) / (10 * 1000)))
        assert 0.0 < mix < 1.0

    def test_policy_mixes_uniform(self):
        spec = AgentSpec("exp3", exp3_mix=0.2, horizon=100)
        state = init_bandit_state(spec, 4)
        pol = act(spec, state, RngStream(0))
        np.testing.assert_allclose(pol.probs, np.full(4, 0.25))
        state = observe(spec, state, (pol, 2), 3.0)
        pol2 = act(spec, state, RngStream(0))
        assert pol2.probs[2] > 0.25
        assert pol2.probs.min() >= 0.2 / 4 - 1e-12

    def test_weights_stay_positive_finite_under_adversarial_rewards(self):
        spec = AgentSpec("exp3", horizon=100_000)
        state = init_bandit_state(spec, 5)
        rng = RngStream(3)
        for t in range(100_000):
            pol = act(spec, state, rng)
            a = rng.choice(5, p=pol.probs)
            reward = 5.0 if (t % 17 == a) else -5.0
            state = observe(spec, state, (pol, a), reward)
            if t % 20_000 == 0:
                assert np.isfinite(state.exp3_weights).all()
                assert state.exp3_weights.min() > 0.0
        assert np.isfinite(state.exp3_weights).all()
        assert state.exp3_weights.min() > 0.0

    def test_game_observation_uses_played_policy(self):
        spec = AgentSpec("exp3", horizon=100)
        matrix = PosteriorMatrix.iid(2, 3, 0.0, 1.0, 1.0)
        state = init_saddle_state(spec, matrix, Simplex(2))
        pol = act(spec, state, RngStream(0))
        out = observe(spec, state, pol, (1, 2, 2.5))
        before = state.exp3_weights / state.exp3_weights.sum()
        after = out.exp3_weights / out.exp3_weights.sum()
        assert after[2] > before[2]
        assert out.round == 2

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            AgentSpec("exp3", exp3_mix=1.0)
        with pytest.raises(ValueError):
            AgentSpec("exp3", exp3_rate=0.0)
        with pytest.raises(ValueError):
            AgentSpec("nonsense")
