"""Optimism map evaluation, simplex maximization, and the baselines."""

import math

import numpy as np
import pytest

from optbandits.optimism import (
    Policy,
    SolverConfig,
    entropy,
    expected_max_mc,
    in_optimistic_set,
    klearning_policy,
    optimism_gradient,
    optimism_map,
    ts_policy_mc,
    vbos_policy,
)
from optbandits.posteriors import GaussianPosterior, RngStream
from optbandits.verify import finite_difference_gradient


def iid_posts(A, mean=0.0, var=1.0):
    return [GaussianPosterior(mean, var, 1.0)] * A


def random_posts(rng, A, var_lo=0.1, var_hi=2.0):
    return [GaussianPosterior(float(rng.normal()), float(rng.uniform(var_lo, var_hi)), 1.0)
            for _ in range(A)]


class TestPolicy:
    def test_validation(self):
        with pytest.raises(ValueError):
            Policy(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            Policy(np.array([-0.2, 1.2]))
        p = Policy.from_array([2.0, 2.0])
        np.testing.assert_allclose(p.probs, [0.5, 0.5])

    def test_point_mass(self):
        p = Policy.point_mass(1, 3)
        np.testing.assert_array_equal(p.probs, [0.0, 1.0, 0.0])


class TestOptimismMap:
    def test_single_arm_is_mean(self):
        ev = optimism_map([GaussianPosterior(0.8, 2.0, 1.0)], Policy(np.ones(1)))
        assert ev.value == pytest.approx(0.8)
        assert ev.explore == 0.0

    def test_uniform_iid_closed_form(self):
        ev = optimism_map(iid_posts(3), Policy(np.full(3, 1.0 / 3.0)))
        assert ev.value == pytest.approx(math.sqrt(2.0 * math.log(3.0)), abs=1e-12)

    def test_zero_probability_arm_contributes_nothing(self):
        posts = [GaussianPosterior(1.0, 1.0, 1.0), GaussianPosterior(-1.0, 1.0, 1.0)]
        ev = optimism_map(posts, Policy(np.array([1.0, 0.0])))
        assert ev.value == pytest.approx(1.0)

    def test_decomposition_invariants(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            posts = random_posts(rng, int(rng.integers(2, 7)))
            pol = Policy.from_array(rng.uniform(0.01, 1.0, size=len(posts)))
            ev = optimism_map(posts, pol)
            assert ev.value == pytest.approx(ev.exploit + ev.explore, abs=1e-9)
            assert ev.explore >= 0.0
            assert ev.per_arm_bonus.min() >= 0.0

    def test_concavity(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            posts = random_posts(rng, 4)
            p = Policy.from_array(rng.uniform(0.01, 1.0, size=4))
            q = Policy.from_array(rng.uniform(0.01, 1.0, size=4))
            t = float(rng.uniform())
            mid = Policy.from_array(t * p.probs + (1.0 - t) * q.probs)
            lhs = optimism_map(posts, mid).value
            rhs = t * optimism_map(posts, p).value + (1.0 - t) * optimism_map(posts, q).value
            assert lhs >= rhs - 1e-9

    def test_translation_equivariance(self):
        rng = np.random.default_rng(8)
        posts = random_posts(rng, 5)
        shifted = [GaussianPosterior(p.prior_mean + 2.5, p.prior_var, p.noise_var)
                   for p in posts]
        pol = Policy.from_array(rng.uniform(0.1, 1.0, size=5))
        assert optimism_map(shifted, pol).value == pytest.approx(
            optimism_map(posts, pol).value + 2.5, abs=1e-9)
        a = vbos_policy(posts).policy.probs
        b = vbos_policy(shifted).policy.probs
        np.testing.assert_allclose(a, b, atol=1e-6)


class TestGradient:
    def test_symmetry(self):
        g = optimism_gradient(iid_posts(2), Policy(np.array([0.5, 0.5])))
        assert g[0] == pytest.approx(g[1])

    def test_mean_shift_moves_one_component(self):
        posts = [GaussianPosterior(0.3, 1.0, 1.0), GaussianPosterior(0.0, 1.0, 1.0)]
        g = optimism_gradient(posts, Policy(np.array([0.5, 0.5])))
        assert g[0] - g[1] == pytest.approx(0.3, abs=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            A = int(rng.integers(2, 7))
            posts = random_posts(rng, A)
            pol = Policy.from_array(rng.uniform(0.05, 1.0, size=A))
            g = optimism_gradient(posts, pol)
            fd = finite_difference_gradient(posts, pol)
            rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1.0)
            assert rel.max() < 1e-5

    def test_requires_interior_policy(self):
        with pytest.raises(ValueError, match="clamp"):
            optimism_gradient(iid_posts(2), Policy(np.array([1.0, 0.0])))


class TestVbosPolicy:
    def test_single_arm(self):
        res = vbos_policy([GaussianPosterior(2.0, 1.0, 1.0)])
        np.testing.assert_array_equal(res.policy.probs, [1.0])

    def test_iid_uniform_and_value(self):
        res = vbos_policy(iid_posts(3))
        np.testing.assert_allclose(res.policy.probs, np.full(3, 1.0 / 3.0), atol=1e-6)
        assert res.value == pytest.approx(math.sqrt(2.0 * math.log(3.0)), abs=1e-9)
        assert res.converged

    def test_degenerate_variances_act_greedy(self):
        posts = [GaussianPosterior(5.0, 1e-30, 1.0), GaussianPosterior(0.0, 1e-30, 1.0)]
        res = vbos_policy(posts)
        assert res.policy.probs[0] >= 1.0 - 1e-9

    def test_mirror_and_dual_methods_agree(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            posts = random_posts(rng, int(rng.integers(2, 9)))
            a = vbos_policy(posts, method="mirror")
            b = vbos_policy(posts, method="dual")
            assert a.value == pytest.approx(b.value, abs=1e-7)
            np.testing.assert_allclose(a.policy.probs, b.policy.probs, atol=1e-5)

    def test_random_restarts_agree(self):
        rng = np.random.default_rng(6)
        posts = random_posts(rng, 6)
        base = vbos_policy(posts)
        cfg = SolverConfig()
        for k in range(20):
            start = rng.dirichlet(np.ones(6))
            from optbandits.optimism import GaussianBonus, _mirror_ascent, sigmas_from_posteriors
            from optbandits.posteriors import posterior_means

            res = _mirror_ascent(posterior_means(posts),
                                 GaussianBonus(sigmas_from_posteriors(posts)), cfg, pi0=start)
            assert res.value == pytest.approx(base.value, abs=1e-6)

    def test_first_order_condition(self):
        rng = np.random.default_rng(12)
        cfg = SolverConfig()
        for _ in range(10):
            posts = random_posts(rng, 5)
            res = vbos_policy(posts, cfg)
            g = optimism_gradient(posts, res.policy)
            proj = g - float(res.policy.probs @ g)
            # interior coordinates must be stationary; clamped ones pushed down
            interior = res.policy.probs > 10.0 * cfg.interior_floor
            assert np.abs(proj[interior]).max() <= 10.0 * math.sqrt(cfg.tolerance)
            assert res.gap <= 10.0 * cfg.tolerance

    def test_monotone_exploration_in_variance(self):
        lo = [GaussianPosterior(0.0, 1.0, 1.0), GaussianPosterior(0.0, 1.0, 1.0)]
        hi = [GaussianPosterior(0.0, 1.0, 1.0), GaussianPosterior(0.0, 2.5, 1.0)]
        p_lo = vbos_policy(lo).policy.probs[1]
        p_hi = vbos_policy(hi).policy.probs[1]
        assert p_hi >= p_lo - 1e-9

    def test_explore_weight_scales_bonus(self):
        posts = [GaussianPosterior(1.0, 1.0, 1.0), GaussianPosterior(0.0, 1.0, 1.0)]
        plain = vbos_policy(posts).policy.probs[1]
        eager = vbos_policy(posts, explore_weight=3.0).policy.probs[1]
        assert eager > plain


class TestKLearning:
    def test_identical_arms_uniform(self):
        res = klearning_policy(iid_posts(4))
        np.testing.assert_allclose(res.policy.probs, np.full(4, 0.25), atol=1e-9)

    def test_iid_matches_vbos_value_and_tau(self):
        res = klearning_policy(iid_posts(3))
        assert res.value == pytest.approx(math.sqrt(2.0 * math.log(3.0)), abs=1e-6)
        assert res.tau == pytest.approx(1.0 / math.sqrt(2.0 * math.log(3.0)), rel=1e-4)

    def test_degenerate_goes_greedy(self):
        posts = [GaussianPosterior(5.0, 1e-30, 1.0), GaussianPosterior(0.0, 1e-30, 1.0)]
        res = klearning_policy(posts)
        assert res.policy.probs[0] > 1.0 - 1e-9

    def test_dominated_by_vbos_in_optimism_value(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            posts = random_posts(rng, int(rng.integers(2, 8)))
            kl = klearning_policy(posts)
            vb = vbos_policy(posts)
            assert optimism_map(posts, kl.policy).value <= vb.value + 1e-8
            # the shared-temperature objective upper-bounds the optimum
            assert kl.value >= vb.value - 1e-8


class TestMonteCarlo:
    def test_expected_max_two_iid(self):
        est, se = expected_max_mc(iid_posts(2), RngStream(0), 200_000)
        assert abs(est - 1.0 / math.sqrt(math.pi)) <= 3.0 * se

    def test_expected_max_three_iid(self):
        est, se = expected_max_mc(iid_posts(3), RngStream(1), 200_000)
        assert abs(est - 3.0 / (2.0 * math.sqrt(math.pi))) <= 3.0 * se
        assert est <= math.sqrt(2.0 * math.log(3.0))

    def test_expected_max_single_arm(self):
        post = [GaussianPosterior(0.4, 1.0, 1.0)]
        est, se = expected_max_mc(post, RngStream(2), 100_000)
        assert abs(est - 0.4) <= 4.0 * se
        assert se == pytest.approx(1.0 / math.sqrt(100_000), rel=0.05)

    def test_sample_floor(self):
        with pytest.raises(ValueError):
            expected_max_mc(iid_posts(2), RngStream(0), 10)

    def test_ts_policy_symmetric(self):
        pol = ts_policy_mc(iid_posts(2), RngStream(3), 100_000)
        se = math.sqrt(0.25 / 100_000)
        assert abs(pol.probs[0] - 0.5) <= 3.0 * se

    def test_ts_policy_dominant_arm(self):
        posts = [GaussianPosterior(10.0, 1.0, 1.0), GaussianPosterior(0.0, 1.0, 1.0)]
        pol = ts_policy_mc(posts, RngStream(4), 100_000)
        assert pol.probs[0] >= 0.999

    def test_ts_policy_single_arm(self):
        pol = ts_policy_mc([GaussianPosterior(0.0, 1.0, 1.0)], RngStream(5), 1000)
        np.testing.assert_array_equal(pol.probs, [1.0])


class TestOptimisticSet:
    def test_vbos_policy_is_member(self):
        rng = np.random.default_rng(10)
        for k in range(5):
            posts = random_posts(rng, int(rng.integers(2, 7)))
            pol = vbos_policy(posts).policy
            member, margin, se = in_optimistic_set(posts, pol, RngStream(k),
                                                   SolverConfig(mc_samples=50_000))
            assert member
            assert margin >= -3.0 * se

    def test_ts_policy_is_member(self):
        rng = np.random.default_rng(20)
        for k in range(5):
            posts = random_posts(rng, int(rng.integers(2, 7)))
            pol = ts_policy_mc(posts, RngStream(100 + k), 100_000)
            member, _, _ = in_optimistic_set(posts, pol, RngStream(200 + k),
                                             SolverConfig(mc_samples=50_000))
            assert member

    def test_near_point_mass_is_not_member(self):
        posts = iid_posts(2)
        pol = Policy(np.array([1.0 - 1e-9, 1e-9]))
        member, margin, se = in_optimistic_set(posts, pol, RngStream(6),
                                               SolverConfig(mc_samples=200_000))
        assert not member
        assert margin == pytest.approx(-1.0 / math.sqrt(math.pi), abs=0.01)

    def test_sandwich_small_sample(self):
        rng = np.random.default_rng(30)
        for k in range(10):
            posts = random_posts(rng, int(rng.integers(2, 11)))
            emax, se = expected_max_mc(posts, RngStream(300 + k), 100_000)
            ts_pol = ts_policy_mc(posts, RngStream(400 + k), 100_000)
            g_ts = optimism_map(posts, ts_pol).value
            g_vb = vbos_policy(posts).value
            assert emax <= g_ts + 3.0 * se
            assert g_ts <= g_vb + 1e-6


class TestEntropy:
    def test_uniform(self):
        assert entropy(Policy(np.full(4, 0.25))) == pytest.approx(math.log(4.0))

    def test_point_mass(self):
        assert entropy(Policy.point_mass(0, 3)) == 0.0

    def test_three_quarters(self):
        val = entropy(Policy(np.array([0.75, 0.25])))
        assert val == pytest.approx(0.5623, abs=1e-4)

    def test_bounded_by_log_A(self):
        rng = np.random.default_rng(40)
        for _ in range(20):
            A = int(rng.integers(1, 9))
            pol = Policy.from_array(rng.uniform(0.0, 1.0, size=A) + 1e-12)
            assert -1e-12 <= entropy(pol) <= math.log(A) + 1e-12
