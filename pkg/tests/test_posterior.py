import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqbai.posterior import (MixturePosterior, SufficientStats,
                              gaussian_posterior, update)
from seqbai.priors import MixturePriorParams, build_mixture_prior
from seqbai.rng import RngStream


# ---------------------------------------------------------------------------
# Grid-quadrature Bayes oracle
#
# Under component k the arm means are independent Gaussians, so the exact
# mixture posterior factorizes: per (component, arm) a 1-d grid posterior,
# with component weights reweighted by the product of per-arm evidences.
# ---------------------------------------------------------------------------

GRID = np.linspace(-12.0, 14.0, 6001)
DGRID = GRID[1] - GRID[0]


def _norm_pdf(x, mean, var):
    return np.exp(-(x - mean) ** 2 / (2 * var)) / np.sqrt(2 * np.pi * var)


def oracle_marginals(weights, means, variances, noise_var, observations):
    """Exact (quadrature) per-arm mixture marginal densities on GRID."""
    K, J = means.shape
    dens = np.empty((K, J, GRID.size))
    log_evid = np.log(np.asarray(weights, dtype=float))
    for k in range(K):
        for j in range(1, J + 1):
            prior = _norm_pdf(GRID, means[k, j - 1], variances[k, j - 1])
            like = np.ones_like(GRID)
            for arm, r in observations:
                if arm == j:
                    like = like * _norm_pdf(r, GRID, noise_var)
            joint = prior * like
            z = np.trapezoid(joint, GRID)
            log_evid[k] += math.log(z)
            dens[k, j - 1] = joint / z
    log_evid -= log_evid.max()
    w = np.exp(log_evid)
    w /= w.sum()
    return np.einsum("k,kjg->jg", w, dens), w


def mixture_marginals(post: MixturePosterior):
    """The model's implied per-arm marginal densities on GRID."""
    w = post.weights()
    out = np.zeros((post.J, GRID.size))
    for j in range(post.J):
        for k in range(post.n_components):
            out[j] += w[k] * _norm_pdf(GRID, post.means[k, j],
                                       post.variances[k, j])
    return out


def total_variation(p, q):
    return 0.5 * np.sum(np.abs(p - q)) * DGRID


class TestConjugateUpdate:
    def test_hand_example(self):
        # prior N(0, 0.2), noise 1, one reward 2.0 -> N(1/3, 1/6)
        post = gaussian_posterior(np.zeros((1, 2)), np.full((1, 2), 0.2), 1.0)
        post.observe(1, 2.0)
        assert post.means[0, 0] == pytest.approx(1 / 3, abs=1e-12)
        assert post.variances[0, 0] == pytest.approx(1 / 6, abs=1e-12)
        # untouched arm keeps its prior
        assert post.means[0, 1] == 0.0
        assert post.variances[0, 1] == 0.2

    def test_variance_never_increases(self):
        post = gaussian_posterior(np.zeros((1, 3)), np.ones((1, 3)), 2.0)
        g = RngStream(0).generator()
        for _ in range(30):
            arm = int(g.integers(1, 4))
            before = post.variances[0, arm - 1]
            post.observe(arm, float(g.standard_normal()))
            assert post.variances[0, arm - 1] <= before

    def test_zero_variance_component_is_fixed_point(self):
        post = gaussian_posterior(np.array([[1.0, 0.0]]),
                                  np.array([[0.0, 1.0]]), 1.0)
        post.observe(1, 10.0)
        assert post.means[0, 0] == 1.0
        assert post.variances[0, 0] == 0.0


class TestAgainstOracle:
    @pytest.mark.parametrize("seed", range(4))
    def test_mixture_matches_quadrature(self, seed):
        g = RngStream(seed, (0, 0, 0)).generator()
        params = MixturePriorParams(delta=2.0, sigma0=math.sqrt(0.2))
        w0 = np.array([0.5, 0.3, 0.2])
        post = build_mixture_prior(w0, params, 1.0)
        obs = [(int(g.integers(1, 4)), float(g.normal(0.8, 1.2)))
               for _ in range(5)]
        for arm, r in obs:
            post.observe(arm, r)
        oracle, oracle_w = oracle_marginals(w0, np.where(np.eye(3), 2.0, 0.0),
                                            np.full((3, 3), 0.2), 1.0, obs)
        model = mixture_marginals(post)
        for j in range(3):
            assert total_variation(oracle[j], model[j]) < 1e-3
        assert np.allclose(post.weights(), oracle_w, atol=1e-6)

    def test_moments_match_oracle(self):
        params = MixturePriorParams(delta=1.5, sigma0=0.7, mu=-0.5)
        w0 = np.array([0.25, 0.25, 0.5])
        post = build_mixture_prior(w0, params, 0.8)
        obs = [(1, 0.2), (2, 1.4), (2, 0.9), (3, -1.0)]
        for arm, r in obs:
            post.observe(arm, r)
        means = np.where(np.eye(3), 1.0, -0.5)
        oracle, _ = oracle_marginals(w0, means, np.full((3, 3), 0.49), 0.8,
                                     obs)
        model_mean, model_var = post.all_moments()
        for j in range(3):
            om = np.trapezoid(GRID * oracle[j], GRID)
            ov = np.trapezoid(GRID ** 2 * oracle[j], GRID) - om ** 2
            assert model_mean[j] == pytest.approx(om, abs=1e-6)
            assert model_var[j] == pytest.approx(ov, abs=1e-6)


class TestWeights:
    def test_sum_to_one_after_updates(self):
        params = MixturePriorParams(delta=2.0, sigma0=1.0)
        post = build_mixture_prior(np.full(5, 0.2), params, 1.0)
        g = RngStream(3).generator()
        for _ in range(50):
            post.observe(int(g.integers(1, 6)), float(g.standard_normal()))
            assert np.exp(post.log_weights).sum() == pytest.approx(1.0)

    def test_floor_prevents_component_death(self):
        # Total log-evidence divergence per arm is bounded by
        # delta^2 / (2 sigma0^2) = 800 nats here, which exceeds
        # ln(1e-300) = -690: without the floor the losing weight would
        # underflow to exactly zero and could never recover.
        params = MixturePriorParams(delta=2.0, sigma0=0.05)
        post = build_mixture_prior(np.array([0.5, 0.5]), params, 0.01)
        # long run of strong evidence for component 1
        for _ in range(200):
            post.observe(1, 2.0)
        assert np.all(np.isfinite(post.log_weights))
        assert post.weights()[1] > 0.0
        assert post.weights()[1] < 1e-250
        # evidence for component 2 revives it
        for _ in range(400):
            post.observe(2, 2.0)
        assert post.weights()[1] > 0.99

    def test_prob_optimal_tracks_evidence(self):
        params = MixturePriorParams(delta=2.0, sigma0=1.0)
        post = build_mixture_prior(np.full(3, 1 / 3), params, 1.0)
        for _ in range(20):
            post.observe(2, 2.0)
            post.observe(1, 0.0)
            post.observe(3, 0.0)
        p = post.prob_optimal()
        assert np.argmax(p) == 1
        assert p[1] > 0.95


class TestOrderInvariance:
    @given(st.permutations(list(range(6))))
    @settings(max_examples=25, deadline=None)
    def test_update_order_irrelevant(self, order):
        obs = [(1, 0.5), (2, -0.3), (3, 1.7), (1, 0.9), (2, 2.1), (3, 0.0)]
        params = MixturePriorParams(delta=1.0, sigma0=1.0)
        base = build_mixture_prior(np.full(3, 1 / 3), params, 1.0)
        a = base.copy()
        b = base.copy()
        for arm, r in obs:
            a.observe(arm, r)
        for i in order:
            b.observe(*obs[i])
        assert np.allclose(a.log_weights, b.log_weights, atol=1e-9)
        assert np.allclose(a.means, b.means, atol=1e-9)
        assert np.allclose(a.variances, b.variances, atol=1e-9)


class TestSampling:
    def test_sample_batch_matches_moments(self):
        params = MixturePriorParams(delta=2.0, sigma0=0.5, mu=1.0)
        post = build_mixture_prior(np.array([0.6, 0.4]), params, 1.0)
        draws = post.sample_batch(200_000, RngStream(8))
        mean, var = post.all_moments()
        se = np.sqrt(var / 200_000)
        assert np.all(np.abs(draws.mean(axis=0) - mean) < 5 * se)
        assert np.allclose(draws.var(axis=0), var, rtol=0.03)

    def test_single_sample_reproducible(self):
        params = MixturePriorParams(delta=1.0, sigma0=1.0)
        post = build_mixture_prior(np.full(4, 0.25), params, 1.0)
        s1 = post.sample(RngStream(5, (1, 1, 2)))
        s2 = post.sample(RngStream(5, (1, 1, 2)))
        assert np.array_equal(s1, s2)

    def test_batch_and_scalar_same_law(self):
        # frequencies of the argmax agree between the two sampling paths
        params = MixturePriorParams(delta=2.0, sigma0=1.0)
        post = build_mixture_prior(np.array([0.7, 0.2, 0.1]), params, 1.0)
        g = RngStream(9).generator()
        scalar = np.array([np.argmax(post.sample(g)) for _ in range(4000)])
        batch = np.argmax(post.sample_batch(4000, g), axis=1)
        f1 = np.bincount(scalar, minlength=3) / 4000
        f2 = np.bincount(batch, minlength=3) / 4000
        assert np.all(np.abs(f1 - f2) < 0.035)


class TestFunctionalUpdate:
    def test_update_leaves_original_untouched(self):
        params = MixturePriorParams(delta=1.0, sigma0=1.0)
        post = build_mixture_prior(np.full(3, 1 / 3), params, 1.0)
        w_before = post.weights().copy()
        out = update(post, 1, 2.0)
        assert np.array_equal(post.weights(), w_before)
        assert post.stats.pulls.sum() == 0
        assert out.stats.pulls.sum() == 1


class TestValidation:
    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            MixturePosterior(np.array([0.0]), np.zeros((1, 2)),
                             np.zeros((2, 2)), SufficientStats.empty(2, 1.0))

    def test_arm_range(self):
        post = gaussian_posterior(np.zeros((1, 2)), np.ones((1, 2)), 1.0)
        with pytest.raises(ValueError):
            post.observe(0, 1.0)
        with pytest.raises(ValueError):
            post.observe(3, 1.0)

    def test_nonfinite_reward(self):
        post = gaussian_posterior(np.zeros((1, 2)), np.ones((1, 2)), 1.0)
        with pytest.raises(ValueError):
            post.observe(1, float("nan"))

    def test_stats_noise_var(self):
        with pytest.raises(ValueError):
            SufficientStats.empty(3, 0.0)


class TestObserveBatch:
    def _mixture(self):
        params = MixturePriorParams(delta=2.0, sigma0=0.7)
        return build_mixture_prior(np.array([0.5, 0.3, 0.2]), params, 1.3)

    def test_matches_incremental_updates(self):
        g = RngStream(77).generator()
        rewards = g.normal(1.0, 1.0, size=9)
        batch = self._mixture()
        serial = self._mixture()
        batch.observe_batch(2, rewards)
        for x in rewards:
            serial.observe(2, float(x))
        assert batch.weights() == pytest.approx(serial.weights(), rel=1e-12)
        assert batch.means == pytest.approx(serial.means, rel=1e-12)
        assert batch.variances == pytest.approx(serial.variances, rel=1e-12)
        assert np.array_equal(batch.stats.pulls, serial.stats.pulls)

    def test_single_reward_matches_observe(self):
        batch = self._mixture()
        serial = self._mixture()
        batch.observe_batch(1, [0.4])
        serial.observe(1, 0.4)
        assert batch.weights() == pytest.approx(serial.weights(), rel=1e-12)
        assert batch.means == pytest.approx(serial.means, rel=1e-12)

    def test_exact_moments_for_representable_batch(self):
        # N(0,1) prior, unit noise, five rewards summing to 2: the folded
        # posterior is mean 2/6 and variance 1/6 in one division each.
        post = gaussian_posterior(np.zeros((1, 2)), np.ones((1, 2)), 1.0)
        post.observe_batch(1, [2.0, 0.0, 0.0, 0.0, 0.0])
        mean, var = post.moments(1)
        assert mean == 1.0 / 3.0
        assert var == 1.0 / 6.0

    def test_empty_batch_is_a_no_op(self):
        post = self._mixture()
        w = post.weights().copy()
        post.observe_batch(1, [])
        assert np.array_equal(post.weights(), w)
        assert post.stats.pulls.sum() == 0

    def test_rejects_nonfinite_and_bad_arm(self):
        post = self._mixture()
        with pytest.raises(ValueError):
            post.observe_batch(1, [1.0, float("inf")])
        with pytest.raises(ValueError):
            post.observe_batch(0, [1.0])
