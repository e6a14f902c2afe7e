"""Selection rules: top-two sampling, random choice, racing, Bernoulli TS."""

import numpy as np
import pytest

from seqbai import (
    BBTSState,
    BRState,
    MixturePosterior,
    SufficientStats,
    RngStream,
    TopTwoConfig,
    bbts_step,
    bbts_update,
    br_eliminate,
    br_round,
    random_select,
    top_two_select,
)


def two_mode_posterior(w1: float) -> MixturePosterior:
    """Two near-degenerate components: comp 1 puts arm 1 on top, comp 2
    puts arm 2 on top.  A posterior sample's argmax identifies the
    component it came from, so selection frequencies are predictable."""
    means = np.array([[10.0, 0.0], [0.0, 10.0]])
    variances = np.full((2, 2), 1e-12)
    stats = SufficientStats.empty(2, 1.0)
    return MixturePosterior(np.log([w1, 1.0 - w1]), means, variances, stats)


def point_posterior(J: int, best: int) -> MixturePosterior:
    """Single component, negligible variance: every sample has the same
    argmax."""
    means = np.zeros((1, J))
    means[0, best - 1] = 5.0
    stats = SufficientStats.empty(J, 1.0)
    return MixturePosterior(np.zeros(1), means, np.full((1, J), 1e-12), stats)


class TestTopTwo:
    def test_beta_one_always_leader(self):
        post = point_posterior(4, best=3)
        cfg = TopTwoConfig(beta=1.0)
        g = RngStream(7).generator()
        picks = {top_two_select(post, cfg, g) for _ in range(50)}
        assert picks == {3}

    def test_beta_zero_picks_challenger(self):
        # Leader is comp 1's arm with prob 0.9; the challenger search then
        # lands on the other arm.  So arm 2 is selected with prob 0.9.
        post = two_mode_posterior(0.9)
        cfg = TopTwoConfig(beta=0.0)
        g = RngStream(11).generator()
        n = 2000
        picks = np.array([top_two_select(post, cfg, g) for _ in range(n)])
        frac_arm2 = np.mean(picks == 2)
        # 4 standard errors around 0.9
        assert abs(frac_arm2 - 0.9) < 4 * np.sqrt(0.9 * 0.1 / n)

    def test_resample_cap_falls_back_to_leader(self):
        # One deterministic mode: no draw can disagree with the leader, so
        # the search exhausts max_resample and returns the leader.
        post = point_posterior(3, best=2)
        cfg = TopTwoConfig(beta=0.0, max_resample=5)
        g = RngStream(13).generator()
        assert all(top_two_select(post, cfg, g) == 2 for _ in range(20))

    def test_partial_batch_cap_respected(self):
        # max_resample below the internal batch size still terminates and
        # returns a valid arm.
        post = two_mode_posterior(0.5)
        cfg = TopTwoConfig(beta=0.0, max_resample=3)
        g = RngStream(17).generator()
        for _ in range(100):
            assert top_two_select(post, cfg, g) in (1, 2)

    def test_intermediate_beta_mixture_law(self):
        # With beta = 0.6 and leader weight 0.9:
        # P(pick arm 1) = 0.6 * 0.9 + 0.4 * 0.1 = 0.58.
        post = two_mode_posterior(0.9)
        cfg = TopTwoConfig(beta=0.6)
        g = RngStream(19).generator()
        n = 4000
        picks = np.array([top_two_select(post, cfg, g) for _ in range(n)])
        frac_arm1 = np.mean(picks == 1)
        assert abs(frac_arm1 - 0.58) < 4 * np.sqrt(0.58 * 0.42 / n)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TopTwoConfig(beta=-0.1)
        with pytest.raises(ValueError):
            TopTwoConfig(beta=1.5)
        with pytest.raises(ValueError):
            TopTwoConfig(max_resample=0)


class TestRandomSelect:
    def test_uniform_frequencies(self):
        g = RngStream(23).generator()
        n = 6000
        picks = np.array([random_select(4, g) for _ in range(n)])
        assert set(np.unique(picks)) == {1, 2, 3, 4}
        for a in range(1, 5):
            assert abs(np.mean(picks == a) - 0.25) < 4 * np.sqrt(
                0.25 * 0.75 / n)

    def test_rejects_bad_J(self):
        with pytest.raises(ValueError):
            random_select(0, RngStream(1).generator())


class TestBatchRacing:
    def test_fresh_state(self):
        st = BRState.fresh(5, delta=0.1, noise_var=1.0)
        assert st.surviving == {1, 2, 3, 4, 5}
        assert st.rounds == 0
        assert np.all(np.isinf(st.radii()))

    def test_fresh_validation(self):
        with pytest.raises(ValueError):
            BRState.fresh(5, delta=0.0, noise_var=1.0)
        with pytest.raises(ValueError):
            BRState.fresh(5, delta=1.0, noise_var=1.0)
        with pytest.raises(ValueError):
            BRState.fresh(5, delta=0.1, noise_var=1.0, shrink=0.0)

    def test_radius_formula(self):
        st = BRState.fresh(3, delta=0.1, noise_var=1.0)
        st.stats.pulls[:] = 10
        st.rounds = 10
        expect = 0.25 * np.sqrt(2.0 * np.log(4 * 3 * 100 / 0.1) / 10)
        assert st.radii() == pytest.approx(np.full(3, expect), abs=1e-12)

    def test_eliminates_clearly_bad_arm(self):
        st = BRState.fresh(3, delta=0.1, noise_var=1.0)
        st.stats.pulls[:] = 10
        st.stats.reward_sums[:] = np.array([20.0, 1.0, 19.0])
        st.rounds = 10
        # radius = 0.382; best lower bound = 2.0 - 0.382 = 1.618;
        # arm 2 upper bound = 0.1 + 0.382 = 0.482 < 1.618 -> eliminated;
        # arm 3 upper bound = 2.282 -> survives.
        removed = br_eliminate(st)
        assert removed == [2]
        assert st.surviving == {1, 3}

    def test_empirical_best_never_eliminated(self):
        st = BRState.fresh(2, delta=0.1, noise_var=1.0)
        st.stats.pulls[:] = 50
        st.stats.reward_sums[:] = np.array([0.0, 0.0])
        st.rounds = 50
        assert br_eliminate(st) == []
        assert st.surviving == {1, 2}

    def test_no_elimination_before_all_pulled(self):
        st = BRState.fresh(3, delta=0.1, noise_var=1.0)
        st.stats.pulls[:] = np.array([5, 0, 5])
        st.stats.reward_sums[:] = np.array([50.0, 0.0, -50.0])
        st.rounds = 5
        assert br_eliminate(st) == []
        assert st.surviving == {1, 2, 3}

    def test_round_pulls_every_survivor(self):
        st = BRState.fresh(3, delta=0.1, noise_var=1.0)
        seen = []

        def pull(arm: int) -> float:
            seen.append(arm)
            return float(arm)

        pulled, st = br_round(st, pull)
        assert pulled == [1, 2, 3]
        assert seen == [1, 2, 3]
        assert st.rounds == 1
        assert np.array_equal(st.stats.pulls, [1, 1, 1])
        assert np.array_equal(st.stats.reward_sums, [1.0, 2.0, 3.0])

    def test_race_converges_on_best_arm(self):
        theta = np.array([0.0, 3.0, 0.0, 0.0])
        st = BRState.fresh(4, delta=0.1, noise_var=1.0)
        g = RngStream(29).generator()

        def pull(arm: int) -> float:
            return float(theta[arm - 1] + g.standard_normal())

        for _ in range(500):
            if len(st.surviving) == 1:
                break
            br_round(st, pull)
        assert st.surviving == {2}


class TestBBTS:
    def test_fresh_validation(self):
        with pytest.raises(ValueError):
            BBTSState.fresh(1, 0.5, 0.99)
        with pytest.raises(ValueError):
            BBTSState.fresh(3, 0.5, 1.0)

    def test_update_success_and_failure(self):
        st = BBTSState.fresh(3, threshold=1.0, p_max=0.99)
        st2 = bbts_update(st, 2, 1.5)
        assert st2.alpha[1] == 2.0 and st2.beta[1] == 1.0
        st3 = bbts_update(st2, 2, 0.5)
        assert st3.alpha[1] == 2.0 and st3.beta[1] == 2.0
        # original untouched (functional update)
        assert st.alpha[1] == 1.0 and st.beta[1] == 1.0

    def test_reward_exactly_at_threshold_is_failure(self):
        st = BBTSState.fresh(2, threshold=1.0, p_max=0.99)
        st2 = bbts_update(st, 1, 1.0)
        assert st2.beta[0] == 2.0
        assert st2.alpha[0] == 1.0

    def test_update_range_check(self):
        st = BBTSState.fresh(2, threshold=0.0, p_max=0.99)
        with pytest.raises(ValueError):
            bbts_update(st, 0, 1.0)
        with pytest.raises(ValueError):
            bbts_update(st, 3, 1.0)

    def test_posterior_means(self):
        st = BBTSState.fresh(2, threshold=0.0, p_max=0.99)
        st = bbts_update(st, 1, 1.0)
        st = bbts_update(st, 1, 1.0)
        assert st.posterior_means() == pytest.approx([0.75, 0.5])

    def test_step_favors_high_rate_arm(self):
        st = BBTSState.fresh(3, threshold=0.0, p_max=0.99)
        for _ in range(60):
            st = bbts_update(st, 2, 1.0)
            st = bbts_update(st, 1, -1.0)
            st = bbts_update(st, 3, -1.0)
        g = RngStream(31).generator()
        picks = np.array([bbts_step(st, g) for _ in range(300)])
        assert np.mean(picks == 2) > 0.9
