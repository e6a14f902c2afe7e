"""Arm-selection rules: top-two Thompson sampling and baselines.

Top-two Thompson sampling draws a posterior sample to name a leader, then
with probability ``1 - beta`` keeps resampling until some draw's argmax
differs from the leader; that arm is the challenger and gets the pull.
The baselines are uniform random selection, batch racing with confidence
radii, and a binarized Bernoulli Thompson sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .posterior import MixturePosterior, SufficientStats
from .rng import RngStream, as_generator

_CHALLENGER_BATCH = 16  # draws per resampling batch; batching changes no law


@dataclass(frozen=True)
class TopTwoConfig:
    """beta is the probability of pulling the leader; max_resample caps the
    challenger search, falling back to the leader when exhausted."""

    beta: float = 0.5
    max_resample: int = 100

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.max_resample < 1:
            raise ValueError("max_resample must be >= 1")


def top_two_select(post: MixturePosterior, cfg: TopTwoConfig,
                   rng: RngStream | np.random.Generator) -> int:
    """Choose the next arm to pull (1-based)."""
    g = as_generator(rng)
    leader = int(np.argmax(post.sample(g)))
    if g.random() < cfg.beta:
        return leader + 1
    # First a small batch, then the remainder in one draw.  The rule takes
    # the first differing draw in order, so the chunk schedule changes no
    # law; it only bounds the wasted work when the first batch suffices.
    drawn = 0
    while drawn < cfg.max_resample:
        n = cfg.max_resample - drawn
        if drawn == 0:
            n = min(_CHALLENGER_BATCH, n)
        tops = np.argmax(post.sample_batch(n, g), axis=1)
        hits = np.flatnonzero(tops != leader)
        if hits.size:
            return int(tops[hits[0]]) + 1
        drawn += n
    return leader + 1


def random_select(J: int, rng: RngStream | np.random.Generator) -> int:
    """Uniformly random arm (1-based)."""
    if J < 1:
        raise ValueError("J must be >= 1")
    return int(as_generator(rng).integers(1, J + 1))


# ---------------------------------------------------------------------------
# Batch racing
# ---------------------------------------------------------------------------

@dataclass
class BRState:
    """Racing state: surviving arms, pooled stats, and the per-task delta.

    ``shrink`` scales the confidence radii.  At 1.0 the radius is a full
    anytime sub-Gaussian bound and eliminations honour ``delta``; smaller
    values race faster but can discard the best arm when the gap-to-noise
    ratio is small, after which the surviving arms may tie indefinitely
    (bounded only by the caller's step cap).
    """

    surviving: set[int]
    stats: SufficientStats
    delta: float
    shrink: float = 0.25
    rounds: int = 0

    @classmethod
    def fresh(cls, J: int, delta: float, noise_var: float,
              shrink: float = 0.25) -> "BRState":
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if shrink <= 0:
            raise ValueError("shrink must be positive")
        return cls(set(range(1, J + 1)), SufficientStats.empty(J, noise_var),
                   delta, shrink)

    @property
    def J(self) -> int:
        return int(self.stats.pulls.size)

    def radii(self) -> np.ndarray:
        """Confidence radius per arm at the current round count."""
        t = max(self.rounds, 1)
        log_term = math.log(4.0 * self.J * t * t / self.delta)
        with np.errstate(divide="ignore"):
            return self.shrink * np.sqrt(
                2.0 * self.stats.noise_var * log_term
                / np.maximum(self.stats.pulls, 1)) * np.where(
                    self.stats.pulls > 0, 1.0, np.inf)


def br_eliminate(state: BRState) -> list[int]:
    """Drop surviving arms whose upper bound falls below the best lower
    bound.  The empirical best arm is never eliminated.  Returns the arms
    removed this call."""
    alive = sorted(state.surviving)
    if len(alive) <= 1:
        return []
    idx = np.asarray(alive) - 1
    if np.any(state.stats.pulls[idx] == 0):
        return []
    means = state.stats.reward_sums[idx] / state.stats.pulls[idx]
    radii = state.radii()[idx]
    best_lb = float(np.max(means - radii))
    out = [a for a, m, r in zip(alive, means, radii) if m + r < best_lb]
    for a in out:
        state.surviving.discard(a)
    return out


def br_round(state: BRState, pull_fn) -> tuple[list[int], BRState]:
    """One racing round: pull every surviving arm once, then prune.

    ``pull_fn(arm) -> reward`` supplies the observations.  Returns the arms
    pulled this round and the updated state (mutated in place).
    """
    pulled = sorted(state.surviving)
    for a in pulled:
        r = float(pull_fn(a))
        state.stats.pulls[a - 1] += 1
        state.stats.reward_sums[a - 1] += r
    state.rounds += 1
    br_eliminate(state)
    return pulled, state


# ---------------------------------------------------------------------------
# Binarized Bernoulli Thompson sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BBTSState:
    """Beta(alpha, beta) posteriors over per-arm success rates.

    Rewards are binarized at ``threshold`` (strictly greater counts as a
    success, so a reward exactly at threshold is a failure).  ``p_max`` is
    the posterior-probability stopping level.
    """

    alpha: np.ndarray
    beta: np.ndarray
    threshold: float
    p_max: float

    @classmethod
    def fresh(cls, J: int, threshold: float, p_max: float) -> "BBTSState":
        if J < 2:
            raise ValueError("J must be >= 2")
        if not 0 < p_max < 1:
            raise ValueError("p_max must lie in (0, 1)")
        return cls(np.ones(J), np.ones(J), float(threshold), float(p_max))

    @property
    def J(self) -> int:
        return int(self.alpha.size)

    def posterior_means(self) -> np.ndarray:
        return self.alpha / (self.alpha + self.beta)


def bbts_step(state: BBTSState, rng: RngStream | np.random.Generator) -> int:
    """Thompson draw: sample each arm's rate, pull the argmax (1-based)."""
    g = as_generator(rng)
    draws = g.beta(state.alpha, state.beta)
    return int(np.argmax(draws)) + 1


def bbts_update(state: BBTSState, arm: int, reward: float) -> BBTSState:
    """Update the pulled arm's Beta posterior from a binarized reward."""
    if not 1 <= arm <= state.J:
        raise ValueError(f"arm {arm} out of range 1..{state.J}")
    alpha = state.alpha.copy()
    beta = state.beta.copy()
    if reward > state.threshold:
        alpha[arm - 1] += 1.0
    else:
        beta[arm - 1] += 1.0
    return replace(state, alpha=alpha, beta=beta)
