"""Stopping rules and decision rules for fixed-confidence and fixed-budget
identification.

Fixed-confidence rules compare a separation statistic against a threshold
that grows with the error budget ``delta`` (split across M tasks); the
fixed-budget rule just counts pulls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algorithms import BBTSState
from .posterior import MixturePosterior
from .rng import RngStream, as_generator

FIXED_CONFIDENCE = "fixed_confidence"
FIXED_BUDGET = "fixed_budget"

MOMENT_MATCHED = "moment_matched"
ASYMPTOTIC = "asymptotic"

# Grouping of the moment-matched threshold's log argument.  "literal" reads
# sqrt(2 * ln(ln(t) * M / delta)); "nested" moves M / delta inside the inner
# logarithm: sqrt(2 * ln(ln(t * M / delta))).
GROUPING_LITERAL = "literal"
GROUPING_NESTED = "nested"


@dataclass(frozen=True)
class StoppingConfig:
    mode: str = FIXED_CONFIDENCE
    delta: float = 0.1
    M: int = 1
    t_max: int | None = None
    gamma_variant: str = MOMENT_MATCHED
    C: float = 1.0
    min_t: int = 3
    grouping: str = GROUPING_LITERAL

    def __post_init__(self) -> None:
        if self.mode not in (FIXED_CONFIDENCE, FIXED_BUDGET):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.mode == FIXED_BUDGET:
            if self.t_max is None or self.t_max < 1:
                raise ValueError("fixed-budget mode needs t_max >= 1")
        if self.gamma_variant not in (MOMENT_MATCHED, ASYMPTOTIC):
            raise ValueError(f"unknown gamma_variant {self.gamma_variant!r}")
        if self.gamma_variant == MOMENT_MATCHED and self.min_t < 3:
            raise ValueError("moment-matched rule needs min_t >= 3")
        if self.grouping not in (GROUPING_LITERAL, GROUPING_NESTED):
            raise ValueError(f"unknown grouping {self.grouping!r}")


def bonferroni(delta: float, M: int) -> float:
    """Per-task error budget delta / M."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if M < 1:
        raise ValueError("M must be >= 1")
    return delta / M


@dataclass(frozen=True)
class GLRInputs:
    """Per-arm pull counts, posterior/empirical means, posterior variances,
    and the known reward-noise variance."""

    pulls: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    noise_var: float

    def __post_init__(self) -> None:
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")
        if not (self.pulls.shape == self.means.shape == self.variances.shape):
            raise ValueError("pulls, means, variances must share a shape")


def chernoff_glr(inputs: GLRInputs) -> float:
    """Generalized likelihood-ratio separation statistic.

    For each ordered pair (i, j) with mean_i > mean_j, the pairwise statistic
    is N_i KL(mu_i, mu_ij) + N_j KL(mu_j, mu_ij) where mu_ij is the
    pull-weighted mean of the pair and KL is the Gaussian divergence
    (a - b)^2 / (2 noise_var).  Returns max_i min_{j != i}; 0 whenever some
    arm is unpulled.
    """
    N = np.asarray(inputs.pulls, dtype=float)
    if np.any(N == 0):
        return 0.0
    mu = np.asarray(inputs.means, dtype=float)
    s2 = inputs.noise_var
    Ni = N[:, None]
    Nj = N[None, :]
    mi = mu[:, None]
    mj = mu[None, :]
    mij = (Ni * mi + Nj * mj) / (Ni + Nj)
    pair = (Ni * (mi - mij) ** 2 + Nj * (mj - mij) ** 2) / (2.0 * s2)
    Z = np.where(mj >= mi, 0.0, pair)
    np.fill_diagonal(Z, np.inf)
    return float(np.max(np.min(Z, axis=1)))


def moment_matched_threshold(t: int, M: int, delta: float,
                             grouping: str = GROUPING_LITERAL) -> float:
    """Separation level gamma_t = sqrt(2 ln(ln(t) M / delta))."""
    if t < 2:
        raise ValueError("threshold undefined for t < 2")
    if grouping == GROUPING_LITERAL:
        inner = math.log(t) * M / delta
    elif grouping == GROUPING_NESTED:
        inner = math.log(t * M / delta)
    else:
        raise ValueError(f"unknown grouping {grouping!r}")
    if inner <= 1.0:
        raise ValueError("threshold undefined: log argument <= 1; raise min_t")
    return math.sqrt(2.0 * math.log(inner))


def gaussian_mixture_stop(means: np.ndarray, variances: np.ndarray, t: int,
                          cfg: StoppingConfig) -> bool:
    """Moment-matched fixed-confidence check.

    The posterior mixture's arm marginals are matched by Gaussians with the
    given means/variances; stop when the leader's standardized separation
    from every rival reaches gamma_t.
    """
    if t < cfg.min_t:
        return False
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    gamma = moment_matched_threshold(t, cfg.M, cfg.delta, cfg.grouping)
    best = int(np.argmax(means))
    rival = np.ones(means.size, dtype=bool)
    rival[best] = False
    diff = means[best] - means[rival]
    denom = np.sqrt(variances[best] + variances[rival])
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = diff / denom
    stat = np.where(denom == 0.0, np.where(diff > 0, np.inf, 0.0), stat)
    return bool(np.min(stat) >= gamma)


def asymptotic_threshold(t: int, J: int, delta: float, C: float = 1.0) -> float:
    """GLR threshold 4 ln(4 + ln t) + 2 C(ln((J - 1)/delta) / 2)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if J < 2:
        raise ValueError("J must be >= 2")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    x = math.log((J - 1) / delta) / 2.0
    return 4.0 * math.log(4.0 + math.log(t)) + 2.0 * C * x


def budget_stop(t: int, cfg: StoppingConfig) -> bool:
    """Fixed-budget rule: stop once t reaches t_max."""
    if cfg.mode != FIXED_BUDGET:
        raise ValueError("budget_stop requires fixed-budget mode")
    return t >= cfg.t_max


def decide(post: MixturePosterior) -> int:
    """Recommend the arm with the highest marginal posterior mean (1-based)."""
    means, _ = post.all_moments()
    return int(np.argmax(means)) + 1


def bbts_stop(state: BBTSState, rng: RngStream | np.random.Generator,
              n_draws: int = 10_000) -> bool:
    """Monte Carlo check that P(current best beats every rival) >= p_max.

    "Best" is the arm with the highest Beta posterior mean; the probability
    is estimated from ``n_draws`` joint Beta samples.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    g = as_generator(rng)
    best = int(np.argmax(state.posterior_means()))
    draws = g.beta(np.broadcast_to(state.alpha, (n_draws, state.J)),
                   np.broadcast_to(state.beta, (n_draws, state.J)))
    rivals = np.delete(draws, best, axis=1)
    frac = float(np.mean(draws[:, best] > rivals.max(axis=1)))
    return frac >= state.p_max
