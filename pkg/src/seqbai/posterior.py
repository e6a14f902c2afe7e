"""Gaussian-mixture posterior over arm means, conjugate under known noise.

The belief state is a K-component mixture; under component k the arm means
are independent Gaussians ``N(means[k, j], variances[k, j])``.  Observing
reward ``r`` from arm ``a`` with noise variance ``s^2``:

    per component:  v' = v * s^2 / (v + s^2)
                    m' = (m * s^2 + r * v) / (v + s^2)
    log-weights  += log N(r; m, v + s^2),  then log-sum-exp renormalize.

Weights are floored at 1e-300 before renormalization so no component's
weight ever underflows to an irrecoverable zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream, as_generator

WEIGHT_FLOOR = 1e-300
_LOG_FLOOR = float(np.log(WEIGHT_FLOOR))


@dataclass
class SufficientStats:
    """Per-arm pull counts and reward sums, plus the known noise variance."""

    pulls: np.ndarray
    reward_sums: np.ndarray
    noise_var: float

    @classmethod
    def empty(cls, J: int, noise_var: float) -> "SufficientStats":
        if J < 1:
            raise ValueError("J must be >= 1")
        if noise_var <= 0 or not np.isfinite(noise_var):
            raise ValueError("noise_var must be a positive real")
        return cls(np.zeros(J, dtype=np.int64), np.zeros(J, dtype=float),
                   float(noise_var))

    def copy(self) -> "SufficientStats":
        return SufficientStats(self.pulls.copy(), self.reward_sums.copy(),
                               self.noise_var)

    def means(self) -> np.ndarray:
        """Empirical means; arms never pulled give nan."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.pulls > 0,
                            self.reward_sums / np.maximum(self.pulls, 1),
                            np.nan)


def _normalize_log_weights(lw: np.ndarray) -> np.ndarray:
    lw = lw - np.max(lw)
    lw = lw - np.log(np.sum(np.exp(lw)))
    lw = np.maximum(lw, _LOG_FLOOR)
    return lw - np.log(np.sum(np.exp(lw)))


class MixturePosterior:
    """Mutable mixture belief over J arm means (arms 1-based in the API).

    Component ``k`` typically encodes the hypothesis "arm k is optimal", but
    any component count K >= 1 is supported (K = 1 is a plain Gaussian
    posterior).
    """

    def __init__(self, log_weights: np.ndarray, means: np.ndarray,
                 variances: np.ndarray, stats: SufficientStats):
        log_weights = np.asarray(log_weights, dtype=float).copy()
        means = np.asarray(means, dtype=float).copy()
        variances = np.asarray(variances, dtype=float).copy()
        if means.ndim != 2:
            raise ValueError("means must be (K, J)")
        K, J = means.shape
        if variances.shape != (K, J):
            raise ValueError("variances must match means shape")
        if log_weights.shape != (K,):
            raise ValueError("log_weights must be length K")
        if np.any(variances < 0):
            raise ValueError("variances must be nonnegative")
        if abs(float(np.sum(np.exp(log_weights))) - 1.0) > 1e-6:
            raise ValueError("weights must sum to 1")
        if stats.pulls.shape != (J,):
            raise ValueError("stats dimension must match J")
        self.log_weights = _normalize_log_weights(log_weights)
        self.means = means
        self.variances = variances
        self.stats = stats
        self._cdf: np.ndarray | None = None

    # -- construction -----------------------------------------------------

    @classmethod
    def from_weights(cls, weights: np.ndarray, means: np.ndarray,
                     variances: np.ndarray, noise_var: float) -> "MixturePosterior":
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        total = float(weights.sum())
        if total <= 0 or abs(total - 1.0) > 1e-6:
            raise ValueError("weights must sum to 1")
        w = np.maximum(weights, WEIGHT_FLOOR)
        means = np.asarray(means, dtype=float)
        J = means.shape[1]
        return cls(np.log(w / w.sum()), means, variances,
                   SufficientStats.empty(J, noise_var))

    @property
    def n_components(self) -> int:
        return int(self.means.shape[0])

    @property
    def J(self) -> int:
        return int(self.means.shape[1])

    def copy(self) -> "MixturePosterior":
        return MixturePosterior(self.log_weights, self.means, self.variances,
                                self.stats.copy())

    # -- updating ----------------------------------------------------------

    def observe(self, arm: int, reward: float) -> None:
        """Conjugate in-place update from one reward on ``arm`` (1-based)."""
        if not 1 <= arm <= self.J:
            raise ValueError(f"arm {arm} out of range 1..{self.J}")
        if not np.isfinite(reward):
            raise ValueError("reward must be finite")
        a = arm - 1
        s2 = self.stats.noise_var
        m = self.means[:, a]
        v = self.variances[:, a]
        pv = v + s2
        self.log_weights = self.log_weights - 0.5 * (
            np.log(2.0 * np.pi * pv) + (reward - m) ** 2 / pv)
        self.log_weights = _normalize_log_weights(self.log_weights)
        self.means[:, a] = (m * s2 + reward * v) / pv
        self.variances[:, a] = v * s2 / pv
        self.stats.pulls[a] += 1
        self.stats.reward_sums[a] += reward
        self._cdf = None

    def observe_batch(self, arm: int, rewards) -> None:
        """Fold ``n`` rewards on ``arm`` in one closed-form conjugate step.

        Equivalent in law to ``n`` calls of :meth:`observe`, but the moments
        come out of a single division, so a batch whose exact posterior
        moments are representable is reproduced to one rounding.
        """
        if not 1 <= arm <= self.J:
            raise ValueError(f"arm {arm} out of range 1..{self.J}")
        x = np.asarray(rewards, dtype=float).ravel()
        if x.size == 0:
            return
        if not np.all(np.isfinite(x)):
            raise ValueError("rewards must be finite")
        a = arm - 1
        n = x.size
        s2 = self.stats.noise_var
        total = float(x.sum())
        sq_total = float(x @ x)
        m = self.means[:, a]
        v = self.variances[:, a]
        denom = s2 + n * v
        # Marginal likelihood of the batch: x ~ N(m*1, s2*I + v*J) per
        # component, evaluated through the rank-one Woodbury identity.
        dev_sum = total - n * m
        dev_sq = sq_total - 2.0 * m * total + n * m * m
        log_lik = (-0.5 * (n * np.log(2.0 * np.pi * s2) + np.log(denom / s2))
                   - 0.5 * (dev_sq - v * dev_sum ** 2 / denom) / s2)
        self.log_weights = _normalize_log_weights(self.log_weights + log_lik)
        self.means[:, a] = (m * s2 + v * total) / denom
        self.variances[:, a] = v * s2 / denom
        self.stats.pulls[a] += n
        self.stats.reward_sums[a] += total
        self._cdf = None

    # -- queries -----------------------------------------------------------

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def prob_optimal(self) -> np.ndarray:
        """Component weights, i.e. P(component k) after all updates."""
        return self.weights()

    def _component_cdf(self) -> np.ndarray:
        if self._cdf is None:
            cdf = np.cumsum(self.weights())
            cdf[-1] = 1.0
            self._cdf = cdf
        return self._cdf

    def sample(self, rng: RngStream | np.random.Generator) -> np.ndarray:
        """One joint draw of the J arm means."""
        g = as_generator(rng)
        k = int(np.searchsorted(self._component_cdf(), g.random(), side="right"))
        return self.means[k] + np.sqrt(self.variances[k]) * g.standard_normal(self.J)

    def sample_batch(self, n: int,
                     rng: RngStream | np.random.Generator) -> np.ndarray:
        """``n`` independent joint draws, shape (n, J)."""
        g = as_generator(rng)
        ks = np.searchsorted(self._component_cdf(), g.random(n), side="right")
        z = g.standard_normal((n, self.J))
        return self.means[ks] + np.sqrt(self.variances[ks]) * z

    def all_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Marginal mean and variance of every arm (law of total variance)."""
        if self.n_components == 1:
            return self.means[0].copy(), self.variances[0].copy()
        w = self.weights()
        mean = w @ self.means
        second = w @ (self.variances + self.means ** 2)
        var = np.maximum(second - mean ** 2, 0.0)
        return mean, var

    def moments(self, arm: int) -> tuple[float, float]:
        """Marginal mean and variance of one arm (1-based)."""
        if not 1 <= arm <= self.J:
            raise ValueError(f"arm {arm} out of range 1..{self.J}")
        mean, var = self.all_moments()
        return float(mean[arm - 1]), float(var[arm - 1])


def update(post: MixturePosterior, arm: int, reward: float) -> MixturePosterior:
    """Functional form of :meth:`MixturePosterior.observe`."""
    out = post.copy()
    out.observe(arm, reward)
    return out


def gaussian_posterior(means: np.ndarray, variances: np.ndarray,
                       noise_var: float,
                       weights: np.ndarray | None = None) -> MixturePosterior:
    """Build a mixture posterior directly from component moments.

    With ``weights=None`` the components are weighted uniformly; pass a
    single row for a plain (one-component) Gaussian belief.
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    variances = np.atleast_2d(np.asarray(variances, dtype=float))
    if variances.shape != means.shape:
        if variances.size == 1:
            variances = np.full_like(means, float(variances.ravel()[0]))
        else:
            raise ValueError("variances must match means shape")
    K = means.shape[0]
    if weights is None:
        weights = np.full(K, 1.0 / K)
    return MixturePosterior.from_weights(weights, means, variances, noise_var)
