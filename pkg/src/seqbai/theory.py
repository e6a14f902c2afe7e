"""Expected-error bound calculators and allocation diagnostics.

The per-task error proxy is

    p_m = (6 / gap_m) * sqrt( ln(J (1 + n)) * H_m / (1 + n) )

where ``H_m`` is the entropy of the conditional optimal-arm distribution for
task m and ``n`` is the per-task pull budget.  The sequence bound averages
the ``p_m``; the remainder term discounts task m by the probability that all
earlier tasks were identified correctly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class BoundInputs:
    """Budget ``n`` (pulls per task), arm count, per-task gaps and entropies,
    and an optional per-mistake cost for the oracle calculator."""

    n: int
    J: int
    gaps: np.ndarray
    entropies: np.ndarray
    mistake_cost: float = 0.0

    def __post_init__(self) -> None:
        gaps = np.asarray(self.gaps, dtype=float)
        ents = np.asarray(self.entropies, dtype=float)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.J < 2:
            raise ValueError("J must be >= 2")
        if gaps.ndim != 1 or gaps.size < 1:
            raise ValueError("gaps must be a nonempty vector")
        if ents.shape != gaps.shape:
            raise ValueError("entropies must match gaps in length")
        if np.any(gaps <= 0):
            raise ValueError("gaps must be positive")
        if np.any(ents < 0) or np.any(ents > math.log(self.J) + 1e-9):
            raise ValueError("entropies must lie in [0, ln J]")
        if self.mistake_cost < 0:
            raise ValueError("mistake_cost must be nonnegative")
        object.__setattr__(self, "gaps", gaps)
        object.__setattr__(self, "entropies", ents)

    @property
    def M(self) -> int:
        return int(self.gaps.size)


class Theorem1Bound(NamedTuple):
    main: float
    remainder: float
    total: float


def _per_task_terms(inp: BoundInputs) -> np.ndarray:
    scale = math.log(inp.J * (1 + inp.n)) / (1 + inp.n)
    return (6.0 / inp.gaps) * np.sqrt(scale * inp.entropies)


def theorem1_bound(inp: BoundInputs) -> Theorem1Bound:
    """Average expected-error bound over the task sequence.

    The main term averages the raw ``p_m`` (it may exceed 1; the bound is
    then vacuous but the arithmetic stands).  The remainder is
    ``1 - (1/M) sum_m prod_{j<m} (1 - p_j)`` with each ``p_j`` clipped to
    [0, 1] so the products stay probabilities.
    """
    p = _per_task_terms(inp)
    main = float(np.mean(p))
    clipped = np.clip(p, 0.0, 1.0)
    # prod_{j<m}(1 - p_j) for m = 1..M; m = 1 has an empty product = 1.
    prefix = np.concatenate(([1.0], np.cumprod(1.0 - clipped)[:-1]))
    remainder = float(1.0 - np.mean(prefix))
    return Theorem1Bound(main, remainder, main + remainder)


class OracleBound(NamedTuple):
    error_sum: float
    expected_cost: float


def oracle_bound(inp: BoundInputs) -> OracleBound:
    """Sum of clipped per-task error terms and its cost-weighted value."""
    p = np.minimum(_per_task_terms(inp), 1.0)
    total = float(np.sum(p))
    return OracleBound(total, inp.mistake_cost * total)


# ---------------------------------------------------------------------------
# Allocation diagnostics
# ---------------------------------------------------------------------------

def optimal_allocation(J: int, beta: float, best_arm: int = 1) -> np.ndarray:
    """Asymptotically optimal pull fractions: ``beta`` on the best arm and
    ``(1 - beta) / (J - 1)`` on every other arm."""
    if J < 2:
        raise ValueError("J must be >= 2")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    if not 1 <= best_arm <= J:
        raise ValueError(f"best_arm {best_arm} out of range 1..{J}")
    out = np.full(J, (1.0 - beta) / (J - 1))
    out[best_arm - 1] = beta
    return out


def kl_discrete(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) in nats with 0 log 0 = 0; +inf when q lacks p's support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("p and q must have the same length")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("probabilities must be nonnegative")
    if abs(float(p.sum()) - 1.0) > 1e-9 or abs(float(q.sum()) - 1.0) > 1e-9:
        raise ValueError("p and q must each sum to 1")
    support = p > 0
    if np.any(q[support] == 0):
        return float("inf")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


@dataclass(frozen=True)
class AllocationSnapshot:
    """Pull counts at round t for one task."""

    counts: np.ndarray
    t: int
    best_arm: int

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if int(counts.sum()) != self.t:
            raise ValueError("counts must sum to t")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if not 1 <= self.best_arm <= counts.size:
            raise ValueError("best_arm out of range")
        object.__setattr__(self, "counts", counts)

    def fractions(self) -> np.ndarray:
        if self.t == 0:
            raise ValueError("no pulls yet")
        return self.counts / float(self.t)


DEFAULT_CHECKPOINTS = tuple(range(50, 501, 50))


def allocation_trace(pulls: Sequence[int], best_arm: int, J: int, beta: float,
                     checkpoints: Iterable[int] = DEFAULT_CHECKPOINTS) -> np.ndarray:
    """KL between empirical and optimal allocation at each checkpoint.

    ``pulls`` is one task's pull sequence (1-based arms, round order).  An
    empty sequence gives an empty trace; a checkpoint beyond the recorded
    length is an error.
    """
    pulls = np.asarray(list(pulls), dtype=np.int64)
    if pulls.size == 0:
        return np.empty(0)
    if np.any(pulls < 1) or np.any(pulls > J):
        raise ValueError("pull entries must be arms in 1..J")
    cps = sorted(int(c) for c in checkpoints)
    if cps and cps[-1] > pulls.size:
        raise ValueError(f"checkpoint {cps[-1]} beyond run length {pulls.size}")
    if cps and cps[0] < 1:
        raise ValueError("checkpoints must be >= 1")
    target = optimal_allocation(J, beta, best_arm)
    out = np.empty(len(cps))
    for i, t in enumerate(cps):
        counts = np.bincount(pulls[:t] - 1, minlength=J)
        out[i] = kl_discrete(counts / t, target)
    return out
