"""Bandit environments, sequential task generation, and reward sampling.

A task is a Gaussian bandit: arm ``j`` (1-based) pays ``theta[j-1]`` plus
centered Gaussian noise.  A task sequence chains tasks through a prior
provider: the optimal arm of task ``m`` is drawn conditionally on the optimal
arm of task ``m-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from .rng import RngStream, as_generator


@runtime_checkable
class PriorProvider(Protocol):
    """Source of conditional optimal-arm distributions over ``{1..J}``."""

    @property
    def J(self) -> int: ...

    def initial_dist(self) -> np.ndarray: ...

    def next_dist(self, prev: int) -> np.ndarray: ...


@dataclass(frozen=True)
class Environment:
    """One bandit task with a strictly unique best arm.

    Arms are 1-based everywhere in the public interface.  ``noise_sd = 0``
    gives deterministic rewards, which is occasionally useful in tests.
    """

    theta: np.ndarray
    noise_sd: float = 1.0
    optimal_arm: int | None = None

    def __post_init__(self) -> None:
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 1 or theta.size < 2:
            raise ValueError("theta must be a 1-d vector with at least 2 arms")
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta entries must be finite")
        if self.noise_sd < 0 or not np.isfinite(self.noise_sd):
            raise ValueError("noise_sd must be a finite nonnegative real")
        best0 = int(np.argmax(theta))
        if int(np.sum(theta == theta[best0])) > 1:
            raise ValueError("theta has tied maxima; the best arm must be unique")
        theta = theta.copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if self.optimal_arm is None:
            object.__setattr__(self, "optimal_arm", best0 + 1)
        elif int(self.optimal_arm) != best0 + 1:
            raise ValueError(
                f"optimal_arm={self.optimal_arm} does not match argmax(theta)={best0 + 1}"
            )

    @property
    def J(self) -> int:
        return int(self.theta.size)


def pull(env: Environment, arm: int,
         rng: RngStream | np.random.Generator) -> float:
    """Sample one reward from ``arm`` (1-based)."""
    if not 1 <= arm <= env.J:
        raise ValueError(f"arm {arm} out of range 1..{env.J}")
    g = as_generator(rng)
    return float(env.theta[arm - 1] + env.noise_sd * g.standard_normal())


@dataclass(frozen=True)
class TaskSequence:
    """An ordered chain of tasks plus the provider that generated it."""

    tasks: tuple[Environment, ...]
    optimal_arms: tuple[int, ...]
    provider: object = None

    def __post_init__(self) -> None:
        if len(self.tasks) < 1:
            raise ValueError("a task sequence needs at least one task")
        if len(self.optimal_arms) != len(self.tasks):
            raise ValueError("optimal_arms length must match tasks length")
        for m, (env, a) in enumerate(zip(self.tasks, self.optimal_arms), start=1):
            if a != env.optimal_arm:
                raise ValueError(f"task {m}: recorded optimal arm {a} != {env.optimal_arm}")

    @property
    def M(self) -> int:
        return len(self.tasks)

    @property
    def J(self) -> int:
        return self.tasks[0].J


def categorical_draw(dist: np.ndarray, g: np.random.Generator, what: str) -> int:
    """Draw a 1-based index from a probability vector, validating support."""
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 1:
        raise ValueError(f"{what}: distribution must be a vector")
    if np.any(dist < 0) or not np.all(np.isfinite(dist)):
        raise ValueError(f"{what}: probabilities must be finite and nonnegative")
    total = float(dist.sum())
    if total <= 0:
        raise ValueError(f"{what}: empty support (all-zero distribution)")
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"{what}: probabilities sum to {total}, expected 1")
    cdf = np.cumsum(dist)
    cdf[-1] = 1.0  # guard rounding at the top end
    return int(np.searchsorted(cdf, g.random(), side="right")) + 1


def sample_task_sequence(provider: PriorProvider, M: int, params,
                         rng: RngStream | np.random.Generator,
                         noise_sd: float = 1.0) -> TaskSequence:
    """Draw an M-task chain with mean vectors built from mixture parameters.

    The optimal arm of task 1 comes from ``provider.initial_dist()``; each
    later one from ``provider.next_dist(prev)`` conditioned on the realized
    optimal arm of the previous task.  Arm means are ``params.mu`` everywhere
    except the drawn arm, which gets ``params.mu + params.delta``; with
    ``params.perturb`` set, independent ``N(0, sigma0^2)`` noise is added to
    every mean and the optimal arm is the realized argmax.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    g = as_generator(rng)
    J = provider.J
    tasks: list[Environment] = []
    arms: list[int] = []
    prev: int | None = None
    for m in range(1, M + 1):
        if prev is None:
            dist = provider.initial_dist()
            what = "initial distribution"
        else:
            dist = provider.next_dist(prev)
            what = f"context arm {prev}"
        j = categorical_draw(dist, g, what)
        theta = np.full(J, params.mu, dtype=float)
        theta[j - 1] += params.delta
        if getattr(params, "perturb", False):
            theta = theta + params.sigma0 * g.standard_normal(J)
        env = Environment(theta, noise_sd=noise_sd)
        tasks.append(env)
        arms.append(env.optimal_arm)
        prev = env.optimal_arm
    return TaskSequence(tuple(tasks), tuple(arms), provider=provider)


def sample_gaussian_task_sequence(prior, M: int,
                                  rng: RngStream | np.random.Generator,
                                  noise_sd: float = 1.0) -> TaskSequence:
    """Draw an M-task chain from a linear-map Gaussian prior.

    Task 1: a uniformly drawn arm ``j`` sets the mean vector ``mu0 * e_j``.
    Task m: the mean vector is ``mu0 * U[prev-1]`` where ``prev`` is the
    realized optimal arm of task ``m-1``.  Arm means are the mean vector plus
    independent ``N(0, sigma0^2)`` noise; the optimal arm is the argmax.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    g = as_generator(rng)
    J = prior.J
    tasks: list[Environment] = []
    arms: list[int] = []
    prev: int | None = None
    for m in range(1, M + 1):
        if prev is None:
            j = int(g.integers(1, J + 1))
            mean = np.zeros(J)
            mean[j - 1] = prior.mu0
        else:
            mean = prior.mu0 * prior.U[prev - 1]
        theta = mean + prior.sigma0 * g.standard_normal(J)
        env = Environment(theta, noise_sd=noise_sd)
        tasks.append(env)
        arms.append(env.optimal_arm)
        prev = env.optimal_arm
    return TaskSequence(tuple(tasks), tuple(arms), provider=prior)
