"""Experiment orchestration: replicated sequential task runs, metrics, and
CSV emission.

A run is B replications of an M-task sequence.  Each task m builds its prior
from the provider conditioned on the history (decisions, or revealed truth,
depending on feedback mode), loops select -> pull -> update -> stop, and
records the stopping time and decision.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import p300 as p3
from .algorithms import (BBTSState, BRState, TopTwoConfig, bbts_step,
                         bbts_update, br_round, random_select, top_two_select)
from .core import Environment, TaskSequence, categorical_draw, pull, \
    sample_gaussian_task_sequence, sample_task_sequence
from .posterior import MixturePosterior, gaussian_posterior
from .priors import (GaussianUPrior, MarkovPrior, MixturePriorParams,
                     WordModelTable, build_mixture_prior,
                     gaussian_prior_from_u, gaussian_u_first_task_prior,
                     load_word_table, u_matrix)
from .rng import CALIBRATION, REWARD, SELECT, STOP, TASKGEN, RngStream
from .stopping import (ASYMPTOTIC, FIXED_BUDGET, FIXED_CONFIDENCE,
                       GLRInputs, MOMENT_MATCHED, StoppingConfig,
                       asymptotic_threshold, bbts_stop, bonferroni,
                       chernoff_glr, decide, gaussian_mixture_stop)

SCENARIOS = ("synthetic_markov", "gaussian_u", "p300")
ALGORITHMS = ("stts", "stts-oracle", "vtts", "random", "br", "bbts")
FEEDBACK_MODES = ("none", "oracle_reveal", "backspace")

_REFERENCE_TABLE = "reference_table_j100.json"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: scenario, algorithm, prior parameters, stopping rule,
    replication count, and seeding.

    ``sigma0`` is a standard deviation (the mixture component spread);
    ``sigma_eeg`` is the stationary EEG noise *variance*.  For the p300
    scenario, ``J`` must equal the word-table vocabulary size.
    """

    scenario: str = "synthetic_markov"
    algorithm: str = "stts"
    J: int = 10
    M: int = 20
    B: int = 200
    master_seed: int = 0
    feedback: str = "none"
    stopping: StoppingConfig = field(default_factory=StoppingConfig)
    # selection rule
    beta: float = 0.5
    max_resample: int = 100
    # synthetic_markov prior / environment
    p: float = 0.5
    mu: float = 0.0
    delta: float = 2.0
    sigma0: float = math.sqrt(0.2)
    perturb: bool = False
    noise_sd: float = 1.0
    # gaussian_u prior
    u_kind: int = 1
    mu0: float = 5.0
    vtts_gaussian_sd: float = 10.0
    # baselines
    shrink: float = 0.25
    bbts_threshold: float | None = None
    p_max: float | None = None
    # p300
    sigma_eeg: float = 1.0
    eeg: p3.EEGConfig = field(default_factory=p3.EEGConfig)
    table_path: str | None = None
    truth_table_path: str | None = None
    calib_targets: int = 120
    calib_nontargets: int = 480
    p300_sigma0_frac: float = math.sqrt(0.05)
    # bookkeeping
    record_pulls: bool = False
    safety_cap: int = 1_000_000
    out: str | None = None

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.J < 2 or self.M < 1 or self.B < 1:
            raise ValueError("need J >= 2, M >= 1, B >= 1")
        if self.feedback not in FEEDBACK_MODES:
            raise ValueError(f"unknown feedback mode {self.feedback!r}")
        if self.scenario == "gaussian_u" and self.u_kind not in (1, 2, 3):
            raise ValueError("u_kind must be 1, 2, or 3")
        if self.scenario == "synthetic_markov" and not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if self.algorithm == "br" and self.stopping.mode != FIXED_CONFIDENCE:
            raise ValueError("batch racing supports fixed-confidence mode only")
        if self.stopping.M != self.M:
            raise ValueError("stopping.M must equal the task count M")
        if self.safety_cap < 1:
            raise ValueError("safety_cap must be >= 1")

    def effective_p_max(self) -> float:
        if self.p_max is not None:
            return self.p_max
        return 1.0 - self.stopping.delta / (1000.0 * self.M)

    def p_or_kind(self) -> str:
        if self.scenario == "synthetic_markov":
            return f"{self.p:g}"
        if self.scenario == "gaussian_u":
            return f"U{self.u_kind}"
        return "table"


@dataclass(frozen=True)
class RunResult:
    """Per-task stopping times, decisions, truths, and flags for one
    replication."""

    replication: int
    taus: np.ndarray
    decisions: np.ndarray
    truths: np.ndarray
    correct: np.ndarray
    capped: np.ndarray
    pull_logs: tuple[np.ndarray, ...] | None = None

    def __post_init__(self) -> None:
        M = self.taus.size
        for arr in (self.decisions, self.truths, self.correct, self.capped):
            if arr.size != M:
                raise ValueError("per-task arrays must share length M")

    @property
    def total_steps(self) -> int:
        return int(self.taus.sum())


@dataclass(frozen=True)
class Metrics:
    avg_accuracy: float
    zero_one_accuracy: float
    mean_total_steps: float
    std_total_steps: float
    B: int
    M: int

    def __post_init__(self) -> None:
        for a in (self.avg_accuracy, self.zero_one_accuracy):
            if not 0.0 <= a <= 1.0:
                raise ValueError("accuracies must lie in [0, 1]")
        if self.std_total_steps < 0:
            raise ValueError("std must be nonnegative")


def compute_metrics(results: list[RunResult]) -> Metrics:
    """Aggregate replications: per-(task, replication) accuracy, all-correct
    rate, and total-step moments (sample std, ddof=1; 0 for B=1)."""
    if not results:
        raise ValueError("no results to aggregate")
    correct = np.stack([r.correct for r in results])
    totals = np.asarray([r.total_steps for r in results], dtype=float)
    std = float(totals.std(ddof=1)) if totals.size > 1 else 0.0
    return Metrics(float(correct.mean()), float(correct.all(axis=1).mean()),
                   float(totals.mean()), std, len(results), correct.shape[1])


# ---------------------------------------------------------------------------
# Shared per-experiment context
# ---------------------------------------------------------------------------

def _reference_table_path() -> str:
    from importlib.resources import files
    return str(files("seqbai").joinpath("data", _REFERENCE_TABLE))


@lru_cache(maxsize=4)
def _load_table_cached(path: str) -> WordModelTable:
    return load_word_table(path)


@lru_cache(maxsize=8)
def _trained_model(master_seed: int, eeg: p3.EEGConfig, n_target: int,
                   n_nontarget: int) -> p3.SWLDAModel:
    stream = RngStream(master_seed, (0, 0, CALIBRATION))
    epochs = p3.generate_calibration(eeg, n_target, n_nontarget, stream)
    return p3.train_swlda(epochs)


@dataclass(frozen=True)
class SharedContext:
    """Objects built once per experiment and shared across replications."""

    provider: object
    params: MixturePriorParams | None
    noise_var: float
    bbts_threshold: float
    truth_provider: object = None
    model: p3.SWLDAModel | None = None
    eeg: p3.EEGConfig | None = None


def prepare_shared(cfg: ExperimentConfig) -> SharedContext:
    if cfg.scenario == "synthetic_markov":
        provider = MarkovPrior(cfg.p, cfg.J)
        params = MixturePriorParams(delta=cfg.delta, sigma0=cfg.sigma0,
                                    mu=cfg.mu, perturb=cfg.perturb)
        noise_var = max(cfg.noise_sd ** 2, 1e-12)
        thr = cfg.bbts_threshold if cfg.bbts_threshold is not None \
            else cfg.mu + cfg.delta / 2.0
        return SharedContext(provider, params, noise_var, thr)
    if cfg.scenario == "gaussian_u":
        provider = GaussianUPrior(u_matrix(cfg.u_kind, cfg.J), cfg.mu0,
                                  cfg.sigma0)
        noise_var = max(cfg.noise_sd ** 2, 1e-12)
        thr = cfg.bbts_threshold if cfg.bbts_threshold is not None \
            else cfg.mu0 / 2.0
        return SharedContext(provider, None, noise_var, thr)
    # p300
    path = cfg.table_path or _reference_table_path()
    table = _load_table_cached(path)
    truth = _load_table_cached(cfg.truth_table_path) \
        if cfg.truth_table_path else table
    if cfg.J != table.J:
        raise ValueError(f"J={cfg.J} must match the word-table vocabulary "
                         f"size {table.J}")
    if truth.J != table.J:
        raise ValueError("truth table vocabulary size must match the prior table")
    eeg = replace(cfg.eeg, noise_var=cfg.sigma_eeg)
    model = _trained_model(cfg.master_seed, eeg, cfg.calib_targets,
                           cfg.calib_nontargets)
    stats = model.calib_stats
    if stats.gap <= 0:
        raise ValueError("calibration failed: nonpositive score gap")
    params = MixturePriorParams(delta=stats.gap,
                                sigma0=cfg.p300_sigma0_frac * stats.gap,
                                mu=stats.nontarget_mean)
    thr = cfg.bbts_threshold if cfg.bbts_threshold is not None \
        else stats.nontarget_mean + stats.gap / 2.0
    return SharedContext(table, params, stats.pooled_var, thr,
                         truth_provider=truth, model=model, eeg=eeg)


# ---------------------------------------------------------------------------
# Per-task loops
# ---------------------------------------------------------------------------

def _task_prior(cfg: ExperimentConfig, shared: SharedContext,
                prev: int | None) -> MixturePosterior:
    """Belief state for one task given the history context arm (or None)."""
    alg = cfg.algorithm
    if cfg.scenario == "gaussian_u":
        prior: GaussianUPrior = shared.provider
        if alg in ("vtts", "random"):
            means = np.zeros((1, cfg.J))
            variances = np.full((1, cfg.J), cfg.vtts_gaussian_sd ** 2)
            return gaussian_posterior(means, variances, shared.noise_var)
        if prev is None:
            return gaussian_u_first_task_prior(prior, shared.noise_var)
        mean, var = gaussian_prior_from_u(prev, prior)
        return gaussian_posterior(mean[None, :], np.full((1, cfg.J), var),
                                  shared.noise_var)
    provider = shared.provider
    if alg in ("vtts", "random"):
        weights = np.full(provider.J, 1.0 / provider.J)
    elif prev is None:
        weights = provider.initial_dist()
    else:
        weights = provider.next_dist(prev)
    return build_mixture_prior(weights, shared.params, shared.noise_var)


def _fc_stop(post: MixturePosterior, t: int, stopping: StoppingConfig,
             noise_var: float) -> bool:
    if stopping.gamma_variant == MOMENT_MATCHED:
        means, variances = post.all_moments()
        return gaussian_mixture_stop(means, variances, t, stopping)
    stats = post.stats
    if np.any(stats.pulls == 0):
        return False
    glr = chernoff_glr(GLRInputs(stats.pulls, stats.means(),
                                 post.all_moments()[1], noise_var))
    threshold = asymptotic_threshold(t, post.J, bonferroni(stopping.delta,
                                                           stopping.M),
                                     stopping.C)
    return glr >= threshold


def _run_posterior_task(cfg: ExperimentConfig, shared: SharedContext,
                        post: MixturePosterior, select_fn, reward_fn
                        ) -> tuple[int, int, bool, np.ndarray | None]:
    """select -> pull -> update -> stop loop for posterior-based algorithms.

    Returns (tau, decision, capped, pull log or None).
    """
    stopping = cfg.stopping
    budget = stopping.mode == FIXED_BUDGET
    log = [] if cfg.record_pulls else None
    t = 0
    capped = False
    while True:
        t += 1
        arm = select_fn(post)
        post.observe(arm, reward_fn(arm))
        if log is not None:
            log.append(arm)
        if budget:
            if t >= stopping.t_max:
                break
        elif _fc_stop(post, t, stopping, shared.noise_var):
            break
        if t >= cfg.safety_cap:
            capped = True
            break
    pulls = np.asarray(log, dtype=np.int64) if log is not None else None
    return t, decide(post), capped, pulls


def _run_br_task(cfg: ExperimentConfig, shared: SharedContext,
                 reward_fn) -> tuple[int, int, bool, np.ndarray | None]:
    state = BRState.fresh(cfg.J, bonferroni(cfg.stopping.delta,
                                            cfg.stopping.M),
                          shared.noise_var, cfg.shrink)
    log = [] if cfg.record_pulls else None
    total = 0
    capped = False
    while len(state.surviving) > 1:
        pulled, _ = br_round(state, reward_fn)
        total += len(pulled)
        if log is not None:
            log.extend(pulled)
        if total >= cfg.safety_cap:
            capped = True
            break
    alive = sorted(state.surviving)
    if len(alive) == 1:
        decision = alive[0]
    else:
        idx = np.asarray(alive) - 1
        means = state.stats.reward_sums[idx] / np.maximum(state.stats.pulls[idx], 1)
        decision = alive[int(np.argmax(means))]
    pulls = np.asarray(log, dtype=np.int64) if log is not None else None
    return total, decision, capped, pulls


def _run_bbts_task(cfg: ExperimentConfig, shared: SharedContext, reward_fn,
                   g_sel: np.random.Generator, g_stop: np.random.Generator
                   ) -> tuple[int, int, bool, np.ndarray | None]:
    state = BBTSState.fresh(cfg.J, shared.bbts_threshold,
                            cfg.effective_p_max())
    stopping = cfg.stopping
    budget = stopping.mode == FIXED_BUDGET
    log = [] if cfg.record_pulls else None
    t = 0
    capped = False
    while True:
        t += 1
        arm = bbts_step(state, g_sel)
        state = bbts_update(state, arm, reward_fn(arm))
        if log is not None:
            log.append(arm)
        if budget:
            if t >= stopping.t_max:
                break
        elif bbts_stop(state, g_stop):
            break
        if t >= cfg.safety_cap:
            capped = True
            break
    decision = int(np.argmax(state.posterior_means())) + 1
    pulls = np.asarray(log, dtype=np.int64) if log is not None else None
    return t, decision, capped, pulls


# ---------------------------------------------------------------------------
# Run loops
# ---------------------------------------------------------------------------

def _p300_truths(cfg: ExperimentConfig, shared: SharedContext,
                 g: np.random.Generator) -> list[int]:
    truth: WordModelTable = shared.truth_provider
    arms: list[int] = []
    prev: int | None = None
    for _ in range(cfg.M):
        dist = truth.initial_dist() if prev is None else truth.next_dist(prev)
        arm = categorical_draw(dist, g, "truth table row")
        arms.append(arm)
        prev = arm
    return arms


def run_task_sequence(cfg: ExperimentConfig, replication: int,
                      shared: SharedContext | None = None) -> RunResult:
    """One replication: draw the truth chain, then run all M tasks."""
    if shared is None:
        shared = prepare_shared(cfg)
    g_task = RngStream(cfg.master_seed, (replication, 0, TASKGEN)).generator()

    if cfg.scenario == "synthetic_markov":
        seq = sample_task_sequence(shared.provider, cfg.M, shared.params,
                                   g_task, cfg.noise_sd)
        truths = list(seq.optimal_arms)
    elif cfg.scenario == "gaussian_u":
        seq = sample_gaussian_task_sequence(shared.provider, cfg.M, g_task,
                                            cfg.noise_sd)
        truths = list(seq.optimal_arms)
    else:
        seq = None
        truths = _p300_truths(cfg, shared, g_task)

    use_truth_history = (cfg.algorithm == "stts-oracle"
                         or cfg.feedback in ("oracle_reveal", "backspace"))
    tts_cfg = TopTwoConfig(cfg.beta, cfg.max_resample)

    taus = np.zeros(cfg.M, dtype=np.int64)
    decisions = np.zeros(cfg.M, dtype=np.int64)
    capped = np.zeros(cfg.M, dtype=bool)
    logs: list[np.ndarray] = []
    context: int | None = None

    for m in range(1, cfg.M + 1):
        g_sel = RngStream(cfg.master_seed, (replication, m, SELECT)).generator()
        if cfg.scenario == "p300":
            rew_ss = np.random.SeedSequence(
                cfg.master_seed, spawn_key=(replication, m, REWARD))
            tgt_ss, non_ss = rew_ss.spawn(2)
            channel = p3.ScoreChannel(shared.model, shared.eeg,
                                      _WrapStream(tgt_ss), _WrapStream(non_ss))
            target = truths[m - 1]
            reward_fn = lambda a, ch=channel, tw=target: ch.draw(
                p3.TARGET if a == tw else p3.NONTARGET)
        else:
            g_rew = RngStream(cfg.master_seed,
                              (replication, m, REWARD)).generator()
            env = seq.tasks[m - 1]
            reward_fn = lambda a, e=env, g=g_rew: pull(e, a, g)

        if cfg.algorithm == "br":
            tau, psi, cap, log = _run_br_task(cfg, shared, reward_fn)
        elif cfg.algorithm == "bbts":
            g_stop = RngStream(cfg.master_seed,
                               (replication, m, STOP)).generator()
            tau, psi, cap, log = _run_bbts_task(cfg, shared, reward_fn,
                                                g_sel, g_stop)
        else:
            post = _task_prior(cfg, shared, context)
            if cfg.algorithm == "random":
                select_fn = lambda p, g=g_sel: random_select(cfg.J, g)
            else:
                select_fn = lambda p, g=g_sel: top_two_select(p, tts_cfg, g)
            tau, psi, cap, log = _run_posterior_task(cfg, shared, post,
                                                     select_fn, reward_fn)

        taus[m - 1] = tau
        decisions[m - 1] = psi
        capped[m - 1] = cap
        if log is not None:
            logs.append(log)
        context = truths[m - 1] if use_truth_history else psi

    truths_arr = np.asarray(truths, dtype=np.int64)
    return RunResult(replication, taus, decisions, truths_arr,
                     decisions == truths_arr, capped,
                     tuple(logs) if cfg.record_pulls else None)


class _WrapStream:
    """Adapter: a pre-built SeedSequence posing as an RngStream."""

    def __init__(self, ss: np.random.SeedSequence):
        self._ss = ss

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self._ss))


def _run_one(args: tuple[ExperimentConfig, int]) -> RunResult:
    cfg, b = args
    return run_task_sequence(cfg, b)


def run_experiment(cfg: ExperimentConfig, workers: int = 1
                   ) -> tuple[Metrics, list[RunResult]]:
    """Run B replications (serial or in a process pool) and aggregate.

    The stream addressing makes worker scheduling irrelevant: serial and
    parallel runs produce identical results.
    """
    shared = prepare_shared(cfg)
    if workers <= 1:
        results = [run_task_sequence(cfg, b, shared) for b in range(cfg.B)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, [(cfg, b) for b in range(cfg.B)],
                                    chunksize=max(1, cfg.B // (4 * workers))))
        results.sort(key=lambda r: r.replication)
    return compute_metrics(results), results


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def expand_grid(cfg: ExperimentConfig,
                axes: dict[str, list]) -> list[ExperimentConfig]:
    """Cross-product of config overrides.  Keys prefixed ``stopping.`` reach
    into the stopping config.  An empty grid expands to nothing."""
    if not axes or any(not v for v in axes.values()):
        return []
    keys = sorted(axes)
    grid: list[dict] = [{}]
    for k in keys:
        grid = [dict(g, **{k: v}) for g in grid for v in axes[k]]
    points = []
    for overrides in grid:
        stopping_over = {k[len("stopping."):]: v for k, v in overrides.items()
                         if k.startswith("stopping.")}
        plain = {k: v for k, v in overrides.items()
                 if not k.startswith("stopping.")}
        point = replace(cfg, **plain) if plain else cfg
        if stopping_over:
            point = replace(point,
                            stopping=replace(point.stopping, **stopping_over))
        points.append(point)
    return points


def sweep(cfg: ExperimentConfig, axes: dict[str, list],
          workers: int = 1) -> list[tuple[ExperimentConfig, Metrics]]:
    """Run every grid point.  All points share the master seed, so compared
    series see common random numbers."""
    out = []
    for point in expand_grid(cfg, axes):
        metrics, _ = run_experiment(point, workers=workers)
        out.append((point, metrics))
    return out


# ---------------------------------------------------------------------------
# Allocation study (optimal-allocation convergence diagnostic)
# ---------------------------------------------------------------------------

ALLOCATION_DEFAULTS = dict(J=10, M=5, delta=0.5, sigma0=1.0, mu=0.0,
                           noise_sd=1.0, t_max=500)


def allocation_study(p_values: list[float], B: int = 200,
                     master_seed: int = 0, beta: float = 0.5,
                     checkpoints=tuple(range(50, 501, 50)),
                     **overrides) -> list[tuple[int, float, float, int]]:
    """Run budget-mode STTS and trace KL(empirical allocation, optimal).

    Returns rows (t, kl, p, replication); kl is averaged over the M tasks of
    the replication, with the optimal allocation centered on each task's true
    best arm.
    """
    from .theory import allocation_trace
    base = dict(ALLOCATION_DEFAULTS)
    base.update(overrides)
    t_max = base.pop("t_max")
    rows: list[tuple[int, float, float, int]] = []
    for p in p_values:
        cfg = ExperimentConfig(
            scenario="synthetic_markov", algorithm="stts", p=p, B=B,
            beta=beta, master_seed=master_seed, record_pulls=True,
            stopping=StoppingConfig(mode=FIXED_BUDGET, t_max=t_max,
                                    M=base.get("M", 5)),
            **base)
        _, results = run_experiment(cfg)
        cps = [c for c in checkpoints if c <= t_max]
        for res in results:
            traces = [allocation_trace(log, int(truth), cfg.J, beta, cps)
                      for log, truth in zip(res.pull_logs, res.truths)]
            mean_trace = np.mean(np.stack(traces), axis=0)
            for t, kl in zip(cps, mean_trace):
                rows.append((t, float(kl), p, res.replication))
    return rows


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

RESULTS_COLUMNS = ("scenario", "algorithm", "J", "M", "p_or_kind",
                   "sigma_eeg", "replication", "task", "tau", "decided",
                   "truth", "correct")
SUMMARY_COLUMNS = ("scenario", "algorithm", "J", "M", "p_or_kind",
                   "sigma_eeg", "t_max", "B", "avg_accuracy",
                   "zero_one_accuracy", "mean_total_steps",
                   "std_total_steps")


def results_rows(cfg: ExperimentConfig,
                 results: list[RunResult]) -> list[tuple]:
    sigma = f"{cfg.sigma_eeg:g}" if cfg.scenario == "p300" else ""
    rows = []
    for res in results:
        for m in range(cfg.M):
            rows.append((cfg.scenario, cfg.algorithm, cfg.J, cfg.M,
                         cfg.p_or_kind(), sigma, res.replication, m + 1,
                         int(res.taus[m]), int(res.decisions[m]),
                         int(res.truths[m]), int(res.correct[m])))
    return rows


def summary_row(cfg: ExperimentConfig, metrics: Metrics) -> tuple:
    sigma = f"{cfg.sigma_eeg:g}" if cfg.scenario == "p300" else ""
    t_max = cfg.stopping.t_max if cfg.stopping.mode == FIXED_BUDGET else ""
    return (cfg.scenario, cfg.algorithm, cfg.J, cfg.M, cfg.p_or_kind(),
            sigma, t_max, cfg.B, repr(metrics.avg_accuracy),
            repr(metrics.zero_one_accuracy), repr(metrics.mean_total_steps),
            repr(metrics.std_total_steps))


def write_csv(path: str, header: tuple[str, ...], rows: list[tuple]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
