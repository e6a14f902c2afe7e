"""Prior providers: Markov successor kernels, linear-map Gaussian priors,
and word-model transition tables.

All of these answer the same question -- "given that arm ``prev`` was optimal
last task, how likely is each arm to be optimal now?" -- and feed either the
task generator (as ground truth) or the algorithms (as informed priors).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .posterior import MixturePosterior
from .rng import RngStream, as_generator


# ---------------------------------------------------------------------------
# Markov successor kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkovPrior:
    """Cyclic successor kernel: the next arm after ``prev`` gets mass ``p``,
    every other arm gets ``(1 - p) / (J - 1)``.  Arm J wraps to arm 1.

    ``p = 1/J`` makes every row uniform.  The kernel is doubly stochastic, so
    the uniform distribution is stationary and serves as the initial law.
    """

    p: float
    J: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.J < 2:
            raise ValueError("J must be >= 2")

    def initial_dist(self) -> np.ndarray:
        return np.full(self.J, 1.0 / self.J)

    def next_dist(self, prev: int) -> np.ndarray:
        return markov_next_dist(prev, self)


def markov_next_dist(prev: int, prior: MarkovPrior) -> np.ndarray:
    """Successor distribution over arms given last optimal arm ``prev``."""
    J = prior.J
    if not 1 <= prev <= J:
        raise ValueError(f"prev arm {prev} out of range 1..{J}")
    dist = np.full(J, (1.0 - prior.p) / (J - 1))
    dist[prev % J] = prior.p
    return dist


def conditional_entropy(dist: np.ndarray) -> float:
    """Shannon entropy in nats of a probability vector, with 0*log(0) = 0."""
    dist = np.asarray(dist, dtype=float)
    if np.any(dist < 0):
        raise ValueError("probabilities must be nonnegative")
    total = float(dist.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total}, expected 1")
    pos = dist[dist > 0]
    return float(-np.sum(pos * np.log(pos)))


# ---------------------------------------------------------------------------
# Mixture prior over "arm j is optimal" hypotheses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixturePriorParams:
    """Shape of each mixture component.

    Under component j, arm j's mean is ``N(mu + delta, sigma0^2)`` and every
    other arm's mean is ``N(mu, sigma0^2)``, independently.  ``sigma1`` is a
    reserved second spread parameter for non-optimal arms; the current
    components use ``sigma0`` for all arms and ``sigma1`` is unused.
    ``perturb`` controls whether the task generator adds Gaussian noise to
    the component means when drawing ground truth.
    """

    delta: float
    sigma0: float
    mu: float = 0.0
    sigma1: float = 1.0
    weights: np.ndarray | None = None
    perturb: bool = False

    def __post_init__(self) -> None:
        if self.delta <= 0 or not math.isfinite(self.delta):
            raise ValueError("delta must be a positive real")
        if self.sigma0 <= 0 or not math.isfinite(self.sigma0):
            raise ValueError("sigma0 must be a positive real")
        if self.sigma1 <= 0 or not math.isfinite(self.sigma1):
            raise ValueError("sigma1 must be a positive real")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-6:
                raise ValueError("weights must be a probability vector")
            object.__setattr__(self, "weights", w)


def build_mixture_prior(weights: np.ndarray | None, params: MixturePriorParams,
                        noise_var: float = 1.0) -> MixturePosterior:
    """J-component mixture belief with component k = "arm k is optimal".

    ``weights`` is the probability each arm is optimal (defaults to
    ``params.weights``).  Zero entries are floored so later evidence can
    always revive a component.
    """
    if weights is None:
        weights = params.weights
    if weights is None:
        raise ValueError("weights must be given here or in params")
    w = np.asarray(weights, dtype=float)
    J = w.size
    if J < 2:
        raise ValueError("need at least 2 arms")
    means = np.full((J, J), params.mu, dtype=float)
    np.fill_diagonal(means, params.mu + params.delta)
    variances = np.full((J, J), params.sigma0 ** 2, dtype=float)
    return MixturePosterior.from_weights(w, means, variances, noise_var)


# ---------------------------------------------------------------------------
# Linear-map Gaussian priors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianUPrior:
    """Gaussian prior whose mean vector is a row of ``mu0 * U``.

    Row ``prev`` of ``U`` (entries in [0, 1]) says how strongly each arm's
    mean is excited when ``prev`` was the last optimal arm.  The first task
    has no context: each arm is optimal with equal probability, with mean
    vector ``mu0 * e_j`` under hypothesis j.
    """

    U: np.ndarray
    mu0: float
    sigma0: float

    def __post_init__(self) -> None:
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[0] < 2:
            raise ValueError("U must be a square matrix of size >= 2")
        if np.any(U < 0) or np.any(U > 1):
            raise ValueError("U entries must lie in [0, 1]")
        U = U.copy()
        U.setflags(write=False)
        object.__setattr__(self, "U", U)
        if self.mu0 <= 0 or not math.isfinite(self.mu0):
            raise ValueError("mu0 must be a positive real")
        if self.sigma0 <= 0 or not math.isfinite(self.sigma0):
            raise ValueError("sigma0 must be a positive real")

    @property
    def J(self) -> int:
        return int(self.U.shape[0])


def u_matrix(kind: int, J: int) -> np.ndarray:
    """Build one of the three reference excitation matrices.

    kind 1: pure cyclic shift -- entry 1 at column offsets {+1} (wrapping).
    kind 2: two disjoint cycles -- a (J-2)-cycle over arms 1..J-2 and a
            2-cycle swapping arms J-1 and J.
    kind 3: cyclic shift with a secondary echo -- 1 at offset +1 and 0.5 at
            offset +2 (both wrapping).
    """
    if kind == 1:
        if J < 2:
            raise ValueError("kind 1 needs J >= 2")
        U = np.zeros((J, J))
        for i in range(J):
            U[i, (i + 1) % J] = 1.0
        return U
    if kind == 2:
        if J < 3:
            raise ValueError("kind 2 needs J >= 3")
        U = np.zeros((J, J))
        pairs = [(i, i + 1) for i in range(1, J - 2)] + [(J - 2, 1)]
        pairs += [(J - 1, J), (J, J - 1)]
        for a, b in pairs:
            U[a - 1, b - 1] = 1.0
        return U
    if kind == 3:
        if J < 3:
            raise ValueError("kind 3 needs J >= 3")
        U = np.zeros((J, J))
        for i in range(J):
            U[i, (i + 1) % J] = 1.0
            U[i, (i + 2) % J] = 0.5
        return U
    raise ValueError(f"unknown U matrix kind {kind}")


def gaussian_prior_from_u(prev: int, prior: GaussianUPrior) -> tuple[np.ndarray, float]:
    """Conditional prior for the next task: mean vector and common variance."""
    if not 1 <= prev <= prior.J:
        raise ValueError(f"prev arm {prev} out of range 1..{prior.J}")
    return prior.mu0 * prior.U[prev - 1].copy(), prior.sigma0 ** 2


def gaussian_u_first_task_prior(prior: GaussianUPrior,
                                noise_var: float = 1.0) -> MixturePosterior:
    """Uniform mixture over "arm j optimal" with mean ``mu0 * e_j`` each."""
    J = prior.J
    means = prior.mu0 * np.eye(J)
    variances = np.full((J, J), prior.sigma0 ** 2)
    return MixturePosterior.from_weights(np.full(J, 1.0 / J), means, variances,
                                         noise_var)


# ---------------------------------------------------------------------------
# Word-model transition tables
# ---------------------------------------------------------------------------

class WordTableError(ValueError):
    """Raised when a word-table file fails validation."""


@dataclass(frozen=True)
class WordModelTable:
    """Vocabulary with an initial word distribution and next-word rows.

    Transition keys containing spaces are multi-word contexts; they are
    validated and stored but the sequential engine only consumes the
    single-word (order-1) rows.
    """

    vocab: tuple[str, ...]
    initial: np.ndarray
    transitions: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if len(self.vocab) < 2:
            raise WordTableError("vocabulary must contain at least 2 words")
        if len(set(self.vocab)) != len(self.vocab):
            raise WordTableError("vocabulary contains duplicate words")
        self._check_row("initial", self.initial)
        for word in self.vocab:
            if word not in self.transitions:
                raise WordTableError(f"missing transition row for word {word!r}")
        for ctx, row in self.transitions.items():
            self._check_row(ctx, row)

    def _check_row(self, label: str, row: np.ndarray) -> None:
        if row.shape != (len(self.vocab),):
            raise WordTableError(f"row {label!r} has wrong length")
        if np.any(row < 0) or not np.all(np.isfinite(row)):
            raise WordTableError(f"row {label!r} has negative or non-finite entries")
        if abs(float(row.sum()) - 1.0) > 1e-6:
            raise WordTableError(f"row {label!r} sums to {float(row.sum())}, expected 1")

    @property
    def J(self) -> int:
        return len(self.vocab)

    def initial_dist(self) -> np.ndarray:
        return self.initial.copy()

    def next_dist(self, prev: int) -> np.ndarray:
        if not 1 <= prev <= self.J:
            raise ValueError(f"prev arm {prev} out of range 1..{self.J}")
        return self.transitions[self.vocab[prev - 1]].copy()

    def word(self, arm: int) -> str:
        return self.vocab[arm - 1]


def _dense_row(label: str, sparse: dict, vocab_index: dict[str, int],
               J: int) -> np.ndarray:
    row = np.zeros(J)
    for word, prob in sparse.items():
        if word not in vocab_index:
            raise WordTableError(f"row {label!r} references unknown word {word!r}")
        if not isinstance(prob, (int, float)) or not math.isfinite(prob):
            raise WordTableError(f"row {label!r}: probability for {word!r} not a finite number")
        if prob < 0:
            raise WordTableError(f"row {label!r}: negative probability for {word!r}")
        row[vocab_index[word]] = float(prob)
    total = float(row.sum())
    if abs(total - 1.0) > 1e-4:
        raise WordTableError(
            f"row {label!r} sums to {total:.6g}; outside the 1e-4 renormalization band")
    if total <= 0:
        raise WordTableError(f"row {label!r} has empty support")
    return row / total


def load_word_table(path: str, cap: int = 100) -> WordModelTable:
    """Load and validate a JSON word table.

    Schema: ``{"vocab": [str], "initial": [float] or {word: float},
    "transitions": {context: {word: float}}}``.  Rows whose mass is within
    1e-4 of 1 are renormalized; anything further off is rejected with the
    offending context named.  Vocabularies above ``cap`` words are rejected.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise WordTableError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise WordTableError("top level must be a JSON object")
    for key in ("vocab", "initial", "transitions"):
        if key not in doc:
            raise WordTableError(f"missing required field {key!r}")
    vocab = doc["vocab"]
    if (not isinstance(vocab, list) or len(vocab) < 2
            or not all(isinstance(w, str) for w in vocab)):
        raise WordTableError("vocab must be a list of at least 2 strings")
    if len(set(vocab)) != len(vocab):
        raise WordTableError("vocab contains duplicate words")
    if len(vocab) > cap:
        raise WordTableError(f"vocabulary size {len(vocab)} exceeds cap {cap}")
    index = {w: i for i, w in enumerate(vocab)}
    J = len(vocab)

    initial = doc["initial"]
    if isinstance(initial, dict):
        initial_row = _dense_row("initial", initial, index, J)
    elif isinstance(initial, list) and len(initial) == J:
        initial_row = _dense_row("initial", dict(zip(vocab, initial)), index, J)
    else:
        raise WordTableError("initial must be a word->prob map or a length-J list")

    transitions = doc["transitions"]
    if not isinstance(transitions, dict):
        raise WordTableError("transitions must be an object of context -> row")
    rows: dict[str, np.ndarray] = {}
    for ctx, sparse in transitions.items():
        if not isinstance(ctx, str) or not ctx:
            raise WordTableError("transition contexts must be nonempty strings")
        for piece in ctx.split(" "):
            if piece not in index:
                raise WordTableError(f"context {ctx!r} uses unknown word {piece!r}")
        if not isinstance(sparse, dict):
            raise WordTableError(f"row {ctx!r} must be a word->prob map")
        rows[ctx] = _dense_row(ctx, sparse, index, J)
    missing = [w for w in vocab if w not in rows]
    if missing:
        raise WordTableError(f"missing transition rows for: {', '.join(missing[:5])}")
    return WordModelTable(tuple(vocab), initial_row, rows)


def save_word_table(table: WordModelTable, path: str) -> None:
    """Write a table back out in the JSON schema (sparse rows, zeros dropped)."""
    def sparse(row: np.ndarray) -> dict[str, float]:
        return {table.vocab[i]: float(row[i]) for i in np.flatnonzero(row > 0)}

    doc = {
        "vocab": list(table.vocab),
        "initial": sparse(table.initial),
        "transitions": {ctx: sparse(row) for ctx, row in table.transitions.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


_SYLLABLES = ("ba", "re", "mo", "ti", "sa", "lu", "ke", "ni", "vo", "da",
              "pe", "ri", "ta", "su", "lo", "me", "ki", "na", "ve", "du")


def synthetic_word_table(J: int = 100, n_plausible: int = 5,
                         smoothing: float = 0.03,
                         seed: int = 2024) -> WordModelTable:
    """Deterministic synthetic table with low-entropy rows.

    Each context concentrates ``1 - smoothing`` of its mass on
    ``n_plausible`` successors with geometrically decaying weights and
    spreads the rest uniformly, giving row entropies far below ``ln J``.
    """
    if not 2 <= n_plausible <= J:
        raise ValueError("need 2 <= n_plausible <= J")
    if not 0 < smoothing < 1:
        raise ValueError("smoothing must lie in (0, 1)")
    if J > 8000:
        raise ValueError("synthetic vocabulary supports at most 8000 words")
    g = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    words = []
    for i in range(J):
        w = _SYLLABLES[(i // 20) % 20] + _SYLLABLES[i % 20]
        if i >= 400:
            w += _SYLLABLES[(i // 400) % 20]
        words.append(w)
    vocab = tuple(words)

    top = 0.5 ** np.arange(n_plausible)
    top = (1.0 - smoothing) * top / top.sum()

    def make_row() -> np.ndarray:
        succ = g.choice(J, size=n_plausible, replace=False)
        row = np.full(J, smoothing / J)
        row[succ] += top
        return row / row.sum()

    initial = make_row()
    rows = {w: make_row() for w in vocab}
    return WordModelTable(vocab, initial, rows)
