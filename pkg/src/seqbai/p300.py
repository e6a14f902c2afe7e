"""P300 speller reward channel: synthetic EEG epochs and a stepwise LDA
scorer.

An epoch is a (electrodes x samples) window around one flash.  Noise is
AR(1) in time (coefficient ``ar_coef``, stationary marginal variance
``noise_var``) and correlated across electrodes through a Gaussian kernel on
the electrode grid.  Flashing the attended word adds a bump template; any
other flash adds a flat baseline.  A stepwise-regression classifier turns
epochs into scalar scores, and those scores are the bandit's rewards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import stats as sstats

from .rng import RngStream, as_generator

TARGET = "target"
NONTARGET = "nontarget"


@dataclass(frozen=True)
class EEGConfig:
    """Epoch geometry and noise law.

    ``noise_var`` is the stationary per-channel variance; ``kernel_bandwidth``
    the length scale of between-electrode correlation on the unit grid;
    ``amplitude_ratio`` the zero-noise peak-to-baseline ratio of target vs
    nontarget responses.  ``bump_width`` defaults to ``window_len / 6``.
    """

    n_electrodes: int = 16
    window_len: int = 25
    noise_var: float = 1.0
    kernel_bandwidth: float = 1.0
    ar_coef: float = 0.9
    amplitude_ratio: float = 5.0
    nontarget_amp: float = 1.0
    bump_center_frac: float = 0.6
    bump_width: float | None = None

    def __post_init__(self) -> None:
        if self.n_electrodes < 1 or self.window_len < 2:
            raise ValueError("need n_electrodes >= 1 and window_len >= 2")
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")
        if self.kernel_bandwidth <= 0:
            raise ValueError("kernel_bandwidth must be positive")
        if not abs(self.ar_coef) < 1:
            raise ValueError("ar_coef must satisfy |ar_coef| < 1")
        if self.amplitude_ratio <= 0 or self.nontarget_amp <= 0:
            raise ValueError("amplitudes must be positive")
        if not 0 <= self.bump_center_frac <= 1:
            raise ValueError("bump_center_frac must lie in [0, 1]")
        if self.bump_width is not None and self.bump_width <= 0:
            raise ValueError("bump_width must be positive")

    @property
    def n_features(self) -> int:
        return self.n_electrodes * self.window_len


def electrode_positions(n: int) -> np.ndarray:
    """Row-major unit-grid coordinates; 16 electrodes -> a 4x4 grid."""
    side = math.ceil(math.sqrt(n))
    pos = [(i // side, i % side) for i in range(n)]
    return np.asarray(pos, dtype=float)


@lru_cache(maxsize=8)
def _spatial_factor(cfg: EEGConfig) -> tuple[np.ndarray, np.ndarray]:
    """Spatial correlation matrix (unit diagonal) and its Cholesky factor."""
    pos = electrode_positions(cfg.n_electrodes)
    d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
    K = np.exp(-d2 / (2.0 * cfg.kernel_bandwidth ** 2))
    return K, np.linalg.cholesky(K)


def spatial_kernel(cfg: EEGConfig) -> np.ndarray:
    return _spatial_factor(cfg)[0].copy()


@lru_cache(maxsize=16)
def template(cfg: EEGConfig, label: str) -> np.ndarray:
    """Noise-free epoch for a label, shape (n_electrodes, window_len).

    The nontarget response is flat at ``nontarget_amp``.  The target response
    adds a Gaussian bump peaking at the sample nearest 60% of the window, so
    its peak is exactly ``amplitude_ratio * nontarget_amp``.
    """
    L = cfg.window_len
    base = np.full(L, cfg.nontarget_amp)
    if label == NONTARGET:
        row = base
    elif label == TARGET:
        center = round(cfg.bump_center_frac * (L - 1))
        width = cfg.bump_width if cfg.bump_width is not None else L / 6.0
        s = np.arange(L)
        bump = np.exp(-((s - center) ** 2) / (2.0 * width ** 2))
        row = base + cfg.nontarget_amp * (cfg.amplitude_ratio - 1.0) * bump
    else:
        raise ValueError(f"unknown label {label!r}")
    out = np.tile(row, (cfg.n_electrodes, 1))
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class EEGEpoch:
    values: np.ndarray  # (n_electrodes, window_len)
    label: str

    def __post_init__(self) -> None:
        if self.label not in (TARGET, NONTARGET):
            raise ValueError(f"unknown label {self.label!r}")
        if self.values.ndim != 2:
            raise ValueError("values must be (electrodes, samples)")


def _noise_batch(cfg: EEGConfig, n: int, g: np.random.Generator) -> np.ndarray:
    """n stationary AR(1) x spatial-kernel noise epochs, shape (n, E, L)."""
    _, chol = _spatial_factor(cfg)
    E, L = cfg.n_electrodes, cfg.window_len
    # innovations with the spatial correlation baked in, unit marginal var
    eps = g.standard_normal((n, L, E)) @ chol.T
    x = np.empty((n, L, E))
    x[:, 0] = eps[:, 0]
    scale = math.sqrt(1.0 - cfg.ar_coef ** 2)
    for t in range(1, L):
        x[:, t] = cfg.ar_coef * x[:, t - 1] + scale * eps[:, t]
    return math.sqrt(cfg.noise_var) * np.swapaxes(x, 1, 2)


def generate_epoch_batch(cfg: EEGConfig, labels: Sequence[str],
                         rng: RngStream | np.random.Generator) -> np.ndarray:
    """Stack of epochs for the given labels, shape (len(labels), E, L)."""
    g = as_generator(rng)
    out = _noise_batch(cfg, len(labels), g)
    for i, lab in enumerate(labels):
        out[i] += template(cfg, lab)
    return out


def generate_epoch(cfg: EEGConfig, label: str,
                   rng: RngStream | np.random.Generator) -> EEGEpoch:
    values = generate_epoch_batch(cfg, [label], rng)[0]
    return EEGEpoch(values, label)


def generate_calibration(cfg: EEGConfig, n_target: int, n_nontarget: int,
                         rng: RngStream | np.random.Generator) -> list[EEGEpoch]:
    """Labeled i.i.d. epochs: all targets first, then all nontargets."""
    if n_target < 1 or n_nontarget < 1:
        raise ValueError("need at least one epoch per class")
    labels = [TARGET] * n_target + [NONTARGET] * n_nontarget
    values = generate_epoch_batch(cfg, labels, rng)
    return [EEGEpoch(v, lab) for v, lab in zip(values, labels)]


# ---------------------------------------------------------------------------
# Stepwise LDA
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibStats:
    """Held-out score moments per class."""

    target_mean: float
    target_var: float
    nontarget_mean: float
    nontarget_var: float

    @property
    def gap(self) -> float:
        return self.target_mean - self.nontarget_mean

    @property
    def pooled_var(self) -> float:
        return 0.5 * (self.target_var + self.nontarget_var)


@dataclass(frozen=True)
class SWLDAModel:
    """Sparse linear scorer: score = intercept + sum_k w_k x[e_k, s_k].

    ``selected`` holds 1-based (electrode, sample) pairs aligned with
    ``weights``.
    """

    selected: tuple[tuple[int, int], ...]
    weights: np.ndarray
    intercept: float
    calib_stats: CalibStats
    n_electrodes: int
    window_len: int

    def __post_init__(self) -> None:
        if len(self.selected) == 0:
            raise ValueError("model must select at least one feature")
        if len(self.selected) != len(self.weights):
            raise ValueError("weights length must match selected features")
        for e, s in self.selected:
            if not (1 <= e <= self.n_electrodes and 1 <= s <= self.window_len):
                raise ValueError(f"feature ({e}, {s}) out of range")

    def feature_indices(self) -> np.ndarray:
        """Flat electrode-major indices into a flattened epoch."""
        return np.asarray([(e - 1) * self.window_len + (s - 1)
                           for e, s in self.selected], dtype=np.int64)


def _stepwise_regression(X: np.ndarray, y: np.ndarray, p_enter: float,
                         p_remove: float, max_features: int) -> tuple[list[int], np.ndarray]:
    """Forward/backward stepwise OLS of y on columns of X.

    Returns the selected column indices and the fitted coefficients
    (intercept first).  Partial F tests enter features at p < p_enter and
    remove them at p > p_remove.
    """
    n, F = X.shape
    selected: list[int] = []
    in_model = np.zeros(F, dtype=bool)

    def design(cols: list[int]) -> np.ndarray:
        return np.column_stack([np.ones(n)] + [X[:, c] for c in cols])

    for _ in range(10 * max_features):  # hard cap; stepwise can cycle
        changed = False
        # forward: screen every candidate's partial F via residual projection
        if len(selected) < max_features:
            D = design(selected)
            Q, _ = np.linalg.qr(D)
            ry = y - Q @ (Q.T @ y)
            rss = float(ry @ ry)
            dof = n - D.shape[1] - 1
            if dof >= 1 and rss > 0:
                R = X - Q @ (Q.T @ X)
                ss = np.einsum("ij,ij->j", R, R)
                proj = R.T @ ry
                valid = (~in_model) & (ss > 1e-10)
                with np.errstate(divide="ignore", invalid="ignore"):
                    gain = proj ** 2 / ss
                    fstat = gain * dof / np.maximum(rss - gain, 1e-300)
                fstat = np.where(valid, fstat, 0.0)
                pvals = np.where(valid, sstats.f.sf(fstat, 1, dof), np.inf)
                best = int(np.argmin(pvals))
                if pvals[best] < p_enter:
                    selected.append(best)
                    in_model[best] = True
                    changed = True
        # backward: drop the worst included feature while any p > p_remove
        while selected:
            D = design(selected)
            Q, Rm = np.linalg.qr(D)
            coef = np.linalg.solve(Rm, Q.T @ y)
            resid = y - D @ coef
            dof = n - D.shape[1]
            if dof < 1:
                raise ValueError("not enough observations for the model size")
            s2 = float(resid @ resid) / dof
            Rinv = np.linalg.inv(Rm)
            se2 = np.sum(Rinv * Rinv, axis=1) * s2
            with np.errstate(divide="ignore", invalid="ignore"):
                f_each = coef[1:] ** 2 / np.maximum(se2[1:], 1e-300)
            pvals = sstats.f.sf(f_each, 1, dof)
            worst = int(np.argmax(pvals))
            if pvals[worst] > p_remove:
                in_model[selected[worst]] = False
                del selected[worst]
                changed = True
            else:
                break
        if not changed:
            break

    if not selected:
        raise ValueError("stepwise selection kept no features; "
                         "calibration data may be degenerate")
    D = design(selected)
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    return selected, coef


def train_swlda(data: Sequence[EEGEpoch], p_enter: float = 0.10,
                p_remove: float = 0.15, max_features: int = 60) -> SWLDAModel:
    """Fit the stepwise scorer on labeled epochs.

    Epochs are flattened electrode-major; labels regress as +/-1.  A
    deterministic stratified 80/20 split reserves every fifth epoch of each
    class for held-out calibration moments.  Needs at least 10 epochs per
    class and more training rows than ``max_features``.
    """
    if not 0 < p_enter < 1 or not 0 < p_remove < 1:
        raise ValueError("p_enter and p_remove must lie in (0, 1)")
    if max_features < 1:
        raise ValueError("max_features must be >= 1")
    epochs = list(data)
    if not epochs:
        raise ValueError("no calibration epochs")
    E, L = epochs[0].values.shape
    by_class: dict[str, list[int]] = {TARGET: [], NONTARGET: []}
    for i, ep in enumerate(epochs):
        if ep.values.shape != (E, L):
            raise ValueError("epochs disagree on shape")
        by_class[ep.label].append(i)
    if min(len(v) for v in by_class.values()) < 10:
        raise ValueError("need at least 10 epochs per class")

    hold_mask = np.zeros(len(epochs), dtype=bool)
    for idxs in by_class.values():
        hold_mask[np.asarray(idxs)[4::5]] = True

    X = np.stack([ep.values.reshape(-1) for ep in epochs])
    y = np.asarray([1.0 if ep.label == TARGET else -1.0 for ep in epochs])
    train = ~hold_mask
    if int(train.sum()) <= max_features + 1:
        raise ValueError("need more training epochs than max_features")

    cols, coef = _stepwise_regression(X[train], y[train], p_enter, p_remove,
                                      max_features)
    selected = tuple((c // L + 1, c % L + 1) for c in cols)
    weights = np.asarray(coef[1:], dtype=float)
    intercept = float(coef[0])

    scores = X[hold_mask][:, cols] @ weights + intercept
    labels_held = y[hold_mask]
    tgt = scores[labels_held > 0]
    non = scores[labels_held < 0]
    if tgt.size < 2 or non.size < 2:
        raise ValueError("held-out split too small for score moments")
    stats = CalibStats(float(tgt.mean()), float(tgt.var(ddof=1)),
                       float(non.mean()), float(non.var(ddof=1)))
    return SWLDAModel(selected, weights, intercept, stats, E, L)


def score(model: SWLDAModel, epoch: EEGEpoch) -> float:
    """Scalar score of one epoch under the fitted model."""
    if epoch.values.shape != (model.n_electrodes, model.window_len):
        raise ValueError("epoch shape does not match the model")
    flat = epoch.values.reshape(-1)
    return float(flat[model.feature_indices()] @ model.weights + model.intercept)


def score_batch(model: SWLDAModel, values: np.ndarray) -> np.ndarray:
    """Scores for a stack of epochs, shape (n, E, L) -> (n,)."""
    if values.ndim != 3 or values.shape[1:] != (model.n_electrodes,
                                                model.window_len):
        raise ValueError("values must be (n, electrodes, samples)")
    flat = values.reshape(values.shape[0], -1)
    return flat[:, model.feature_indices()] @ model.weights + model.intercept


def p300_reward_channel(model: SWLDAModel, cfg: EEGConfig, target_word: int,
                        pulled: int, rng: RngStream | np.random.Generator) -> float:
    """Reward for flashing ``pulled`` while the user attends ``target_word``:
    generate the epoch the flash would evoke and return its score."""
    label = TARGET if pulled == target_word else NONTARGET
    return score(model, generate_epoch(cfg, label, rng))


class ScoreChannel:
    """Buffered reward channel: same law as :func:`p300_reward_channel` but
    epochs are generated and scored in chunks per label, each label drawing
    from its own substream so adaptive pull orders cannot re-interleave
    draws."""

    def __init__(self, model: SWLDAModel, cfg: EEGConfig, target_stream: RngStream,
                 nontarget_stream: RngStream, chunk: int = 128):
        if chunk < 1:
            raise ValueError("chunk must be >= 1")
        self._model = model
        self._cfg = cfg
        self._chunk = chunk
        self._gens = {TARGET: target_stream.generator(),
                      NONTARGET: nontarget_stream.generator()}
        self._buf: dict[str, list[float]] = {TARGET: [], NONTARGET: []}

    def draw(self, label: str) -> float:
        buf = self._buf[label]
        if not buf:
            values = generate_epoch_batch(self._cfg, [label] * self._chunk,
                                          self._gens[label])
            buf.extend(reversed(score_batch(self._model, values).tolist()))
        return buf.pop()


def export_model_table(model: SWLDAModel) -> str:
    """Flat text form: one (electrode, sample, weight) row per feature plus a
    final intercept row with electrode = sample = 0."""
    lines = ["electrode,sample,weight"]
    for (e, s), w in zip(model.selected, model.weights):
        lines.append(f"{e},{s},{float(w)!r}")
    lines.append(f"0,0,{float(model.intercept)!r}")
    return "\n".join(lines) + "\n"


def export_calibration_text(epochs: Sequence[EEGEpoch]) -> str:
    """One line per epoch: the label, then electrode-major sample values."""
    lines = []
    for ep in epochs:
        vals = ",".join(repr(float(v)) for v in ep.values.reshape(-1))
        lines.append(f"{ep.label},{vals}")
    return "\n".join(lines) + "\n"
