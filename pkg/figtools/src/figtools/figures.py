"""Render diagnostic figures from experiment CSV files.

Four figure kinds are supported, each reading one or more CSV files that
share a required column set:

``entropy_curve``
    Per-position next-word entropy of an extracted word table
    (columns ``position``, ``entropy``).
``allocation_kl``
    Mean KL divergence between empirical and optimal arm allocation
    against pull count, one line per prior strength ``p``
    (columns ``t``, ``kl``, ``p``).
``fc_steps_vs_p``
    Mean steps to stop against prior strength, one line per algorithm,
    from a fixed-confidence summary CSV
    (columns ``algorithm``, ``p_or_kind``, ``mean_total_steps``).
``fb_accuracy_vs_budget``
    Average accuracy against per-task budget, one panel per prior
    strength and one line per algorithm, from a fixed-budget summary CSV
    (columns ``algorithm``, ``p_or_kind``, ``t_max``, ``avg_accuracy``).

Rendering is deterministic: identical inputs produce byte-identical
image files (fixed dpi, fixed metadata, salted SVG ids).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

from matplotlib.figure import Figure  # noqa: E402  (backend set first)

__all__ = ["FigureSpec", "FigureError", "FIGURE_IDS", "build_figure", "render"]


class FigureError(ValueError):
    """Raised for unknown figure ids, unreadable CSVs, or missing columns."""


@dataclass(frozen=True)
class FigureSpec:
    """A figure request: what to draw, from which CSVs, to which file."""

    figure: str
    csv_paths: tuple[str, ...]
    out_path: str

    def __post_init__(self) -> None:
        if isinstance(self.csv_paths, (str, Path)):  # a lone path is fine
            object.__setattr__(self, "csv_paths", (str(self.csv_paths),))
        else:
            object.__setattr__(
                self, "csv_paths", tuple(str(p) for p in self.csv_paths))
        if not self.csv_paths:
            raise FigureError("spec needs at least one CSV path")


# ---------------------------------------------------------------------------
# CSV loading
# ---------------------------------------------------------------------------

def _load_rows(paths: Sequence[str],
               required: Sequence[str]) -> list[dict[str, str]]:
    """Read and concatenate CSV rows, checking the required columns.

    Raises :class:`FigureError` if a file is missing, lacks a required
    column, or if no data rows remain after reading every file.
    """
    rows: list[dict[str, str]] = []
    for path in paths:
        p = Path(path)
        if not p.is_file():
            raise FigureError(f"CSV not found: {path}")
        with p.open(newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in required if c not in header]
            if missing:
                raise FigureError(
                    f"{path} is missing required column(s) "
                    f"{', '.join(missing)}; found {header or 'no header'}")
            rows.extend(reader)
    if not rows:
        raise FigureError(
            f"no data rows in {', '.join(paths)}; nothing to plot")
    return rows


def _floats(rows: Sequence[Mapping[str, str]], column: str) -> list[float]:
    try:
        return [float(r[column]) for r in rows]
    except ValueError as exc:
        raise FigureError(f"column {column!r} has a non-numeric value: {exc}")


def _series_key(rows: Sequence[Mapping[str, str]],
                column: str) -> list[str]:
    """Distinct values of ``column`` in first-appearance order."""
    seen: dict[str, None] = {}
    for r in rows:
        seen.setdefault(r[column], None)
    return list(seen)


def _sorted_numeric_labels(labels: Sequence[str]) -> list[str]:
    """Sort labels numerically when possible, lexically otherwise."""
    try:
        return sorted(labels, key=float)
    except ValueError:
        return sorted(labels)


def _mean_by(xs: Sequence[float], ys: Sequence[float]) -> tuple[list[float],
                                                                list[float]]:
    """Group ``ys`` by ``xs`` and return (sorted xs, mean y per x)."""
    acc: dict[float, list[float]] = {}
    for x, y in zip(xs, ys):
        acc.setdefault(x, []).append(y)
    keys = sorted(acc)
    return keys, [sum(acc[k]) / len(acc[k]) for k in keys]


# ---------------------------------------------------------------------------
# Figure builders
# ---------------------------------------------------------------------------

_FIGSIZE = (6.0, 4.0)
_PANEL_FIGSIZE = (9.0, 6.5)


def _new_figure(figsize: tuple[float, float] = _FIGSIZE) -> Figure:
    return Figure(figsize=figsize, dpi=120)


def _entropy_curve(rows: list[dict[str, str]]) -> Figure:
    pos = _floats(rows, "position")
    ent = _floats(rows, "entropy")
    order = sorted(range(len(pos)), key=lambda i: pos[i])
    fig = _new_figure()
    ax = fig.add_subplot(111)
    ax.plot([pos[i] for i in order], [ent[i] for i in order],
            marker="o", color="tab:blue")
    ax.set_xlabel("position in word chain")
    ax.set_ylabel("next-word entropy (nats)")
    ax.set_title("Entropy along the extracted word chain")
    ax.grid(True, alpha=0.3)
    return fig


def _allocation_kl(rows: list[dict[str, str]]) -> Figure:
    fig = _new_figure()
    ax = fig.add_subplot(111)
    for p in _sorted_numeric_labels(_series_key(rows, "p")):
        sub = [r for r in rows if r["p"] == p]
        t, kl = _mean_by(_floats(sub, "t"), _floats(sub, "kl"))
        ax.plot(t, kl, label=f"p = {p}")
    ax.set_xlabel("pulls t")
    ax.set_ylabel("KL(empirical allocation || optimal)")
    ax.set_title("Allocation convergence")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3, which="both")
    ax.legend()
    return fig


def _fc_steps_vs_p(rows: list[dict[str, str]]) -> Figure:
    fig = _new_figure()
    ax = fig.add_subplot(111)
    for algo in sorted(_series_key(rows, "algorithm")):
        sub = [r for r in rows if r["algorithm"] == algo]
        p, steps = _mean_by(_floats(sub, "p_or_kind"),
                            _floats(sub, "mean_total_steps"))
        ax.plot(p, steps, marker="o", label=algo)
    ax.set_xlabel("prior informativeness p")
    ax.set_ylabel("mean steps to stop")
    ax.set_title("Fixed-confidence cost vs prior strength")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return fig


def _fb_accuracy_vs_budget(rows: list[dict[str, str]]) -> Figure:
    ps = _sorted_numeric_labels(_series_key(rows, "p_or_kind"))
    ncols = 2 if len(ps) > 1 else 1
    nrows = (len(ps) + ncols - 1) // ncols
    fig = _new_figure(_PANEL_FIGSIZE)
    for i, p in enumerate(ps):
        ax = fig.add_subplot(nrows, ncols, i + 1)
        sub = [r for r in rows if r["p_or_kind"] == p]
        for algo in sorted(_series_key(sub, "algorithm")):
            arows = [r for r in sub if r["algorithm"] == algo]
            t, acc = _mean_by(_floats(arows, "t_max"),
                              _floats(arows, "avg_accuracy"))
            ax.plot(t, acc, marker="o", label=algo)
        ax.set_xlabel("per-task budget")
        ax.set_ylabel("average accuracy")
        ax.set_title(f"p = {p}")
        ax.set_ylim(0.0, 1.05)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize="small")
    fig.suptitle("Fixed-budget accuracy vs budget")
    return fig


_BUILDERS: dict[str, tuple[tuple[str, ...],
                           Callable[[list[dict[str, str]]], Figure]]] = {
    "entropy_curve": (("position", "entropy"), _entropy_curve),
    "allocation_kl": (("t", "kl", "p"), _allocation_kl),
    "fc_steps_vs_p": (("algorithm", "p_or_kind", "mean_total_steps"),
                      _fc_steps_vs_p),
    "fb_accuracy_vs_budget": (("algorithm", "p_or_kind", "t_max",
                               "avg_accuracy"), _fb_accuracy_vs_budget),
}

FIGURE_IDS = tuple(_BUILDERS)


def build_figure(spec: FigureSpec) -> Figure:
    """Build the matplotlib Figure for ``spec`` without saving it.

    Raises :class:`FigureError` before anything is drawn if the figure id
    is unknown, a CSV is missing or empty, or a required column is absent.
    """
    if spec.figure not in _BUILDERS:
        raise FigureError(
            f"unknown figure {spec.figure!r}; expected one of "
            f"{', '.join(FIGURE_IDS)}")
    required, builder = _BUILDERS[spec.figure]
    rows = _load_rows(spec.csv_paths, required)
    fig = builder(rows)
    fig.set_layout_engine("tight")
    return fig


def render(spec: FigureSpec) -> str:
    """Build and save the figure; return the output path.

    The output format follows the file extension (``.png`` or ``.svg``).
    Saving is deterministic: metadata that would otherwise embed a
    timestamp or hostname is pinned, and SVG ids are salted with a fixed
    string, so identical inputs give byte-identical files.  On error no
    output file is created.
    """
    fig = build_figure(spec)  # validates before any file is touched
    out = Path(spec.out_path)
    suffix = out.suffix.lower()
    if suffix not in (".png", ".svg"):
        raise FigureError(
            f"unsupported output extension {suffix or '(none)'}; "
            "use .png or .svg")
    out.parent.mkdir(parents=True, exist_ok=True)
    if suffix == ".svg":
        with matplotlib.rc_context({"svg.hashsalt": "figtools"}):
            fig.savefig(out, format="svg", metadata={"Date": None})
    else:
        fig.savefig(out, format="png", metadata={"Software": "figtools"})
    return str(out)
