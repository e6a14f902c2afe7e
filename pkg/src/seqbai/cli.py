"""Command-line front end.

Subcommands: ``run`` (one experiment), ``sweep`` (config cross-products),
``bound`` (expected-error bound calculator), ``allocation`` (allocation-
convergence traces), ``gen-calibration`` (synthetic calibration data and
classifier export), ``validate-table`` (word-table file check).

Configs are JSON files with ExperimentConfig keys (stopping keys nested
under "stopping"); every key can be overridden by a flag of the same name.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import p300 as p3
from .harness import (ExperimentConfig, RESULTS_COLUMNS, SUMMARY_COLUMNS,
                      allocation_study, expand_grid, results_rows,
                      run_experiment, summary_row, write_csv,
                      _reference_table_path)
from .priors import WordTableError, load_word_table
from .rng import CALIBRATION, RngStream
from .stopping import StoppingConfig
from .theory import BoundInputs, oracle_bound, theorem1_bound

_STOPPING_KEYS = {f.name for f in dataclasses.fields(StoppingConfig)}
_CONFIG_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} \
    - {"stopping", "eeg"}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    c = parser.add_argument_group("config overrides")
    c.add_argument("--config", help="JSON config file")
    for name in ("scenario", "algorithm", "feedback", "table_path",
                 "truth_table_path", "out"):
        c.add_argument(f"--{name}")
    for name in ("J", "M", "B", "master_seed", "max_resample", "u_kind",
                 "calib_targets", "calib_nontargets", "safety_cap"):
        c.add_argument(f"--{name}", type=int)
    for name in ("beta", "p", "mu", "delta", "sigma0", "noise_sd", "mu0",
                 "vtts_gaussian_sd", "shrink", "bbts_threshold", "p_max",
                 "sigma_eeg", "p300_sigma0_frac"):
        c.add_argument(f"--{name}", type=float)
    c.add_argument("--perturb", action=argparse.BooleanOptionalAction)
    c.add_argument("--record_pulls", action=argparse.BooleanOptionalAction)
    s = parser.add_argument_group("stopping overrides")
    s.add_argument("--stopping.mode", dest="stopping_mode")
    s.add_argument("--stopping.delta", dest="stopping_delta", type=float)
    s.add_argument("--stopping.M", dest="stopping_M", type=int)
    s.add_argument("--stopping.t_max", dest="stopping_t_max", type=int)
    s.add_argument("--stopping.gamma_variant", dest="stopping_gamma_variant")
    s.add_argument("--stopping.C", dest="stopping_C", type=float)
    s.add_argument("--stopping.min_t", dest="stopping_min_t", type=int)
    s.add_argument("--stopping.grouping", dest="stopping_grouping")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    doc: dict = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise SystemExit("config file must hold a JSON object")
    stopping_doc = dict(doc.pop("stopping", {}))
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise SystemExit(f"unknown config keys: {sorted(unknown)}")
    unknown = set(stopping_doc) - _STOPPING_KEYS
    if unknown:
        raise SystemExit(f"unknown stopping keys: {sorted(unknown)}")

    for name in _CONFIG_KEYS:
        val = getattr(args, name, None)
        if val is not None:
            doc[name] = val
    for name in _STOPPING_KEYS:
        val = getattr(args, f"stopping_{name}", None)
        if val is not None:
            stopping_doc[name] = val

    scenario = doc.get("scenario", "synthetic_markov")
    if scenario == "p300" and "J" not in doc:
        table = load_word_table(doc.get("table_path")
                                or _reference_table_path())
        doc["J"] = table.J
    if "M" in doc and "M" not in stopping_doc:
        stopping_doc["M"] = doc["M"]
    elif "M" not in doc and "M" not in stopping_doc:
        stopping_doc["M"] = ExperimentConfig.M  # dataclass default
    try:
        return ExperimentConfig(stopping=StoppingConfig(**stopping_doc), **doc)
    except (TypeError, ValueError) as exc:
        raise SystemExit(f"invalid config: {exc}")


def _parse_values(text: str) -> list:
    out = []
    for piece in text.split(","):
        piece = piece.strip()
        try:
            out.append(json.loads(piece))
        except json.JSONDecodeError:
            out.append(piece)
    return out


def _float_list(text: str) -> np.ndarray:
    return np.asarray([float(x) for x in text.split(",")])


def _outdir(path: str | None) -> str:
    out = path or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_run(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    metrics, results = run_experiment(cfg, workers=args.workers)
    out = _outdir(cfg.out)
    write_csv(os.path.join(out, "results.csv"), RESULTS_COLUMNS,
              results_rows(cfg, results))
    write_csv(os.path.join(out, "summary.csv"), SUMMARY_COLUMNS,
              [summary_row(cfg, metrics)])
    print(f"{cfg.scenario}/{cfg.algorithm} p_or_kind={cfg.p_or_kind()} "
          f"B={cfg.B}: avg_accuracy={metrics.avg_accuracy:.4f} "
          f"zero_one={metrics.zero_one_accuracy:.4f} "
          f"mean_steps={metrics.mean_total_steps:.2f}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    axes: dict[str, list] = {}
    for spec in args.axis or []:
        if "=" not in spec:
            raise SystemExit(f"bad --axis {spec!r}; expected KEY=V1,V2,...")
        key, vals = spec.split("=", 1)
        axes[key.strip()] = _parse_values(vals)
    points = expand_grid(cfg, axes)
    out = _outdir(cfg.out)
    all_rows: list[tuple] = []
    summaries: list[tuple] = []
    for point_cfg in points:
        metrics, results = run_experiment(point_cfg, workers=args.workers)
        all_rows.extend(results_rows(point_cfg, results))
        summaries.append(summary_row(point_cfg, metrics))
    write_csv(os.path.join(out, "results.csv"), RESULTS_COLUMNS, all_rows)
    write_csv(os.path.join(out, "summary.csv"), SUMMARY_COLUMNS, summaries)
    print(f"{len(points)} grid points -> {out}/summary.csv")
    return 0


def cmd_bound(args: argparse.Namespace) -> int:
    if args.gaps is not None and args.entropies is not None:
        gaps = _float_list(args.gaps)
        ents = _float_list(args.entropies)
    elif args.p is not None:
        # Markov chain shorthand: uniform first task, then H(successor row).
        from .priors import MarkovPrior, conditional_entropy
        prior = MarkovPrior(args.p, args.J)
        h = conditional_entropy(prior.next_dist(1))
        ents = np.asarray([np.log(args.J)] + [h] * (args.M - 1))
        gaps = np.full(args.M, args.gap)
    else:
        raise SystemExit("give either --gaps and --entropies, or --p")
    inp = BoundInputs(n=args.n, J=args.J, gaps=gaps, entropies=ents,
                      mistake_cost=args.mistake_cost)
    main_term, remainder, total = theorem1_bound(inp)
    print(f"main={main_term!r} remainder={remainder!r} total={total!r}")
    if args.mistake_cost:
        err_sum, cost = oracle_bound(inp)
        print(f"error_sum={err_sum!r} expected_cost={cost!r}")
    return 0


def cmd_allocation(args: argparse.Namespace) -> int:
    rows = allocation_study([float(x) for x in args.p_list.split(",")],
                            B=args.B, master_seed=args.master_seed,
                            beta=args.beta, t_max=args.t_max, M=args.M)
    out = args.out or "allocation.csv"
    write_csv(out, ("t", "kl", "p", "replication"),
              [(t, repr(kl), f"{p:g}", b) for t, kl, p, b in rows])
    print(f"{len(rows)} rows -> {out}")
    return 0


def cmd_gen_calibration(args: argparse.Namespace) -> int:
    eeg = p3.EEGConfig(noise_var=args.sigma_eeg)
    stream = RngStream(args.master_seed, (0, 0, CALIBRATION))
    epochs = p3.generate_calibration(eeg, args.n_target, args.n_nontarget,
                                     stream)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(p3.export_calibration_text(epochs))
    print(f"{len(epochs)} epochs -> {args.out}")
    if args.model_out:
        model = p3.train_swlda(epochs)
        with open(args.model_out, "w", encoding="utf-8") as fh:
            fh.write(p3.export_model_table(model))
        stats = model.calib_stats
        print(f"model: {len(model.selected)} features, "
              f"gap={stats.gap:.3f}, pooled_var={stats.pooled_var:.3f} "
              f"-> {args.model_out}")
    return 0


def cmd_validate_table(args: argparse.Namespace) -> int:
    try:
        table = load_word_table(args.path, cap=args.cap)
    except (WordTableError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    print(f"ok: {table.J} words, {len(table.transitions)} transition rows")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="seqbai",
        description="Sequential best-arm identification experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    _add_config_flags(p_run)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="cross-product of config overrides")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--axis", action="append",
                         help="KEY=V1,V2,... (repeatable; stopping.X allowed)")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_bound = sub.add_parser("bound", help="expected-error bound calculator")
    p_bound.add_argument("--n", type=int, required=True,
                         help="per-task pull budget")
    p_bound.add_argument("--J", type=int, required=True)
    p_bound.add_argument("--M", type=int, default=20)
    p_bound.add_argument("--gaps", help="comma list of per-task gaps")
    p_bound.add_argument("--entropies", help="comma list of per-task entropies")
    p_bound.add_argument("--p", type=float,
                         help="Markov shorthand for the entropy sequence")
    p_bound.add_argument("--gap", type=float, default=2.0,
                         help="common gap used with --p")
    p_bound.add_argument("--mistake_cost", type=float, default=0.0)
    p_bound.set_defaults(func=cmd_bound)

    p_alloc = sub.add_parser("allocation",
                             help="allocation-convergence trace CSV")
    p_alloc.add_argument("--p_list", default="0.1,0.9")
    p_alloc.add_argument("--B", type=int, default=200)
    p_alloc.add_argument("--M", type=int, default=5)
    p_alloc.add_argument("--t_max", type=int, default=500)
    p_alloc.add_argument("--beta", type=float, default=0.5)
    p_alloc.add_argument("--master_seed", type=int, default=0)
    p_alloc.add_argument("--out")
    p_alloc.set_defaults(func=cmd_allocation)

    p_cal = sub.add_parser("gen-calibration",
                           help="synthetic calibration export")
    p_cal.add_argument("--sigma_eeg", type=float, default=1.0,
                       help="stationary noise variance")
    p_cal.add_argument("--n_target", type=int, default=120)
    p_cal.add_argument("--n_nontarget", type=int, default=480)
    p_cal.add_argument("--master_seed", type=int, default=0)
    p_cal.add_argument("--out", required=True)
    p_cal.add_argument("--model_out",
                       help="also train the classifier and export weights")
    p_cal.set_defaults(func=cmd_gen_calibration)

    p_val = sub.add_parser("validate-table", help="check a word-table file")
    p_val.add_argument("path")
    p_val.add_argument("--cap", type=int, default=100)
    p_val.set_defaults(func=cmd_validate_table)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
