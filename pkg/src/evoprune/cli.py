"""Command-line entry point.

Subcommands: evolve, baseline, reference (all driven by a JSON config with
optional flag overrides), report (merge report.json files into comparison
tables), and validate-dataset.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import DatasetError, load_dataset
from .harness import (
    BASELINE_MODES,
    EVOLVE_MODES,
    REFERENCE_MODES,
    ConfigError,
    RunConfig,
    RunReport,
    report_table,
    run_experiment,
)


def _add_run_command(sub, name: str, help_text: str):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--out", help="override output directory")
    p.add_argument("--runs", type=int, help="override number of runs")
    p.add_argument("--mode", help="override mode")
    p.add_argument("--evals", type=int, help="override evaluation budget")
    if name == "baseline":
        p.add_argument("--reference", help="report.json of the run to match sparsity against")
    return p


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.runs is not None:
        cfg.n_runs = args.runs
    if args.mode is not None:
        cfg.mode = args.mode
    if args.evals is not None:
        cfg.max_evals = args.evals
    if getattr(args, "reference", None) is not None:
        cfg.reference_report = args.reference
    cfg.__post_init__()
    return cfg


def _run_command(args, allowed_modes, label: str) -> int:
    cfg = _load_config(args)
    if cfg.mode not in allowed_modes:
        print(f"error: {label} expects a mode in {allowed_modes}, got {cfg.mode!r}",
              file=sys.stderr)
        return 2
    report = run_experiment(cfg)
    print(f"{report.dataset} [{report.mode}] "
          f"mean accuracy {report.mean_accuracy:.3f}, "
          f"mean active {100.0 * report.mean_active_fraction:.1f}%")
    print(f"reports written to {cfg.out_dir}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="evoprune",
        description="Evolutionary pruning and feature selection for dense heads "
                    "over pre-extracted feature datasets.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_command(sub, "evolve", "run the evolutionary mask search")
    _add_run_command(sub, "baseline", "run a literature pruning baseline")
    _add_run_command(sub, "reference", "train unpruned / grid reference models")

    p_report = sub.add_parser("report", help="merge report.json files into a comparison table")
    p_report.add_argument("reports", nargs="+", help="report.json paths")
    p_report.add_argument("--out", help="directory for report.txt / report.csv")

    p_val = sub.add_parser("validate-dataset", help="check a feature file against the format")
    p_val.add_argument("path")
    p_val.add_argument("--format", choices=("binary", "csv"))

    args = parser.parse_args(argv)
    try:
        if args.command == "evolve":
            return _run_command(args, EVOLVE_MODES, "evolve")
        if args.command == "baseline":
            return _run_command(args, BASELINE_MODES, "baseline")
        if args.command == "reference":
            return _run_command(args, REFERENCE_MODES, "reference")
        if args.command == "report":
            reports = [RunReport.from_json(p) for p in args.reports]
            text, csv_text = report_table(reports)
            print(text, end="")
            if args.out:
                out = Path(args.out)
                out.mkdir(parents=True, exist_ok=True)
                (out / "report.txt").write_text(text)
                (out / "report.csv").write_text(csv_text)
            return 0
        if args.command == "validate-dataset":
            dataset = load_dataset(args.path, args.format)
            print(f"{args.path}: ok (n={dataset.n}, d={dataset.feature_dim}, "
                  f"classes={dataset.n_classes})")
            return 0
    except (ConfigError, DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
