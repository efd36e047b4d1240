"""Command-line experiment runner.

    iskak <experiment> [--config FILE] [--output-dir DIR] [--seed N]
                       [--override key=value ...]

Writes <experiment>.csv and <experiment>.summary.txt into the output
directory, prints one line per check, and exits 0 only if every check
passed (2 for configuration errors).  ISKAK_THREADS caps delta-sweep
parallelism.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import EXPERIMENT_NAMES, apply_overrides, default_config, load_config
from .errors import BlowUpError, DepthTooSmallError, NonConvergenceError, SingularSystemError
from .experiments import run_experiment, summary_text, write_csv, write_summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="iskak",
        description="run a named verification experiment and emit CSV + summary",
    )
    p.add_argument("experiment", choices=EXPERIMENT_NAMES)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--output-dir", help="directory for CSV and summary output")
    p.add_argument("--seed", type=int, help="random seed for randomized suites")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a single config key (repeatable)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = default_config(args.experiment)
        if args.config:
            cfg = load_config(args.config, cfg)
        cfg = apply_overrides(cfg, args.override)
        if args.output_dir is not None:
            cfg = replace(cfg, output_dir=args.output_dir)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if cfg.experiment != args.experiment:
            raise ValueError(
                f"config names experiment {cfg.experiment!r} but the command line "
                f"asked for {args.experiment!r}"
            )
    except (ValueError, OSError) as exc:
        print(f"iskak: config error: {exc}", file=sys.stderr)
        return 2

    try:
        report = run_experiment(cfg)
    except (BlowUpError, DepthTooSmallError, NonConvergenceError,
            SingularSystemError, FloatingPointError) as exc:
        print(f"iskak: experiment failed: {exc}", file=sys.stderr)
        return 1

    os.makedirs(cfg.output_dir, exist_ok=True)
    csv_path = os.path.join(cfg.output_dir, f"{cfg.experiment}.csv")
    summary_path = os.path.join(cfg.output_dir, f"{cfg.experiment}.summary.txt")
    write_csv(report, csv_path)
    write_summary(report, summary_path)
    if report.snapshots is not None:
        cols, rows = report.snapshots
        snap_path = os.path.join(cfg.output_dir, f"{cfg.experiment}_snapshots.csv")
        from .experiments import ExperimentReport
        write_csv(ExperimentReport(cfg.experiment, cols, rows), snap_path)

    sys.stdout.write(summary_text(report))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
