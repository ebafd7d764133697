"""Command-line interface: run an experiment grid, compare strategy arms,
and run the concentration sensitivity analysis.

Exit codes: 0 success, 1 run/data failure (partial outputs are kept and
listed in the manifest), 2 config error. Only the output directory
(BOINIT_OUTPUT_DIR) and worker count (BOINIT_JOBS) may be overridden via
environment; everything scientific lives in the config file.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from pathlib import Path

from . import stats
from .experiment import (
    ComparisonReport,
    ConfigError,
    build_comparison,
    build_sensitivity,
    load_config,
    load_traces,
    mean_curves,
    run_experiment,
)

DECISION_REJECT = "reject"
DECISION_FAIL = "fail to reject"


def _format_p(p: float | None) -> str:
    if p is None:
        return "n/a"
    if p >= 0.001:
        return f"{p:.3f}"
    return f"{p:.3e}"


def comparison_text(report: ComparisonReport) -> str:
    header = f"{'Comparison':<22}{'S/D':>5}{'R':>5}{'Ties':>6}{'p-value':>10}  Decision"
    lines = [header, "-" * len(header)]
    for row in report.rows:
        decision = DECISION_REJECT if row.reject else DECISION_FAIL
        lines.append(
            f"{row.name:<22}{row.wins:>5}{row.losses:>5}{row.ties:>6}"
            f"{_format_p(row.p_value):>10}  {decision}"
        )
    return "\n".join(lines) + "\n"


def comparison_delimited(report: ComparisonReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["comparison", "wins", "losses", "ties", "p_value", "decision"])
    for row in report.rows:
        writer.writerow(
            [
                row.name,
                row.wins,
                row.losses,
                row.ties,
                "" if row.p_value is None else repr(row.p_value),
                DECISION_REJECT if row.reject else DECISION_FAIL,
            ]
        )
    return buffer.getvalue()


def comparison_structured(report: ComparisonReport) -> str:
    payload = {
        "thresholds": dataclasses.asdict(report.thresholds),
        "warnings": list(report.warnings),
        "comparisons": [
            {
                "name": row.name,
                "wins": row.wins,
                "losses": row.losses,
                "ties": row.ties,
                "n_total": row.wins + row.losses,
                "p_value": row.p_value,
                "decision": DECISION_REJECT if row.reject else DECISION_FAIL,
                "cells": [dataclasses.asdict(cell) for cell in row.cells],
            }
            for row in report.rows
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def sensitivity_text(report: stats.SensitivityReport) -> str:
    header = f"{'Metric':<20}{'Pearson r':>11}{'p-value':>12}"
    lines = [header, "-" * len(header)]
    for attr, label in stats.SENSITIVITY_METRICS:
        entry = report.rows[attr]
        if entry is None:
            lines.append(f"{label:<20}{'undefined':>11}{'undefined':>12}")
        else:
            r, p = entry
            lines.append(f"{label:<20}{r:>+11.3f}{_format_p(p):>12}")
    return "\n".join(lines) + "\n"


def sensitivity_delimited(report: stats.SensitivityReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["metric", "pearson_r", "p_value"])
    for attr, label in stats.SENSITIVITY_METRICS:
        entry = report.rows[attr]
        if entry is None:
            writer.writerow([label, "", ""])
        else:
            writer.writerow([label, repr(entry[0]), repr(entry[1])])
    return buffer.getvalue()


def sensitivity_structured(report: stats.SensitivityReport) -> str:
    payload = {
        "n_runs": report.n_runs,
        "metrics": {
            attr: None if report.rows[attr] is None else
            {"pearson_r": report.rows[attr][0], "p_value": report.rows[attr][1]}
            for attr, _ in stats.SENSITIVITY_METRICS
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def curves_delimited(curves: dict[tuple[str, str], "object"]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["objective", "arm", "iteration", "mean_best"])
    for (objective_id, arm_label) in sorted(curves):
        for t, value in enumerate(curves[(objective_id, arm_label)], start=1):
            writer.writerow([objective_id, arm_label, t, repr(float(value))])
    return buffer.getvalue()


def sensitivity_curves_delimited(rows: list[stats.LambdaRunMetrics]) -> str:
    """Per-lambda mean of each metric, raw and min-max normalized."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["lambda", "metric", "mean_value", "mean_normalized"])
    lams = sorted({row.lam for row in rows})
    for attr, label in stats.SENSITIVITY_METRICS:
        values = [getattr(row, attr) for row in rows]
        normalized = stats.minmax_normalize(values)
        for lam in lams:
            mask = [i for i, row in enumerate(rows) if row.lam == lam]
            mean_raw = sum(values[i] for i in mask) / len(mask)
            mean_norm = sum(float(normalized[i]) for i in mask) / len(mask)
            writer.writerow([repr(lam), label, repr(mean_raw), repr(mean_norm)])
    return buffer.getvalue()


def _locate(directory: str) -> tuple[Path, Path]:
    """Resolve the traces directory and a sibling reports directory."""
    d = Path(directory)
    if (d / "traces").is_dir():
        return d / "traces", d / "reports"
    if d.name == "traces":
        return d, d.parent / "reports"
    return d, d / "reports"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boinit",
        description="Bayesian-optimization initialization-strategy harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute the experiment grid of a config file")
    run_p.add_argument("-c", "--config", required=True, help="experiment config (JSON)")
    run_p.add_argument("--seed", type=int, default=None, help="override the config base seed")
    run_p.add_argument("--jobs", type=int, default=None, help="parallel run workers")

    cmp_p = sub.add_parser("compare", help="win/tie/loss comparison over a trace directory")
    cmp_p.add_argument("-d", "--dir", required=True, help="output or traces directory")
    cmp_p.add_argument("--tau-conv", type=float, default=0.10)
    cmp_p.add_argument("--tau-metric", type=float, default=0.003)
    cmp_p.add_argument("--format", choices=("text", "delimited", "structured"), default="text")

    sens_p = sub.add_parser("sensitivity", help="concentration sensitivity analysis")
    sens_p.add_argument("-d", "--dir", required=True, help="output or traces directory")
    sens_p.add_argument("--split", type=float, default=0.5, help="early/late split fraction")
    sens_p.add_argument("--format", choices=("text", "delimited", "structured"), default="text")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, base_seed=args.seed)
    env_out = os.environ.get("BOINIT_OUTPUT_DIR")
    if env_out:
        config = dataclasses.replace(config, output_dir=Path(env_out).resolve())
    jobs = args.jobs
    if jobs is None:
        jobs = int(os.environ.get("BOINIT_JOBS", "1"))
    outcome = run_experiment(config, jobs=max(1, jobs))
    print(f"completed {len(outcome.completed)} runs -> {config.output_dir}")
    if outcome.failed:
        for run_id, error in outcome.failed:
            print(f"FAILED {run_id}: {error}", file=sys.stderr)
        return 1
    return 0


_COMPARISON_WRITERS = {
    "text": ("comparison.txt", comparison_text),
    "delimited": ("comparison.csv", comparison_delimited),
    "structured": ("comparison.json", comparison_structured),
}

_SENSITIVITY_WRITERS = {
    "text": ("sensitivity.txt", sensitivity_text),
    "delimited": ("sensitivity.csv", sensitivity_delimited),
    "structured": ("sensitivity.json", sensitivity_structured),
}


def _cmd_compare(args: argparse.Namespace) -> int:
    traces_dir, reports_dir = _locate(args.dir)
    try:
        traces = load_traces(traces_dir)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    thresholds = stats.Thresholds(tau_conv=args.tau_conv, tau_metric=args.tau_metric)
    report = build_comparison(traces, thresholds)
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    reports_dir.mkdir(parents=True, exist_ok=True)
    filename, renderer = _COMPARISON_WRITERS[args.format]
    (reports_dir / filename).write_text(renderer(report), encoding="utf-8")
    (reports_dir / "curves.csv").write_text(
        curves_delimited(mean_curves(traces)), encoding="utf-8"
    )
    sys.stdout.write(comparison_text(report))
    return 0


def _cmd_sensitivity(args: argparse.Namespace) -> int:
    traces_dir, reports_dir = _locate(args.dir)
    try:
        traces = load_traces(traces_dir)
        report, rows = build_sensitivity(traces, split_fraction=args.split)
    except (FileNotFoundError, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    reports_dir.mkdir(parents=True, exist_ok=True)
    filename, renderer = _SENSITIVITY_WRITERS[args.format]
    (reports_dir / filename).write_text(renderer(report), encoding="utf-8")
    (reports_dir / "sensitivity_curves.csv").write_text(
        sensitivity_curves_delimited(rows), encoding="utf-8"
    )
    sys.stdout.write(sensitivity_text(report))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_sensitivity(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
