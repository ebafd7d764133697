"""Experiment harness: config parsing, the factorial run grid, and the
comparison / sensitivity report builders.

A config crosses objectives with strategy arms and repetitions. Every
run gets a seed derived from the base seed and its cell key, one trace
file per run is written, and reruns of the same config overwrite the
same files byte for byte. The statistics stage operates purely on the
persisted trace files.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import engine, stats
from .initialization import DefaultPoint, InitStrategy, TruncatedGaussian, Uniform, initial_count, strategy_label
from .objectives import Objective, builtin_objective, open_external_objective
from .space import load_space


class ConfigError(ValueError):
    """The experiment config is unreadable or violates its schema."""


_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9.-]*$")


@dataclass(frozen=True)
class ArmSpec:
    """One strategy arm of the experiment with its evaluation budget."""

    strategy: InitStrategy
    budget: int
    total_evaluations: int

    @property
    def label(self) -> str:
        return f"{strategy_label(self.strategy)}-T{self.total_evaluations}"


@dataclass(frozen=True)
class ExperimentConfig:
    objectives: tuple[dict, ...]
    arms: tuple[ArmSpec, ...]
    repetitions: int
    base_seed: int
    thresholds: stats.Thresholds
    output_dir: Path
    config_dir: Path
    budget_convention: str = "inclusive"

    @property
    def objective_ids(self) -> tuple[str, ...]:
        return tuple(cfg["id"] for cfg in self.objectives)


def _parse_strategy(entry: dict) -> tuple[InitStrategy, int]:
    kind = entry.get("strategy")
    budget = entry.get("budget")
    if not isinstance(budget, int) or budget < 1:
        raise ConfigError(f"arm {entry!r}: 'budget' must be a positive integer")
    if kind == "uniform":
        return Uniform(count=int(entry["count"])), budget
    if kind == "truncated_gaussian":
        return TruncatedGaussian(count=int(entry["count"]), lam=float(entry["lambda"])), budget
    if kind == "default":
        return DefaultPoint(), budget
    raise ConfigError(f"arm {entry!r}: unknown strategy {kind!r}")


def _parse_arm(entry: dict, convention: str) -> ArmSpec:
    try:
        strategy, budget = _parse_strategy(entry)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"arm {entry!r}: {exc}") from exc
    n_init = initial_count(strategy)
    total = budget if convention == "inclusive" else n_init + budget
    if total < n_init:
        raise ConfigError(f"arm {entry!r}: budget {total} is below the design size {n_init}")
    return ArmSpec(strategy=strategy, budget=budget, total_evaluations=total)


def _validate_objective_entry(entry: dict, config_dir: Path) -> dict:
    if not isinstance(entry, dict):
        raise ConfigError(f"objective entry must be a mapping, got {entry!r}")
    objective_id = entry.get("id")
    if not isinstance(objective_id, str) or not _ID_RE.match(objective_id):
        raise ConfigError(
            f"objective id {objective_id!r} must match {_ID_RE.pattern} (no '__')"
        )
    kind = entry.get("kind", "builtin")
    if kind == "builtin":
        try:
            build_objective(entry, config_dir, run_id="probe")
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"objective {objective_id!r}: {exc}") from exc
    elif kind == "external":
        if "command" not in entry:
            raise ConfigError(f"objective {objective_id!r}: external objectives need 'command'")
        space_path = entry.get("space")
        if not space_path:
            raise ConfigError(f"objective {objective_id!r}: external objectives need 'space'")
        try:
            load_space(_resolve(space_path, config_dir))
        except Exception as exc:
            raise ConfigError(f"objective {objective_id!r}: bad space file: {exc}") from exc
    else:
        raise ConfigError(f"objective {objective_id!r}: unknown kind {kind!r}")
    return entry


def _resolve(path: str, config_dir: Path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else config_dir / p


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate an experiment config file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")

    convention = data.get("budget_convention", "inclusive")
    if convention not in ("inclusive", "additive"):
        raise ConfigError("budget_convention must be 'inclusive' or 'additive'")

    config_dir = path.parent.resolve()
    objectives = [
        _validate_objective_entry(entry, config_dir)
        for entry in data.get("objectives", [])
    ]
    if not objectives:
        raise ConfigError("config lists no objectives")
    ids = [entry["id"] for entry in objectives]
    if len(set(ids)) != len(ids):
        raise ConfigError("objective ids must be unique")

    arm_entries = data.get("arms", [])
    if not arm_entries:
        raise ConfigError("config lists no arms")
    arms = tuple(_parse_arm(entry, convention) for entry in arm_entries)
    labels = [arm.label for arm in arms]
    if len(set(labels)) != len(labels):
        raise ConfigError("arms must be distinct (duplicate strategy/budget)")

    repetitions = data.get("repetitions", 10)
    if not isinstance(repetitions, int) or repetitions < 1:
        raise ConfigError("repetitions must be a positive integer")
    base_seed = data.get("seed", 0)
    if not isinstance(base_seed, int):
        raise ConfigError("seed must be an integer")

    thresholds_cfg = data.get("thresholds", {})
    thresholds = stats.Thresholds(
        tau_conv=float(thresholds_cfg.get("tau_conv", 0.10)),
        tau_metric=float(thresholds_cfg.get("tau_metric", 0.003)),
    )
    output_dir = Path(data.get("output_dir", "boinit-out"))
    if not output_dir.is_absolute():
        output_dir = Path.cwd() / output_dir

    return ExperimentConfig(
        objectives=tuple(objectives),
        arms=arms,
        repetitions=repetitions,
        base_seed=base_seed,
        thresholds=thresholds,
        output_dir=output_dir,
        config_dir=config_dir,
        budget_convention=convention,
    )


def build_objective(entry: dict, config_dir: Path, run_id: str):
    """Instantiate the objective for one run.

    Returns ``(objective, closer)``; the closer must be called after the
    run (external evaluator processes serve exactly one run each).
    """
    entry = dict(entry)
    kind = entry.pop("kind", "builtin")
    if kind == "builtin":
        return builtin_objective(entry), None
    space = load_space(_resolve(entry["space"], config_dir))
    objective, evaluator = open_external_objective(
        objective_id=entry["id"],
        space=space,
        command=entry["command"],
        run_id=run_id,
        sense=entry.get("sense", "score"),
        timeout=float(entry.get("timeout", 30.0)),
    )
    return objective, evaluator


def run_id_for(objective_id: str, arm_label: str, rep: int) -> str:
    return f"{objective_id}__{arm_label}__r{rep:03d}"


def parse_run_id(run_id: str) -> tuple[str, str, int]:
    parts = run_id.split("__")
    if len(parts) != 3 or not parts[2].startswith("r"):
        raise ValueError(f"unparseable run id {run_id!r}")
    return parts[0], parts[1], int(parts[2][1:])


_ARM_RE = re.compile(
    r"^(?:(uni)-n(?P<ucount>\d+)|(tg)-n(?P<tcount>\d+)-l(?P<lam>[0-9.eE+-]+)|(def))-T(?P<total>\d+)$"
)


def parse_arm_label(label: str) -> dict:
    """Decompose an arm label into strategy kind, count, lambda, and budget."""
    m = _ARM_RE.match(label)
    if not m:
        raise ValueError(f"unparseable arm label {label!r}")
    if m.group(1):
        return {"kind": "uni", "count": int(m.group("ucount")), "lam": None,
                "total": int(m.group("total"))}
    if m.group(3):
        return {"kind": "tg", "count": int(m.group("tcount")),
                "lam": float(m.group("lam")), "total": int(m.group("total"))}
    return {"kind": "def", "count": 1, "lam": None, "total": int(m.group("total"))}


def _run_cell(payload: dict) -> tuple[str, str | None]:
    """Worker: execute one (objective, arm, repetition) cell and persist it."""
    run_id = payload["run_id"]
    try:
        objective, closer = build_objective(
            payload["objective"], Path(payload["config_dir"]), run_id
        )
        try:
            arm = _parse_arm({**payload["arm"]}, payload["budget_convention"])
            seed = engine.derive_run_seed(
                payload["base_seed"], objective.id, arm.label, payload["rep"]
            )
            trace = engine.run_bo(
                objective,
                objective.space,
                arm.strategy,
                arm.total_evaluations,
                seed,
                run_id=run_id,
            )
            engine.write_trace(trace, Path(payload["traces_dir"]) / f"{run_id}.jsonl")
        finally:
            if closer is not None:
                closer.close()
        return run_id, None
    except Exception as exc:  # noqa: BLE001 - worker reports, caller decides
        return run_id, f"{type(exc).__name__}: {exc}"


@dataclass
class RunOutcome:
    completed: list[str] = field(default_factory=list)
    failed: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> RunOutcome:
    """Execute every (objective x arm x repetition) cell of the config."""
    traces_dir = config.output_dir / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    for stale in traces_dir.glob("*.jsonl"):
        stale.unlink()

    arm_dicts = []
    for arm in config.arms:
        entry: dict = {"budget": arm.budget}
        if isinstance(arm.strategy, Uniform):
            entry.update(strategy="uniform", count=arm.strategy.count)
        elif isinstance(arm.strategy, TruncatedGaussian):
            entry.update(
                strategy="truncated_gaussian",
                count=arm.strategy.count,
                **{"lambda": arm.strategy.lam},
            )
        else:
            entry.update(strategy="default")
        arm_dicts.append(entry)

    payloads = []
    for obj_cfg in config.objectives:
        for arm, arm_dict in zip(config.arms, arm_dicts):
            for rep in range(config.repetitions):
                payloads.append(
                    {
                        "run_id": run_id_for(obj_cfg["id"], arm.label, rep),
                        "objective": obj_cfg,
                        "arm": arm_dict,
                        "rep": rep,
                        "base_seed": config.base_seed,
                        "traces_dir": str(traces_dir),
                        "config_dir": str(config.config_dir),
                        "budget_convention": config.budget_convention,
                    }
                )

    if jobs <= 1:
        results = [_run_cell(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, payloads))

    outcome = RunOutcome()
    for run_id, error in sorted(results):
        if error is None:
            outcome.completed.append(run_id)
        else:
            outcome.failed.append((run_id, error))

    manifest = {
        "base_seed": config.base_seed,
        "repetitions": config.repetitions,
        "objectives": list(config.objective_ids),
        "arms": [arm.label for arm in config.arms],
        "completed": outcome.completed,
        "failed": [{"run": r, "error": e} for r, e in outcome.failed],
    }
    (config.output_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return outcome


# ---------------------------------------------------------------------------
# Comparison stage
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellOutcome:
    key: str
    delta: float
    outcome: str


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    wins: int
    losses: int
    ties: int
    p_value: float | None
    reject: bool
    cells: tuple[CellOutcome, ...]


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]
    warnings: tuple[str, ...]
    thresholds: stats.Thresholds


def load_traces(directory: str | Path) -> list[engine.LoadedTrace]:
    directory = Path(directory)
    traces = [engine.read_trace(p) for p in sorted(directory.glob("*.jsonl"))]
    if not traces:
        raise FileNotFoundError(f"no trace files (*.jsonl) under {directory}")
    return traces


def _group_summaries(
    traces: Iterable[engine.LoadedTrace],
) -> dict[tuple[str, str], list[tuple[int, float]]]:
    """Group (convergence index, best metric) pairs by (objective, arm label)."""
    groups: dict[tuple[str, str], list[tuple[int, float]]] = {}
    for trace in traces:
        objective_id, arm_label, _ = parse_run_id(trace.run_id)
        key = (objective_id, arm_label)
        conv = engine.convergence_index_of(trace.running_best)
        best = float(trace.running_best[-1])
        groups.setdefault(key, []).append((conv, best))
    return groups


def build_comparison(
    traces: Iterable[engine.LoadedTrace], thresholds: stats.Thresholds
) -> ComparisonReport:
    """Classify every paired cell and run the four binomial tests."""
    groups = _group_summaries(traces)
    means = {
        key: (
            float(np.mean([c for c, _ in summaries])),
            float(np.mean([b for _, b in summaries])),
            len(summaries),
        )
        for key, summaries in groups.items()
    }

    candidates: dict[str, list[tuple[str, tuple, tuple]]] = {"sample": [], "default": []}
    warnings: list[str] = []
    for (objective_id, arm_label) in sorted(means):
        info = parse_arm_label(arm_label)
        if info["kind"] == "uni":
            continue
        family = "sample" if info["kind"] == "tg" else "default"
        baseline_label = f"uni-n{info['count']}-T{info['total']}"
        baseline = means.get((objective_id, baseline_label))
        if baseline is None:
            warnings.append(
                f"skipping {objective_id}/{arm_label}: no baseline arm {baseline_label}"
            )
            continue
        cell_key = f"{objective_id}|{arm_label}"
        candidates[family].append((cell_key, means[(objective_id, arm_label)], baseline))

    def tally(family: str, dimension: str) -> ComparisonRow | None:
        cells = candidates[family]
        if not cells:
            return None
        outcomes = []
        wins = losses = ties = 0
        for cell_key, cand, base in cells:
            if dimension == "convergence":
                delta = stats.delta_conv(base[0], cand[0])
                tau = thresholds.tau_conv
            else:
                delta = stats.delta_metric(base[1], cand[1])
                tau = thresholds.tau_metric
            outcome = stats.classify(delta, tau)
            wins += outcome == stats.WIN
            losses += outcome == stats.LOSS
            ties += outcome == stats.TIE
            outcomes.append(CellOutcome(key=cell_key, delta=delta, outcome=outcome))
        short = "S" if family == "sample" else "D"
        name = f"{short} vs R {dimension.capitalize()}"
        if wins + losses == 0:
            return ComparisonRow(
                name=name, wins=wins, losses=losses, ties=ties,
                p_value=None, reject=False, cells=tuple(outcomes),
            )
        result = stats.binomial_test(wins, losses, ties)
        return ComparisonRow(
            name=name, wins=wins, losses=losses, ties=ties,
            p_value=result.p_value, reject=result.reject, cells=tuple(outcomes),
        )

    rows = []
    for family in ("sample", "default"):
        for dimension in ("convergence", "metric"):
            row = tally(family, dimension)
            if row is None:
                short = "S" if family == "sample" else "D"
                warnings.append(
                    f"comparison {short} vs R {dimension} skipped: no candidate arms"
                )
            else:
                rows.append(row)
    return ComparisonReport(rows=tuple(rows), warnings=tuple(warnings), thresholds=thresholds)


def mean_curves(
    traces: Iterable[engine.LoadedTrace],
) -> dict[tuple[str, str], np.ndarray]:
    """Mean running-best curve per (objective, arm label)."""
    by_key: dict[tuple[str, str], list[np.ndarray]] = {}
    for trace in traces:
        objective_id, arm_label, _ = parse_run_id(trace.run_id)
        by_key.setdefault((objective_id, arm_label), []).append(trace.running_best)
    curves = {}
    for key, items in by_key.items():
        length = min(len(c) for c in items)
        curves[key] = np.mean([c[:length] for c in items], axis=0)
    return curves


# ---------------------------------------------------------------------------
# Sensitivity stage
# ---------------------------------------------------------------------------


def sweep_rows(
    traces: Iterable[engine.LoadedTrace], split_fraction: float = 0.5
) -> list[stats.LambdaRunMetrics]:
    """Per-run sensitivity metrics for every concentration-tagged run."""
    rows = []
    for trace in traces:
        _, arm_label, _ = parse_run_id(trace.run_id)
        info = parse_arm_label(arm_label)
        if info["kind"] != "tg":
            continue
        early, late = stats.early_late_means(trace.running_best, split_fraction)
        rows.append(
            stats.LambdaRunMetrics(
                lam=info["lam"],
                max_performance=float(trace.running_best[-1]),
                mean_performance=float(np.mean(trace.running_best)),
                convergence_index=float(engine.convergence_index_of(trace.running_best)),
                early_mean=early,
                late_mean=late,
            )
        )
    return rows


def build_sensitivity(
    traces: Iterable[engine.LoadedTrace], split_fraction: float = 0.5
) -> tuple[stats.SensitivityReport, list[stats.LambdaRunMetrics]]:
    rows = sweep_rows(traces, split_fraction)
    if not rows:
        raise ValueError("no concentration-tagged (truncated-gaussian) runs found")
    return stats.sensitivity_sweep(rows), rows
