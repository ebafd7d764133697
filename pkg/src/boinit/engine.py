"""Sequential Bayesian-optimization loop and per-run bookkeeping.

A run evaluates its initial design, then repeats fit-surrogate /
maximize-acquisition / evaluate until the total evaluation budget is
spent. Budgets count evaluations, initial design included, and
iterations are numbered from 1. Traces are persisted as line-delimited
JSON, one record per evaluation; that file format is the only contract
between the engine and the statistics layer.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acquisition, gp
from .initialization import InitStrategy, generate_initial, initial_count, strategy_label
from .objectives import Objective, evaluate
from .space import SearchSpace

# Relative slack used when deciding that a running-best value has reached
# the run's final optimum; exact float equality would be brittle.
CONVERGENCE_RTOL = 1e-12
CONVERGENCE_ATOL = 1e-15


@dataclass(frozen=True)
class TraceMeta:
    run_id: str
    objective_id: str
    strategy: str
    seed: int | None
    budget: int


@dataclass(frozen=True)
class Trace:
    """Ordered evaluations of one run plus the running-best curve."""

    configurations: np.ndarray
    objective_values: np.ndarray
    meta: TraceMeta
    running_best: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.objective_values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("a trace needs at least one evaluation")
        if self.configurations.shape[0] != values.size:
            raise ValueError("configurations and values disagree in length")
        object.__setattr__(self, "running_best", np.maximum.accumulate(values))

    def __len__(self) -> int:
        return int(self.objective_values.size)


@dataclass(frozen=True)
class RunSummary:
    convergence_index: int
    best_metric: float
    trace_ref: str


def derive_run_seed(base_seed: int, objective_id: str, strategy_tag: str, rep: int) -> int:
    """Stable 64-bit per-run seed from the experiment's base seed and cell key."""
    key = f"{base_seed}|{objective_id}|{strategy_tag}|{rep}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def run_bo(
    objective: Objective,
    space: SearchSpace,
    strategy: InitStrategy,
    budget: int,
    rng: int | np.random.Generator,
    run_id: str | None = None,
    fit_policy: gp.FitPolicy = gp.DEFAULT_FIT_POLICY,
    acq_budget: int | None = None,
) -> Trace:
    """Execute one full BO run and return its trace.

    ``rng`` may be an integer seed (recorded in the trace meta) or a
    ready-made generator. Objective failures propagate; nothing is
    imputed for a failed evaluation.
    """
    n_init = initial_count(strategy)
    if budget < n_init:
        raise ValueError(f"budget {budget} is below the initial design size {n_init}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    generator = np.random.default_rng(rng) if seed is not None else rng
    label = strategy_label(strategy)
    meta = TraceMeta(
        run_id=run_id or f"{objective.id}__{label}-T{budget}__r000",
        objective_id=objective.id,
        strategy=label,
        seed=int(seed) if seed is not None else None,
        budget=budget,
    )

    configs = [np.asarray(x, dtype=float) for x in generate_initial(space, strategy, generator)]
    values = [evaluate(objective, x) for x in configs]

    while len(values) < budget:
        unit_inputs = np.array([space.to_unit(x) for x in configs])
        model = gp.fit(unit_inputs, np.array(values), fit_policy)
        incumbent = max(values)
        x_next = acquisition.maximize(model, space, incumbent, generator, acq_budget)
        values.append(evaluate(objective, x_next))
        configs.append(x_next)

    return Trace(
        configurations=np.array(configs),
        objective_values=np.array(values),
        meta=meta,
    )


def convergence_index_of(running_best: np.ndarray) -> int:
    """First index (1-based) at which a running-best curve reaches its final value."""
    best = np.asarray(running_best, dtype=float)
    if best.size == 0:
        raise ValueError("empty running-best curve")
    final = best[-1]
    threshold = final - abs(final) * CONVERGENCE_RTOL - CONVERGENCE_ATOL
    return int(np.argmax(best >= threshold)) + 1


def convergence_index(trace: Trace) -> int:
    """First iteration (1-based) whose running best reaches the final value."""
    return convergence_index_of(trace.running_best)


def best_metric(trace: Trace) -> float:
    """Highest objective value attained over the whole run."""
    return float(trace.running_best[-1])


def summarize(trace: Trace) -> RunSummary:
    return RunSummary(
        convergence_index=convergence_index(trace),
        best_metric=best_metric(trace),
        trace_ref=trace.meta.run_id,
    )


def write_trace(trace: Trace, path: str | Path) -> None:
    """Persist a trace: one JSON record per evaluation, fixed key order."""
    path = Path(path)
    lines = []
    for t in range(len(trace)):
        record = {
            "run": trace.meta.run_id,
            "iter": t + 1,
            "x": [float(v) for v in trace.configurations[t]],
            "y": float(trace.objective_values[t]),
            "best": float(trace.running_best[t]),
        }
        lines.append(json.dumps(record))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class LoadedTrace:
    """Trace as reconstructed from a persisted file."""

    run_id: str
    configurations: np.ndarray
    objective_values: np.ndarray
    running_best: np.ndarray

    def __len__(self) -> int:
        return int(self.objective_values.size)


def read_trace(path: str | Path) -> LoadedTrace:
    path = Path(path)
    run_id = None
    xs: list[list[float]] = []
    ys: list[float] = []
    bests: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if run_id is None:
                run_id = record["run"]
            elif record["run"] != run_id:
                raise ValueError(f"{path}: mixed run ids at line {lineno}")
            if record["iter"] != len(ys) + 1:
                raise ValueError(f"{path}: iterations out of order at line {lineno}")
            xs.append([float(v) for v in record["x"]])
            ys.append(float(record["y"]))
            bests.append(float(record["best"]))
    if run_id is None:
        raise ValueError(f"{path}: empty trace file")
    values = np.asarray(ys)
    expected_best = np.maximum.accumulate(values)
    if not np.array_equal(expected_best, np.asarray(bests)):
        raise ValueError(f"{path}: running-best column is inconsistent")
    return LoadedTrace(
        run_id=run_id,
        configurations=np.asarray(xs),
        objective_values=values,
        running_best=expected_best,
    )
