"""Objective functions: builtin synthetics, a CV-style noisy wrapper, and
a line-delimited protocol for external evaluator processes.

All objectives are maximized. Loss-style external metrics are negated at
the boundary so that larger is always better everywhere downstream.

The builtin synthetics live on the continuous unit cube and declare a
"library default" location whose quality deficit relative to the optimum
(the *gap*) is an explicit, checkable knob. Closed forms:

* ``sphere-bowl``:  f(u) = peak - curvature * ||u - opt||^2
* ``two-basin``:    f(u) = h_loc * exp(-||u - c_loc||^2 / (2 w_loc^2))
                         + h_glob * exp(-||u - c_glob||^2 / (2 w_glob^2))
* ``ridged``:       f(u) = peak - curvature * ||u - opt||^2
                         - amplitude * sum_i (1 - cos(2 pi freq (u_i - opt_i)))

``two-basin`` declares its optimum at the taller basin's center; the
shorter basin's pull displaces the true argmax by less than 1e-9 for the
well-separated geometries used here (see docs/objectives.md).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import select
import shlex
import subprocess
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .space import SearchSpace, unit_space


class EvaluationError(RuntimeError):
    """Objective evaluation failed; carries the offending configuration."""

    def __init__(self, message: str, configuration=None, raw_line: str | None = None):
        super().__init__(message)
        self.configuration = configuration
        self.raw_line = raw_line


class EvaluationTimeout(EvaluationError):
    """An external evaluator did not respond within its deadline."""


@dataclass(frozen=True)
class SyntheticSpec:
    """Declared geometry of a builtin synthetic objective."""

    function: str
    optimum: tuple[float, ...]
    optimum_value: float
    default: tuple[float, ...]
    gap: float

    def __post_init__(self) -> None:
        if self.gap < 0:
            raise ValueError("default gap must be non-negative")


@dataclass(frozen=True)
class Objective:
    """An evaluable, maximized objective over a search space."""

    id: str
    space: SearchSpace
    fn: Callable[[np.ndarray], float]
    kind: str = "builtin"
    synthetic: SyntheticSpec | None = None


def evaluate(objective: Objective, values: Sequence[float]) -> float:
    """Evaluate a valid configuration, guaranteeing a finite result."""
    x = np.asarray(values, dtype=float)
    violations = objective.space.validate(x)
    if violations:
        raise EvaluationError(
            f"{objective.id}: invalid configuration: " + "; ".join(violations),
            configuration=x,
        )
    value = float(objective.fn(x))
    if not math.isfinite(value):
        raise EvaluationError(
            f"{objective.id}: evaluator returned non-finite value {value}",
            configuration=x,
        )
    return value


def _check_gap(spec: SyntheticSpec, fn, expected_gap: float | None) -> SyntheticSpec:
    actual = spec.optimum_value - fn(np.asarray(spec.default, dtype=float))
    if abs(actual - spec.gap) > 1e-9:
        raise ValueError(f"declared gap {spec.gap} does not match geometry ({actual})")
    if expected_gap is not None and abs(expected_gap - spec.gap) > 1e-9:
        raise ValueError(f"requested gap {expected_gap} but geometry gives {spec.gap}")
    return spec


def sphere_bowl(
    objective_id: str,
    optimum: Sequence[float],
    default: Sequence[float],
    curvature: float = 4.0,
    peak: float = 1.0,
    expected_gap: float | None = None,
) -> Objective:
    """Smooth concave bowl with its peak at ``optimum``."""
    opt = np.asarray(optimum, dtype=float)
    if curvature <= 0:
        raise ValueError("curvature must be positive")

    def fn(u: np.ndarray) -> float:
        return peak - curvature * float(np.sum((u - opt) ** 2))

    spec = SyntheticSpec(
        function="sphere-bowl",
        optimum=tuple(opt),
        optimum_value=peak,
        default=tuple(float(v) for v in default),
        gap=peak - fn(np.asarray(default, dtype=float)),
    )
    _check_gap(spec, fn, expected_gap)
    space = unit_space(len(opt), defaults=list(default))
    return Objective(id=objective_id, space=space, fn=fn, synthetic=spec)


def two_basin(
    objective_id: str,
    center_local: Sequence[float],
    center_global: Sequence[float],
    width_local: float = 0.18,
    width_global: float = 0.18,
    height_local: float = 0.8,
    height_global: float = 1.0,
    default: Sequence[float] | None = None,
    expected_gap: float | None = None,
) -> Objective:
    """Two separated Gaussian bumps; the taller one holds the optimum.

    With the default placed in the shorter basin this realizes a
    good-but-deceptive starting point: locally fine, globally wrong.
    """
    c_loc = np.asarray(center_local, dtype=float)
    c_glob = np.asarray(center_global, dtype=float)
    if c_loc.shape != c_glob.shape:
        raise ValueError("basin centers must share a dimension")
    if height_global <= height_local:
        raise ValueError("the global basin must be the taller one")
    if default is None:
        default = tuple(c_loc)

    def fn(u: np.ndarray) -> float:
        d_loc = float(np.sum((u - c_loc) ** 2))
        d_glob = float(np.sum((u - c_glob) ** 2))
        return height_local * math.exp(-d_loc / (2.0 * width_local**2)) + (
            height_global * math.exp(-d_glob / (2.0 * width_global**2))
        )

    opt_value = fn(c_glob)
    spec = SyntheticSpec(
        function="two-basin",
        optimum=tuple(c_glob),
        optimum_value=opt_value,
        default=tuple(float(v) for v in default),
        gap=opt_value - fn(np.asarray(default, dtype=float)),
    )
    _check_gap(spec, fn, expected_gap)
    space = unit_space(len(c_glob), defaults=list(default))
    return Objective(id=objective_id, space=space, fn=fn, synthetic=spec)


def ridged(
    objective_id: str,
    optimum: Sequence[float],
    default: Sequence[float],
    curvature: float = 2.0,
    amplitude: float = 0.05,
    frequency: int = 3,
    peak: float = 1.0,
    expected_gap: float | None = None,
) -> Objective:
    """Bowl overlaid with cosine ripples; global peak exactly at ``optimum``."""
    opt = np.asarray(optimum, dtype=float)
    if curvature <= 0 or amplitude < 0 or frequency < 1:
        raise ValueError("need curvature > 0, amplitude >= 0, frequency >= 1")

    def fn(u: np.ndarray) -> float:
        delta = u - opt
        bowl = curvature * float(np.sum(delta**2))
        ripple = amplitude * float(np.sum(1.0 - np.cos(2.0 * math.pi * frequency * delta)))
        return peak - bowl - ripple

    spec = SyntheticSpec(
        function="ridged",
        optimum=tuple(opt),
        optimum_value=peak,
        default=tuple(float(v) for v in default),
        gap=peak - fn(np.asarray(default, dtype=float)),
    )
    _check_gap(spec, fn, expected_gap)
    space = unit_space(len(opt), defaults=list(default))
    return Objective(id=objective_id, space=space, fn=fn, synthetic=spec)


def cv_wrap(
    base: Objective, folds: int, noise_scale: float, fold_seed: int
) -> Objective:
    """Average of ``folds`` noisy replicates of the base objective.

    Per-fold noise is Gaussian with standard deviation ``noise_scale``,
    derived deterministically from the configuration bytes and the fold
    seed, so the wrapped objective is still a pure function of ``x``.
    """
    if folds < 1:
        raise ValueError("folds must be at least 1")
    if noise_scale < 0:
        raise ValueError("noise_scale must be non-negative")

    def fn(x: np.ndarray) -> float:
        value = base.fn(x)
        if noise_scale == 0.0:
            return value
        digest = hashlib.sha256(
            np.asarray(x, dtype=float).tobytes() + f"|{fold_seed}".encode()
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        eps = rng.normal(0.0, noise_scale, size=folds)
        return value + float(np.mean(eps))

    return Objective(
        id=f"{base.id}-cv{folds}",
        space=base.space,
        fn=fn,
        kind="cv",
        synthetic=base.synthetic,
    )


BUILTIN_FUNCTIONS = {
    "sphere-bowl": sphere_bowl,
    "two-basin": two_basin,
    "ridged": ridged,
}


def builtin_objective(config: dict) -> Objective:
    """Construct a builtin (optionally CV-wrapped) objective from config fields."""
    cfg = dict(config)
    function = cfg.pop("function", None)
    if function not in BUILTIN_FUNCTIONS:
        raise ValueError(f"unknown builtin function {function!r}")
    objective_id = cfg.pop("id")
    cv_cfg = cfg.pop("cv", None)
    builder = BUILTIN_FUNCTIONS[function]
    objective = builder(objective_id, **cfg)
    if cv_cfg is not None:
        objective = cv_wrap(
            objective,
            folds=int(cv_cfg.get("folds", 3)),
            noise_scale=float(cv_cfg.get("noise_scale", 0.0)),
            fold_seed=int(cv_cfg.get("fold_seed", 0)),
        )
    return objective


class ExternalEvaluator:
    """Client for the line-delimited evaluator protocol (docs/evaluator-protocol.md).

    Requests and responses are single JSON lines over the child process's
    standard input/output. One evaluator process serves one run at a time.
    """

    def __init__(self, command: str | Sequence[str], timeout: float = 30.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._buffer = bytearray()

    def start(self) -> None:
        if self._proc is not None:
            return
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            bufsize=0,
        )

    def close(self) -> None:
        if self._proc is None:
            return
        proc, self._proc = self._proc, None
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.terminate()
            proc.wait(timeout=5.0)
        except Exception:
            proc.kill()

    def __enter__(self) -> "ExternalEvaluator":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _read_line(self, deadline: float) -> str:
        assert self._proc is not None and self._proc.stdout is not None
        fd = self._proc.stdout.fileno()
        while True:
            newline = self._buffer.find(b"\n")
            if newline >= 0:
                line = bytes(self._buffer[:newline])
                del self._buffer[: newline + 1]
                return line.decode("utf-8", errors="replace")
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise EvaluationTimeout(
                    f"evaluator did not respond within {self.timeout}s"
                )
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise EvaluationTimeout(
                    f"evaluator did not respond within {self.timeout}s"
                )
            chunk = os.read(fd, 65536)
            if not chunk:
                raise EvaluationError("evaluator closed its output stream")
            self._buffer += chunk

    def evaluate(
        self, run_id: str, index: int, names: Sequence[str], values: Sequence[float]
    ) -> float:
        self.start()
        assert self._proc is not None and self._proc.stdin is not None
        request = {
            "run": run_id,
            "index": index,
            "config": {name: float(v) for name, v in zip(names, values)},
        }
        try:
            self._proc.stdin.write((json.dumps(request) + "\n").encode("utf-8"))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EvaluationError(f"evaluator pipe failed: {exc}") from exc
        line = self._read_line(time.monotonic() + self.timeout)
        try:
            response = json.loads(line)
            resp_index = int(response["index"])
            value = float(response["value"])
        except (ValueError, KeyError, TypeError):
            raise EvaluationError(
                "malformed evaluator response", raw_line=line
            ) from None
        if resp_index != index:
            raise EvaluationError(
                f"evaluator answered index {resp_index}, expected {index}",
                raw_line=line,
            )
        return value


class _ExternalFn:
    """Per-run adapter from configuration vectors to evaluator requests."""

    def __init__(
        self,
        evaluator: ExternalEvaluator,
        names: Sequence[str],
        run_id: str,
        sense: str,
    ):
        if sense not in ("score", "loss"):
            raise ValueError("sense must be 'score' or 'loss'")
        self._evaluator = evaluator
        self._names = tuple(names)
        self._run_id = run_id
        self._sense = sense
        self._index = 0

    def __call__(self, x: np.ndarray) -> float:
        self._index += 1
        value = self._evaluator.evaluate(self._run_id, self._index, self._names, x)
        if not math.isfinite(value):
            raise EvaluationError(
                f"evaluator returned non-finite value {value}", configuration=x
            )
        return -value if self._sense == "loss" else value


def open_external_objective(
    objective_id: str,
    space: SearchSpace,
    command: str | Sequence[str],
    run_id: str,
    sense: str = "score",
    timeout: float = 30.0,
) -> tuple[Objective, ExternalEvaluator]:
    """Launch an evaluator process and wrap it as an objective.

    The caller owns the returned evaluator and must close it after the
    run; each process serves exactly one run.
    """
    evaluator = ExternalEvaluator(command, timeout=timeout)
    evaluator.start()
    fn = _ExternalFn(evaluator, space.names, run_id, sense)
    objective = Objective(id=objective_id, space=space, fn=fn, kind="external")
    return objective, evaluator
