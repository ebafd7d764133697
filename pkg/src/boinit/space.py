"""Bounded hyperparameter domains: per-parameter bounds, defaults, and
the transforms between raw values and the optimizer's unit cube.

A configuration is represented as a plain float vector in raw parameter
units, ordered like the space's parameter list. Integer parameters are
relaxed to continuous coordinates inside the optimizer and rounded back
to whole numbers when a unit-cube point is mapped to raw units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SCALES = ("linear", "log")
KINDS = ("continuous", "integer")


@dataclass(frozen=True)
class Parameter:
    """One bounded dimension of a search space.

    ``lower``/``upper`` are inclusive bounds and ``default`` is the
    library-style default value. ``scale="log"`` means the parameter is
    searched on a logarithmic axis (bounds must be positive);
    ``kind="integer"`` restricts raw values to whole numbers.
    """

    name: str
    lower: float
    upper: float
    default: float
    scale: str = "linear"
    kind: str = "continuous"

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("parameter name must be non-empty")
        if self.scale not in SCALES:
            raise ValueError(f"{self.name}: scale must be one of {SCALES}")
        if self.kind not in KINDS:
            raise ValueError(f"{self.name}: kind must be one of {KINDS}")
        if not (self.lower < self.upper):
            raise ValueError(f"{self.name}: lower bound must be below upper bound")
        if not (self.lower <= self.default <= self.upper):
            raise ValueError(f"{self.name}: default must lie within the bounds")
        if self.scale == "log" and self.lower <= 0:
            raise ValueError(f"{self.name}: log scale requires a positive lower bound")
        if self.kind == "integer":
            for label, v in (("lower", self.lower), ("upper", self.upper), ("default", self.default)):
                if float(v) != math.floor(v):
                    raise ValueError(f"{self.name}: integer parameter has non-integer {label}")

    def to_unit(self, value: float) -> float:
        """Map a raw value into [0, 1] on this parameter's search scale."""
        if self.scale == "log":
            return (math.log(value) - math.log(self.lower)) / (
                math.log(self.upper) - math.log(self.lower)
            )
        return (value - self.lower) / (self.upper - self.lower)

    def from_unit(self, u: float) -> float:
        """Inverse of :meth:`to_unit`; rounds and clamps integer parameters."""
        if self.scale == "log":
            lo = math.log(self.lower)
            v = math.exp(lo + u * (math.log(self.upper) - lo))
        else:
            v = self.lower + u * (self.upper - self.lower)
        if self.kind == "integer":
            v = float(math.floor(v + 0.5))
        return min(max(v, self.lower), self.upper)


@dataclass(frozen=True)
class SearchSpace:
    """Ordered collection of :class:`Parameter` definitions."""

    parameters: tuple[Parameter, ...]

    def __post_init__(self) -> None:
        if len(self.parameters) == 0:
            raise ValueError("search space needs at least one parameter")
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")

    @property
    def dimension(self) -> int:
        return len(self.parameters)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parameters)

    def validate(self, values: Sequence[float]) -> list[str]:
        """Check a configuration against every parameter invariant.

        Returns an empty list when the configuration is valid, otherwise
        one message per violated parameter.
        """
        violations: list[str] = []
        vals = np.asarray(values, dtype=float)
        if vals.shape != (self.dimension,):
            return [f"expected {self.dimension} values, got shape {vals.shape}"]
        for p, v in zip(self.parameters, vals):
            if not np.isfinite(v):
                violations.append(f"{p.name}: non-finite value {v}")
            elif not (p.lower <= v <= p.upper):
                violations.append(f"{p.name}: {v} outside [{p.lower}, {p.upper}]")
            elif p.kind == "integer" and float(v) != math.floor(v):
                violations.append(f"{p.name}: {v} is not a whole number")
        return violations

    def to_unit(self, values: Sequence[float]) -> np.ndarray:
        """Map a valid configuration into the unit cube."""
        violations = self.validate(values)
        if violations:
            raise ValueError("invalid configuration: " + "; ".join(violations))
        vals = np.asarray(values, dtype=float)
        return np.array([p.to_unit(v) for p, v in zip(self.parameters, vals)])

    def from_unit(self, unit: Sequence[float]) -> np.ndarray:
        """Map a unit-cube point back to raw parameter units."""
        u = np.asarray(unit, dtype=float)
        if u.shape != (self.dimension,):
            raise ValueError(f"expected {self.dimension} coordinates, got shape {u.shape}")
        if np.any(u < 0.0) or np.any(u > 1.0) or not np.all(np.isfinite(u)):
            raise ValueError("unit coordinates must lie in [0, 1]")
        return np.array([p.from_unit(v) for p, v in zip(self.parameters, u)])

    def default_configuration(self) -> np.ndarray:
        """The vector of declared per-parameter defaults."""
        return np.array([p.default for p in self.parameters], dtype=float)


def space_from_dict(data: dict) -> SearchSpace:
    """Build a space from the documented config-file schema."""
    try:
        entries: Iterable[dict] = data["parameters"]
    except (KeyError, TypeError):
        raise ValueError("space config must contain a 'parameters' list") from None
    params = []
    for entry in entries:
        unknown = set(entry) - {"name", "scale", "kind", "lower", "upper", "default"}
        if unknown:
            raise ValueError(f"unknown parameter fields: {sorted(unknown)}")
        params.append(
            Parameter(
                name=str(entry["name"]),
                lower=float(entry["lower"]),
                upper=float(entry["upper"]),
                default=float(entry["default"]),
                scale=str(entry.get("scale", "linear")),
                kind=str(entry.get("kind", "continuous")),
            )
        )
    return SearchSpace(parameters=tuple(params))


def load_space(path: str | Path) -> SearchSpace:
    """Load a search-space definition from a JSON config file."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return space_from_dict(data)


def unit_space(dimension: int, defaults: Sequence[float] | None = None) -> SearchSpace:
    """Continuous [0, 1] space, used by the builtin synthetic objectives."""
    if defaults is None:
        defaults = [0.5] * dimension
    if len(defaults) != dimension:
        raise ValueError("defaults length must match dimension")
    return SearchSpace(
        parameters=tuple(
            Parameter(name=f"x{i + 1}", lower=0.0, upper=1.0, default=float(d))
            for i, d in enumerate(defaults)
        )
    )
