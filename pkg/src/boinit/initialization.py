"""Initial-design strategies for the Bayesian-optimization loop.

Three strategies produce the data the first surrogate is fitted to:
uniform sampling over the domain, truncated-Gaussian sampling centered at
the declared per-parameter defaults, and the single deterministic default
point. Sampling happens on each parameter's search scale (the unit-cube
coordinate), so logarithmic parameters are sampled log-uniformly and the
truncated Gaussian's width is a fraction ``lam`` of the transformed range.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import ndtr, ndtri

from .space import SearchSpace


@dataclass(frozen=True)
class Uniform:
    """``count`` points sampled uniformly on each parameter's search scale."""

    count: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be at least 1")


@dataclass(frozen=True)
class TruncatedGaussian:
    """``count`` points from per-coordinate truncated normals at the defaults.

    ``lam`` sets the standard deviation as a fraction of each parameter's
    transformed range; small values concentrate the design at the default,
    values toward 1 approach uniform coverage.
    """

    count: int
    lam: float

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("count must be at least 1")
        if not (0.0 < self.lam < 1.0):
            raise ValueError("lam must lie strictly between 0 and 1")


@dataclass(frozen=True)
class DefaultPoint:
    """The single deterministic default configuration."""


InitStrategy = Union[Uniform, TruncatedGaussian, DefaultPoint]


def initial_count(strategy: InitStrategy) -> int:
    if isinstance(strategy, DefaultPoint):
        return 1
    return strategy.count


def strategy_label(strategy: InitStrategy) -> str:
    """Short canonical tag used in run ids and trace files."""
    if isinstance(strategy, Uniform):
        return f"uni-n{strategy.count}"
    if isinstance(strategy, TruncatedGaussian):
        return f"tg-n{strategy.count}-l{strategy.lam!r}"
    return "def"


def truncnorm_sample(
    mu: float, sigma: float, a: float, b: float, rng: np.random.Generator
) -> float:
    """One draw from a normal(mu, sigma^2) truncated to [a, b].

    Uses the inverse-CDF transform, so a single uniform variate is
    consumed per draw and the cost does not depend on how hard the
    truncation is.
    """
    if not (a < b):
        raise ValueError("need a < b")
    if not (a <= mu <= b):
        raise ValueError("mu must lie within [a, b]")
    if not (sigma > 0):
        raise ValueError("sigma must be positive")
    p_lo = ndtr((a - mu) / sigma)
    p_hi = ndtr((b - mu) / sigma)
    p = p_lo + rng.random() * (p_hi - p_lo)
    value = mu + sigma * float(ndtri(p))
    return min(max(value, a), b)


def generate_initial(
    space: SearchSpace, strategy: InitStrategy, rng: np.random.Generator
) -> list[np.ndarray]:
    """Produce the initial design as a list of valid configurations."""
    if isinstance(strategy, DefaultPoint):
        return [space.default_configuration()]
    if isinstance(strategy, Uniform):
        return [space.from_unit(rng.random(space.dimension)) for _ in range(strategy.count)]
    centers = [p.to_unit(p.default) for p in space.parameters]
    points = []
    for _ in range(strategy.count):
        unit = np.array(
            [truncnorm_sample(mu, strategy.lam, 0.0, 1.0, rng) for mu in centers]
        )
        points.append(space.from_unit(unit))
    return points


def lambda_grid() -> list[float]:
    """The evenly spaced concentration ladder used by the sensitivity sweep."""
    return [0.05, 0.1125, 0.175, 0.2375, 0.30]
