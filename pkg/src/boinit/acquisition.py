"""Expected Improvement and its maximization over the search domain.

The maximizer scores a batch of uniform unit-cube candidates, keeps the
top few, and polishes each with coordinate-wise golden-section line
searches run in lockstep so candidate selection stays order-deterministic
under a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .gp import GpModel, posterior_batch
from .space import SearchSpace

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

REFINE_STARTS = 5
REFINE_ITERS = 100
CANDIDATES_PER_DIM = 1000


@dataclass(frozen=True)
class AcquisitionContext:
    """Incumbent best value paired with the surrogate it came from."""

    model: GpModel
    incumbent: float

    @classmethod
    def from_model(cls, model: GpModel) -> "AcquisitionContext":
        return cls(model=model, incumbent=model.incumbent())


def normal_cdf(z: np.ndarray | float) -> np.ndarray | float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * erfc(-np.asarray(z, dtype=float) / _SQRT2)


def normal_pdf(z: np.ndarray | float) -> np.ndarray | float:
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(np.asarray(z, dtype=float)))


def expected_improvement(
    mean: np.ndarray | float,
    std: np.ndarray | float,
    incumbent: float,
) -> np.ndarray | float:
    """Expected positive gain over ``incumbent`` for a Gaussian prediction.

    With ``std == 0`` this degenerates to ``max(mean - incumbent, 0)``.
    """
    mean_arr = np.asarray(mean, dtype=float)
    std_arr = np.asarray(std, dtype=float)
    if not (np.all(np.isfinite(mean_arr)) and np.all(np.isfinite(std_arr)) and np.isfinite(incumbent)):
        raise ValueError("expected_improvement requires finite inputs")
    if np.any(std_arr < 0):
        raise ValueError("std must be non-negative")
    gain = mean_arr - incumbent
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std_arr > 0, gain / np.where(std_arr > 0, std_arr, 1.0), 0.0)
    smooth = gain * normal_cdf(z) + std_arr * normal_pdf(z)
    ei = np.where(std_arr > 0, smooth, np.maximum(gain, 0.0))
    ei = np.maximum(ei, 0.0)
    if np.isscalar(mean) and np.isscalar(std):
        return float(ei)
    return ei


def _ei_at(model: GpModel, unit_points: np.ndarray, incumbent: float) -> np.ndarray:
    mean, var = posterior_batch(model, unit_points)
    return np.asarray(expected_improvement(mean, np.sqrt(var), incumbent))


def _refine_lockstep(
    model: GpModel,
    incumbent: float,
    starts: np.ndarray,
    total_iters: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate-wise golden-section polish of several starts at once.

    Each elementary iteration shrinks one coordinate's bracket for every
    start simultaneously (one batched posterior call per iteration). A
    line result is only accepted where it does not lower the EI.
    """
    points = starts.copy()
    k, dim = points.shape
    best = _ei_at(model, points, incumbent)
    passes = 2
    line_iters = max(1, total_iters // (passes * dim))
    for _ in range(passes):
        for coord in range(dim):
            lo = np.zeros(k)
            hi = np.ones(k)
            c = hi - _INVPHI * (hi - lo)
            d = lo + _INVPHI * (hi - lo)
            probe = points.copy()
            probe[:, coord] = c
            fc = _ei_at(model, probe, incumbent)
            probe[:, coord] = d
            fd = _ei_at(model, probe, incumbent)
            for _ in range(line_iters):
                left = fc >= fd
                lo = np.where(left, lo, c)
                hi = np.where(left, d, hi)
                # One interior point carries over (old c on the left branch,
                # old d on the right); only the other needs a fresh EI value.
                shift_x = np.where(left, c, d)
                shift_f = np.where(left, fc, fd)
                width = hi - lo
                fresh_x = np.where(left, hi - _INVPHI * width, lo + _INVPHI * width)
                probe[:, coord] = fresh_x
                fresh_f = _ei_at(model, probe, incumbent)
                c = np.where(left, fresh_x, shift_x)
                fc = np.where(left, fresh_f, shift_f)
                d = np.where(left, shift_x, fresh_x)
                fd = np.where(left, shift_f, fresh_f)
            line_x = np.where(fc >= fd, c, d)
            line_f = np.maximum(fc, fd)
            accept = line_f >= best
            points[:, coord] = np.where(accept, line_x, points[:, coord])
            best = np.where(accept, line_f, best)
    return points, best


def maximize(
    model: GpModel,
    space: SearchSpace,
    incumbent: float,
    rng: np.random.Generator,
    budget: int | None = None,
) -> np.ndarray:
    """Pick the configuration with the highest refined EI.

    ``budget`` is the number of uniform candidates scored before
    refinement (default ``1000 * d``). Ties in refined EI break toward
    the candidate that was scored first, keeping runs reproducible.
    """
    dim = space.dimension
    if budget is None:
        budget = CANDIDATES_PER_DIM * dim
    if budget < 1:
        raise ValueError("candidate budget must be at least 1")
    candidates = rng.random((budget, dim))
    scores = _ei_at(model, candidates, incumbent)
    order = np.argsort(-scores, kind="stable")
    top = order[: min(REFINE_STARTS, budget)]
    refined, refined_scores = _refine_lockstep(
        model, incumbent, candidates[top], REFINE_ITERS
    )
    best_pos = 0
    for pos in range(1, len(top)):
        better = refined_scores[pos] > refined_scores[best_pos]
        same_but_earlier = (
            refined_scores[pos] == refined_scores[best_pos]
            and top[pos] < top[best_pos]
        )
        if better or same_but_earlier:
            best_pos = pos
    return space.from_unit(refined[best_pos])
