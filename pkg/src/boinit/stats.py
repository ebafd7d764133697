"""Statistical comparison of initialization strategies.

Covers relative-improvement deltas, thresholded win/tie/loss
classification, exact one-sided binomial tests, the dataset spread
metric, min-max normalization, Pearson correlation with t-transform
p-values, early/late running-best decomposition, and the concentration
sensitivity sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import betainc

ALPHA = 0.05

WIN = "win"
TIE = "tie"
LOSS = "loss"


@dataclass(frozen=True)
class Thresholds:
    """Tie bands for the two comparison dimensions.

    ``tau_conv`` is the minimum relative speed-up counted as a
    convergence win; ``tau_metric`` the minimum relative gain counted as
    a metric win. ``tau_metric`` may alternatively be derived from the
    smallest observed dataset spread.
    """

    tau_conv: float = 0.10
    tau_metric: float = 0.003

    def __post_init__(self) -> None:
        if self.tau_conv < 0 or self.tau_metric < 0:
            raise ValueError("thresholds must be non-negative")


@dataclass(frozen=True)
class PairedCell:
    """Per-cell means for one candidate strategy against its baseline."""

    key: tuple[str, ...]
    conv_candidate: float
    conv_baseline: float
    metric_candidate: float
    metric_baseline: float
    repetitions: int


@dataclass(frozen=True)
class BinomialResult:
    wins: int
    losses: int
    ties: int
    n_total: int
    p_value: float
    reject: bool


def delta_conv(baseline_mean: float, candidate_mean: float) -> float:
    """Relative convergence speed-up of the candidate over the baseline."""
    if baseline_mean <= 0:
        raise ValueError("baseline mean convergence index must be positive")
    return (baseline_mean - candidate_mean) / baseline_mean


def delta_metric(baseline_mean: float, candidate_mean: float) -> float:
    """Relative final-metric improvement of the candidate over the baseline."""
    if baseline_mean == 0:
        raise ValueError("baseline mean metric must be non-zero")
    return (candidate_mean - baseline_mean) / baseline_mean


def classify(delta: float, tau: float) -> str:
    """Symmetric thresholded outcome: win above +tau, loss below -tau."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if delta > tau:
        return WIN
    if delta < -tau:
        return LOSS
    return TIE


def binomial_test(wins: int, losses: int, ties: int = 0) -> BinomialResult:
    """Exact one-sided binomial test of the win count against a fair coin.

    The p-value is the upper-tail probability P(X >= wins) with
    X ~ Binomial(wins + losses, 1/2), computed in exact rational
    arithmetic before the final float conversion.
    """
    if wins < 0 or losses < 0 or ties < 0:
        raise ValueError("counts must be non-negative")
    n = wins + losses
    if n == 0:
        raise ValueError("need at least one non-tied comparison")
    scale = Fraction(1, 2**n)
    p = sum(Fraction(math.comb(n, i)) for i in range(wins, n + 1)) * scale
    p_value = float(p)
    return BinomialResult(
        wins=wins,
        losses=losses,
        ties=ties,
        n_total=n,
        p_value=p_value,
        reject=p_value < ALPHA,
    )


def spread(running_best_curves: Sequence[np.ndarray]) -> float:
    """Mean relative range of running-best curves across (model, strategy) pairs."""
    if len(running_best_curves) == 0:
        raise ValueError("need at least one curve")
    ratios = []
    for curve in running_best_curves:
        arr = np.asarray(curve, dtype=float)
        low = float(np.min(arr))
        if low <= 0:
            raise ValueError("spread requires strictly positive running-best values")
        ratios.append((float(np.max(arr)) - low) / low)
    return float(np.mean(ratios))


def minmax_normalize(values: Sequence[float]) -> np.ndarray:
    """Scale to [0, 1]; a constant vector maps to all zeros."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot normalize an empty vector")
    low, high = float(np.min(arr)), float(np.max(arr))
    if high == low:
        return np.zeros_like(arr)
    return (arr - low) / (high - low)


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Sample Pearson correlation with a two-sided t-transform p-value."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise ValueError("inputs must be equal-length vectors")
    n = xa.size
    if n < 3:
        raise ValueError("need at least 3 paired samples")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    sx = float(np.sqrt(np.sum(xc**2)))
    sy = float(np.sqrt(np.sum(yc**2)))
    if sx == 0 or sy == 0:
        raise ValueError("pearson is undefined for a constant vector")
    r = float(np.dot(xc, yc) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    dof = n - 2
    if abs(r) == 1.0:
        return r, 0.0
    # P(|T| >= |t|) for T ~ t_dof via the regularized incomplete beta.
    t2 = r * r * dof / (1.0 - r * r)
    p = float(betainc(dof / 2.0, 0.5, dof / (dof + t2)))
    return r, p


def early_late_means(
    running_best: Sequence[float], split_fraction: float = 0.5
) -> tuple[float, float]:
    """Mean running best over the first ceil(split*T) iterations vs the rest."""
    arr = np.asarray(running_best, dtype=float)
    if arr.size < 2:
        raise ValueError("need a trace of length at least 2")
    if not (0.0 < split_fraction < 1.0):
        raise ValueError("split_fraction must lie in (0, 1)")
    cut = math.ceil(split_fraction * arr.size)
    if cut >= arr.size:
        raise ValueError("split leaves no late phase")
    return float(np.mean(arr[:cut])), float(np.mean(arr[cut:]))


@dataclass(frozen=True)
class LambdaRunMetrics:
    """Per-run metric row for the concentration sensitivity sweep."""

    lam: float
    max_performance: float
    mean_performance: float
    convergence_index: float
    early_mean: float
    late_mean: float


SENSITIVITY_METRICS = (
    ("max_performance", "Max. performance"),
    ("mean_performance", "Mean performance"),
    ("convergence_index", "Convergence index"),
    ("early_mean", "Early mean"),
    ("late_mean", "Late mean"),
)


@dataclass(frozen=True)
class SensitivityReport:
    """Pearson correlation of each normalized metric against lambda.

    ``rows`` maps metric name to (r, p), or None where the metric column
    was constant and the correlation is undefined.
    """

    rows: dict[str, tuple[float, float] | None]
    n_runs: int


def sensitivity_sweep(rows: Sequence[LambdaRunMetrics]) -> SensitivityReport:
    """Correlate each run-level metric with the concentration parameter."""
    if len(rows) == 0:
        raise ValueError("no sweep rows supplied")
    lams = np.array([row.lam for row in rows])
    if np.unique(lams).size < 3:
        raise ValueError("need at least 3 distinct lambda values")
    report: dict[str, tuple[float, float] | None] = {}
    for attr, _ in SENSITIVITY_METRICS:
        values = np.array([getattr(row, attr) for row in rows], dtype=float)
        if np.min(values) == np.max(values):
            report[attr] = None
            continue
        normalized = minmax_normalize(values)
        report[attr] = pearson(lams, normalized)
    return SensitivityReport(rows=report, n_runs=len(rows))
