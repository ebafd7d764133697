"""Gaussian-process regression with an isotropic squared-exponential kernel.

Targets are standardized internally (zero mean, unit variance) and the GP
prior mean is zero on the standardized scale, so predictions revert to the
empirical target mean far from the data. Kernel hyperparameters are chosen
by maximizing the log marginal likelihood over a coarse log-space grid,
refined by coordinate-wise golden-section search. All linear algebra goes
through a jittered Cholesky factorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

_LOG_2PI = math.log(2.0 * math.pi)
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class GpFitError(RuntimeError):
    """Raised when the kernel matrix cannot be factorized even at maximum jitter."""


@dataclass(frozen=True)
class KernelParams:
    """Squared-exponential kernel hyperparameters on unit-cube inputs."""

    signal_variance: float
    length_scale: float
    noise_variance: float

    def __post_init__(self) -> None:
        if not (self.signal_variance > 0):
            raise ValueError("signal_variance must be positive")
        if not (self.length_scale > 0):
            raise ValueError("length_scale must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")


@dataclass(frozen=True)
class FitPolicy:
    """Deterministic hyperparameter-selection policy used by :func:`fit`.

    Signal variance is fixed at 1 (absorbed by target standardization);
    length scale and noise variance are selected on log-space grids and
    refined with ``refine_iters`` golden-section iterations split across
    the two coordinates. Jitter is expressed as a multiple of the mean
    kernel-matrix diagonal and escalates tenfold on Cholesky failure.
    """

    length_scale_bounds: tuple[float, float] = (0.05, 2.0)
    length_scale_grid: int = 8
    noise_bounds: tuple[float, float] = (1e-6, 1e-1)
    noise_grid: int = 6
    refine_iters: int = 50
    jitter_start: float = 1e-10
    jitter_max: float = 1e-4


DEFAULT_FIT_POLICY = FitPolicy()


@dataclass(frozen=True)
class GpModel:
    """Fitted surrogate: training data, kernel, and Cholesky solves.

    ``targets`` are standardized; ``target_mean``/``target_std`` restore
    raw units. ``chol`` is the lower Cholesky factor of
    ``K + noise_variance*I + jitter*I`` and ``alpha`` solves that matrix
    against the standardized targets.
    """

    inputs: np.ndarray
    targets: np.ndarray
    kernel: KernelParams
    chol: np.ndarray
    alpha: np.ndarray
    target_mean: float
    target_std: float
    jitter: float

    @property
    def n_observations(self) -> int:
        return self.inputs.shape[0]

    def incumbent(self) -> float:
        """Best observed target value, in raw units."""
        return float(self.target_mean + self.target_std * np.max(self.targets))


def kernel_eval(params: KernelParams, x: np.ndarray, x_other: np.ndarray) -> float:
    """Squared-exponential covariance between two points."""
    x = np.asarray(x, dtype=float)
    x_other = np.asarray(x_other, dtype=float)
    if x.shape != x_other.shape:
        raise ValueError("kernel inputs must have the same shape")
    sq = float(np.sum((x - x_other) ** 2))
    return params.signal_variance * math.exp(-sq / (2.0 * params.length_scale**2))


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    d2 = aa + bb - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def _kernel_matrix(params: KernelParams, sq_dists: np.ndarray) -> np.ndarray:
    return params.signal_variance * np.exp(-sq_dists / (2.0 * params.length_scale**2))


def _chol_with_jitter(
    cov: np.ndarray, policy: FitPolicy
) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``cov + jitter*I`` with escalating jitter."""
    diag_scale = float(np.trace(cov)) / cov.shape[0]
    jitter = policy.jitter_start * diag_scale
    max_jitter = policy.jitter_max * diag_scale
    while True:
        try:
            chol = cholesky(cov + jitter * np.eye(cov.shape[0]), lower=True)
            return chol, jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > max_jitter:
                raise GpFitError(
                    f"Cholesky factorization failed up to jitter {max_jitter:g}"
                ) from None


def log_marginal_likelihood(
    inputs: np.ndarray,
    targets: np.ndarray,
    params: KernelParams,
    policy: FitPolicy = DEFAULT_FIT_POLICY,
) -> float:
    """Gaussian-process evidence of ``targets`` (already standardized) at ``params``."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float)
    n = inputs.shape[0]
    cov = _kernel_matrix(params, _sq_dists(inputs, inputs))
    cov[np.diag_indices_from(cov)] += params.noise_variance
    chol, _ = _chol_with_jitter(cov, policy)
    alpha = cho_solve((chol, True), targets)
    return float(
        -0.5 * targets @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * n * _LOG_2PI
    )


def _golden_max(fn, lo: float, hi: float, iters: int) -> tuple[float, float]:
    """Golden-section maximization of a scalar function on [lo, hi]."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def _standardize(targets: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(np.mean(targets))
    centered = targets - mean
    std = float(np.std(centered))
    if targets.size == 1 or std == 0.0:
        std = 1.0
    return centered / std, mean, std


def _select_params(
    sq_dists: np.ndarray, targets_std: np.ndarray, policy: FitPolicy
) -> KernelParams:
    """Grid search plus golden-section refinement of (length scale, noise)."""
    ell_grid = np.geomspace(*policy.length_scale_bounds, policy.length_scale_grid)
    noise_grid = np.geomspace(*policy.noise_bounds, policy.noise_grid)

    def lml_at(log_ell: float, log_noise: float) -> float:
        params = KernelParams(1.0, math.exp(log_ell), math.exp(log_noise))
        cov = _kernel_matrix(params, sq_dists)
        cov[np.diag_indices_from(cov)] += params.noise_variance
        try:
            chol, _ = _chol_with_jitter(cov, policy)
        except GpFitError:
            return -np.inf
        alpha = cho_solve((chol, True), targets_std)
        n = sq_dists.shape[0]
        return float(
            -0.5 * targets_std @ alpha
            - np.sum(np.log(np.diag(chol)))
            - 0.5 * n * _LOG_2PI
        )

    best = (-np.inf, math.log(ell_grid[0]), math.log(noise_grid[0]))
    for ell in ell_grid:
        for noise in noise_grid:
            value = lml_at(math.log(ell), math.log(noise))
            if value > best[0]:
                best = (value, math.log(ell), math.log(noise))
    _, log_ell, log_noise = best

    ell_step = math.log(ell_grid[1]) - math.log(ell_grid[0])
    noise_step = math.log(noise_grid[1]) - math.log(noise_grid[0])
    ell_lo, ell_hi = math.log(policy.length_scale_bounds[0]), math.log(policy.length_scale_bounds[1])
    noise_lo, noise_hi = math.log(policy.noise_bounds[0]), math.log(policy.noise_bounds[1])

    passes = 2
    line_iters = max(1, policy.refine_iters // (2 * passes))
    for _ in range(passes):
        log_ell, _ = _golden_max(
            lambda v: lml_at(v, log_noise),
            max(ell_lo, log_ell - ell_step),
            min(ell_hi, log_ell + ell_step),
            line_iters,
        )
        log_noise, refined_value = _golden_max(
            lambda v: lml_at(log_ell, v),
            max(noise_lo, log_noise - noise_step),
            min(noise_hi, log_noise + noise_step),
            line_iters,
        )
    if refined_value < best[0]:
        _, log_ell, log_noise = best
    return KernelParams(1.0, math.exp(log_ell), math.exp(log_noise))


def build_model(
    inputs: np.ndarray,
    targets: np.ndarray,
    params: KernelParams,
    policy: FitPolicy = DEFAULT_FIT_POLICY,
) -> GpModel:
    """Assemble a :class:`GpModel` at fixed kernel hyperparameters."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError("inputs and targets disagree on the number of rows")
    if not np.all(np.isfinite(targets)):
        raise ValueError("targets must be finite")
    targets_std, mean, std = _standardize(targets)
    cov = _kernel_matrix(params, _sq_dists(inputs, inputs))
    cov[np.diag_indices_from(cov)] += params.noise_variance
    chol, jitter = _chol_with_jitter(cov, policy)
    alpha = cho_solve((chol, True), targets_std)
    return GpModel(
        inputs=inputs,
        targets=targets_std,
        kernel=params,
        chol=chol,
        alpha=alpha,
        target_mean=mean,
        target_std=std,
        jitter=jitter,
    )


def fit(
    inputs: np.ndarray,
    targets: np.ndarray,
    policy: FitPolicy = DEFAULT_FIT_POLICY,
) -> GpModel:
    """Fit a GP to unit-cube inputs: standardize, select hyperparameters, factorize."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.asarray(targets, dtype=float).ravel()
    if inputs.ndim != 2 or inputs.shape[0] < 1:
        raise ValueError("need at least one observation")
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError("inputs and targets disagree on the number of rows")
    if not np.all(np.isfinite(targets)):
        raise ValueError("targets must be finite")
    if np.any(inputs < -1e-9) or np.any(inputs > 1.0 + 1e-9):
        raise ValueError("inputs must lie in the unit cube")
    targets_std, _, _ = _standardize(targets)
    params = _select_params(_sq_dists(inputs, inputs), targets_std, policy)
    return build_model(inputs, targets, params, policy)


def posterior_batch(model: GpModel, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance (raw target units) at a batch of unit points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != model.inputs.shape[1]:
        raise ValueError(
            f"expected dimension {model.inputs.shape[1]}, got {pts.shape[1]}"
        )
    k_star = _kernel_matrix(model.kernel, _sq_dists(model.inputs, pts))
    mean_std = k_star.T @ model.alpha
    v = solve_triangular(model.chol, k_star, lower=True)
    var_std = model.kernel.signal_variance - np.sum(v * v, axis=0)
    mean = model.target_mean + model.target_std * mean_std
    var = model.target_std**2 * np.maximum(var_std, 0.0)
    return mean, var


def posterior(model: GpModel, point: np.ndarray) -> tuple[float, float]:
    """Posterior mean and variance (raw target units) at one unit-cube point."""
    mean, var = posterior_batch(model, np.asarray(point, dtype=float)[None, :])
    return float(mean[0]), float(var[0])
