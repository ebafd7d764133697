"""Bayesian optimization with pluggable initialization strategies and a
statistical harness for comparing them."""

from .acquisition import expected_improvement, maximize
from .engine import Trace, best_metric, convergence_index, run_bo, summarize
from .gp import FitPolicy, GpModel, KernelParams, fit, kernel_eval, log_marginal_likelihood, posterior
from .initialization import (
    DefaultPoint,
    InitStrategy,
    TruncatedGaussian,
    Uniform,
    generate_initial,
    lambda_grid,
    truncnorm_sample,
)
from .objectives import Objective, cv_wrap, evaluate, ridged, sphere_bowl, two_basin
from .space import Parameter, SearchSpace, load_space, unit_space
from .stats import Thresholds, binomial_test, classify, delta_conv, delta_metric, pearson, spread

__version__ = "0.1.0"

__all__ = [
    "DefaultPoint",
    "FitPolicy",
    "GpModel",
    "InitStrategy",
    "KernelParams",
    "Objective",
    "Parameter",
    "SearchSpace",
    "Thresholds",
    "Trace",
    "TruncatedGaussian",
    "Uniform",
    "best_metric",
    "binomial_test",
    "classify",
    "convergence_index",
    "cv_wrap",
    "delta_conv",
    "delta_metric",
    "evaluate",
    "expected_improvement",
    "fit",
    "generate_initial",
    "kernel_eval",
    "lambda_grid",
    "load_space",
    "log_marginal_likelihood",
    "maximize",
    "pearson",
    "posterior",
    "ridged",
    "run_bo",
    "sphere_bowl",
    "spread",
    "summarize",
    "truncnorm_sample",
    "two_basin",
    "unit_space",
]
