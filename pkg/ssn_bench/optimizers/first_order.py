"""Gradient descent and accelerated gradient descent baselines."""
import math
from dataclasses import replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..glm import GlmProblem
from ..linalg import NumericalError, symmetric_eig_extremes
from ..trace import RunTrace
from .line_search import backtracking
from .optimizer import BaselineConfig, DivergenceError, Optimizer, OptimizerError, StepSizeError

# Consecutive objective increases tolerated by fixed-step gradient descent.
MAX_INCREASES = 10


def curvature_estimates(problem: GlmProblem, w0: np.ndarray) -> Tuple[float, float]:
    """Smallest and largest eigenvalue of `H(w0)`."""
    return symmetric_eig_extremes(problem.hessian(w0))


def gd_run(
    problem: GlmProblem, w0: np.ndarray, cfg: BaselineConfig, w_star: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, RunTrace]:
    """`w <- w - eta g` with `eta = 1 / lambda_max(H(w0))` unless overridden, or Armijo backtracking."""
    recorder = cfg.stop.recorder(problem, w_star)
    w = np.array(w0, dtype=np.float64)
    recorder.record(w)

    step = cfg.step_size
    if step is None:
        _, smoothness = curvature_estimates(problem, w)
        step = 1.0 / smoothness
    recorder.trace.metadata["step_size"] = step

    objective = problem.objective(w)
    increases = 0
    for _ in range(cfg.stop.max_iters):
        if recorder.should_stop():
            break

        gradient = problem.gradient(w)
        try:
            if cfg.step_rule == "backtracking":
                _, w, value = backtracking(
                    problem, w, objective, gradient, -gradient, step, cfg.armijo_constant(), cfg.backtracking_beta,
                    recorder.trace,
                )
            else:
                w = w - step * gradient
                value = problem.objective(w)
        except NumericalError as error:
            raise OptimizerError(f"Gradient step failed: {error}", recorder.trace)

        increases = increases + 1 if value > objective else 0
        objective = value
        recorder.record(w)
        if increases >= MAX_INCREASES:
            raise StepSizeError(
                f"Objective increased for {MAX_INCREASES} consecutive steps with step size {step:.3e}", recorder.trace
            )
        if recorder.is_diverging():
            raise DivergenceError("Gradient descent diverged", recorder.trace)

    return w, recorder.trace


def agd_run(
    problem: GlmProblem, w0: np.ndarray, cfg: BaselineConfig, w_star: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, RunTrace]:
    """Nesterov's method with constant momentum `(sqrt(kappa) - 1) / (sqrt(kappa) + 1)`.

    Without a positive strong convexity estimate the momentum follows the `k / (k + 3)` schedule.
    """
    recorder = cfg.stop.recorder(problem, w_star)
    w = np.array(w0, dtype=np.float64)
    recorder.record(w)

    step, mu = cfg.step_size, cfg.strong_convexity
    if step is None or mu is None:
        lambda_min, lambda_max = curvature_estimates(problem, w)
        step = step if step is not None else 1.0 / lambda_max
        mu = mu if mu is not None else lambda_min

    momentum: Optional[float] = None
    if mu > 0.0:
        root = math.sqrt(max(1.0 / (step * mu), 1.0))
        momentum = (root - 1.0) / (root + 1.0)
    recorder.trace.metadata.update(
        {"step_size": step, "agd_variant": "strongly_convex" if momentum is not None else "nesterov_schedule"}
    )

    previous = w.copy()
    for iteration in range(cfg.stop.max_iters):
        if recorder.should_stop():
            break

        beta = momentum if momentum is not None else iteration / (iteration + 3.0)
        extrapolated = w + beta * (w - previous)
        try:
            previous, w = w, extrapolated - step * problem.gradient(extrapolated)
            recorder.record(w)
        except NumericalError as error:
            raise OptimizerError(f"Accelerated step failed: {error}", recorder.trace)

        if recorder.is_diverging():
            raise DivergenceError("Accelerated gradient descent diverged", recorder.trace)

    return w, recorder.trace


class GdOptimizer(Optimizer):
    """Gradient descent baseline."""

    def __init__(self, options: Dict[str, Any]) -> None:
        super().__init__(options)
        self.config = BaselineConfig.from_dict({**options, "method": "gd"})

    def run(
        self, problem: GlmProblem, w0: np.ndarray, seed: int, w_star: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, RunTrace]:
        return gd_run(problem, w0, replace(self.config, seed=seed), w_star)


class AgdOptimizer(Optimizer):
    """Accelerated gradient descent baseline."""

    def __init__(self, options: Dict[str, Any]) -> None:
        super().__init__(options)
        self.config = BaselineConfig.from_dict({**options, "method": "agd"})

    def run(
        self, problem: GlmProblem, w0: np.ndarray, seed: int, w_star: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, RunTrace]:
        return agd_run(problem, w0, replace(self.config, seed=seed), w_star)
