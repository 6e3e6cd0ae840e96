"""Exact Newton method, also used to compute reference solutions."""
import logging
from dataclasses import replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..glm import GlmProblem
from ..hessian import SubsampledHessian, solve_subproblem
from ..linalg import NumericalError
from ..trace import RunTrace
from .optimizer import BaselineConfig, DivergenceError, Optimizer, OptimizerError, StopRule

REFERENCE_TOL = 1e-12
REFERENCE_MAX_ITERS = 50

logger = logging.getLogger(__name__)


def newton_run(
    problem: GlmProblem, w0: np.ndarray, cfg: BaselineConfig, w_star: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, RunTrace]:
    """Unit-step Newton iteration `w <- w - H(w)^{-1} g(w)` with the exact Hessian `A^T A + Q`."""
    recorder = cfg.stop.recorder(problem, w_star)
    w = np.array(w0, dtype=np.float64)
    recorder.record(w)

    for _ in range(cfg.stop.max_iters):
        if recorder.should_stop():
            break

        try:
            factorization = problem.hessian_factorization(w)
            hessian = SubsampledHessian.full(factorization.a, factorization.q)
            step, stats = solve_subproblem(hessian, problem.gradient(w), cfg.inner_solver, cfg.inner_tol)
            w = w + step
            recorder.record(w, factorization.a.block_count, stats.iters, stats.residual)
        except NumericalError as error:
            raise OptimizerError(f"Newton step failed: {error}", recorder.trace)

        if recorder.is_diverging():
            raise DivergenceError("Newton iteration diverged", recorder.trace)

    return w, recorder.trace


def solve_reference(
    problem: GlmProblem, tol: float = REFERENCE_TOL, max_iters: int = REFERENCE_MAX_ITERS
) -> Tuple[np.ndarray, RunTrace]:
    """Runs Newton from zero until `|g| <= tol`; warns when the tolerance is out of reach."""
    cfg = BaselineConfig(method="newton", stop=StopRule(max_iters=max_iters, stop_grad_norm=tol))
    w_star, trace = newton_run(problem, np.zeros(problem.d), cfg)
    if trace.last.grad_norm > tol:
        logger.warning(
            "Reference solution reached gradient norm %.3e after %d iterations, above the tolerance %.1e",
            trace.last.grad_norm,
            len(trace) - 1,
            tol,
        )
    return w_star, trace


class NewtonOptimizer(Optimizer):
    """Exact Newton with a direct or CG inner solve."""

    def __init__(self, options: Dict[str, Any]) -> None:
        super().__init__(options)
        self.config = BaselineConfig.from_dict({**options, "method": "newton"})

    def run(
        self, problem: GlmProblem, w0: np.ndarray, seed: int, w_star: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, RunTrace]:
        return newton_run(problem, w0, replace(self.config, seed=seed), w_star)
