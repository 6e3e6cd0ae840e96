"""Limited-memory BFGS with the two-loop recursion."""
from collections import deque
from dataclasses import replace
from typing import Any, Deque, Dict, Optional, Tuple

import numpy as np

from ..glm import GlmProblem
from ..linalg import NumericalError
from ..trace import RunTrace
from .line_search import backtracking
from .optimizer import BaselineConfig, DivergenceError, Optimizer, OptimizerError

# Pairs with s^T y below this fraction of |s| |y| are not stored.
CURVATURE_PAIR_TOL = 1e-10

Pair = Tuple[np.ndarray, np.ndarray, float]


def two_loop_direction(gradient: np.ndarray, memory: Deque[Pair]) -> np.ndarray:
    """Returns `-H_k g` for the inverse Hessian approximation built from `memory`.

    `memory` holds `(s, y, 1 / s^T y)` from the oldest to the newest pair.
    """
    q = gradient.copy()
    alphas = []
    for s, y, rho in reversed(memory):
        alpha = rho * float(s @ q)
        q -= alpha * y
        alphas.append(alpha)

    if memory:
        s, y, _ = memory[-1]
        q *= float(s @ y) / float(y @ y)

    for (s, y, rho), alpha in zip(memory, reversed(alphas)):
        beta = rho * float(y @ q)
        q += (alpha - beta) * s

    return -q


def lbfgs_run(
    problem: GlmProblem, w0: np.ndarray, cfg: BaselineConfig, w_star: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, RunTrace]:
    """L-BFGS with history `cfg.lbfgs_history` and a unit initial step.

    A direction that is not a descent direction resets the memory and falls back to `-g`.
    """
    if cfg.lbfgs_history < 1:
        raise ValueError(f"L-BFGS history must be at least 1, got {cfg.lbfgs_history}")

    recorder = cfg.stop.recorder(problem, w_star)
    memory: Deque[Pair] = deque(maxlen=cfg.lbfgs_history)
    w = np.array(w0, dtype=np.float64)
    recorder.record(w)
    objective = problem.objective(w)
    gradient = problem.gradient(w)
    alpha = cfg.armijo_constant()

    for _ in range(cfg.stop.max_iters):
        if recorder.should_stop():
            break

        direction = two_loop_direction(gradient, memory)
        if float(gradient @ direction) >= 0.0:
            memory.clear()
            direction = -gradient

        try:
            if cfg.step_rule == "backtracking":
                _, w_next, objective = backtracking(
                    problem, w, objective, gradient, direction, 1.0, alpha, cfg.backtracking_beta, recorder.trace
                )
            else:
                w_next = w + (cfg.step_size or 1.0) * direction
                objective = problem.objective(w_next)
            gradient_next = problem.gradient(w_next)
        except NumericalError as error:
            raise OptimizerError(f"L-BFGS step failed: {error}", recorder.trace)

        s = w_next - w
        y = gradient_next - gradient
        curvature = float(s @ y)
        if curvature > CURVATURE_PAIR_TOL * float(np.linalg.norm(s) * np.linalg.norm(y)):
            memory.append((s, y, 1.0 / curvature))

        w, gradient = w_next, gradient_next
        recorder.record(w)
        if recorder.is_diverging():
            raise DivergenceError("L-BFGS diverged", recorder.trace)

    return w, recorder.trace


class LbfgsOptimizer(Optimizer):
    """L-BFGS baseline."""

    def __init__(self, options: Dict[str, Any]) -> None:
        super().__init__(options)
        self.config = BaselineConfig.from_dict({**options, "method": "lbfgs"})

    def run(
        self, problem: GlmProblem, w0: np.ndarray, seed: int, w_star: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, RunTrace]:
        return lbfgs_run(problem, w0, replace(self.config, seed=seed), w_star)

    def describe(self) -> Dict[str, Any]:
        return {**self.options, "lbfgs_history": self.config.lbfgs_history}
