"""Armijo backtracking line search."""
from typing import Tuple

import numpy as np

from ..glm import GlmProblem
from ..linalg import NumericalError
from ..trace import RunTrace
from .optimizer import StepSizeError

MAX_SHRINKS = 60


# pylint: disable=too-many-arguments
def backtracking(
    problem: GlmProblem,
    w: np.ndarray,
    objective: float,
    gradient: np.ndarray,
    direction: np.ndarray,
    initial_step: float,
    alpha: float,
    beta: float,
    trace: RunTrace,
) -> Tuple[float, np.ndarray, float]:
    """Shrinks the step by `beta` until `F(w + t d) <= F(w) + alpha t g^T d`.

    Returns the accepted step, the new point and its objective.
    """
    slope = float(gradient @ direction)
    step = initial_step
    for _ in range(MAX_SHRINKS):
        candidate = w + step * direction
        try:
            value = problem.objective(candidate)
        except NumericalError:
            step *= beta
            continue
        if value <= objective + alpha * step * slope:
            return step, candidate, value
        step *= beta

    raise StepSizeError(f"No step satisfied the sufficient decrease condition after {MAX_SHRINKS} shrinks", trace)
