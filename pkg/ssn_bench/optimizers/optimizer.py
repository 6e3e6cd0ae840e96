"""Module with the Optimizer base class and the configuration shared by the baselines."""
import abc
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..glm import GlmProblem
from ..trace import RunTrace, TraceRecorder

BASELINE_METHODS = ["newton", "lbfgs", "gd", "agd"]
INNER_SOLVERS = ["direct", "cg"]
STEP_RULES = ["fixed", "backtracking"]


class OptimizerError(RuntimeError):
    """Error raised when a run fails; carries the trace recorded so far."""

    def __init__(self, message: str, trace: Optional[RunTrace] = None) -> None:
        super().__init__(message)
        self.trace = trace if trace is not None else RunTrace()


class DivergenceError(OptimizerError):
    """Error raised when the error metric keeps growing far beyond its initial value."""


class StepSizeError(OptimizerError):
    """Error raised when a step size keeps increasing the objective or no step satisfies the line search."""


@dataclass(frozen=True)
class StopRule:
    """Iteration cap and stopping thresholds of a run."""

    max_iters: int = 100
    stop_rel_error: Optional[float] = None
    stop_grad_norm: Optional[float] = None

    @staticmethod
    def from_dict(data: Dict[str, Any], max_iters_key: str = "max_iters") -> "StopRule":
        """Parses the stopping keys of a method section."""
        rule = StopRule(
            max_iters=int(data.get(max_iters_key, 100)),
            stop_rel_error=_optional_float(data.get("stop_rel_error")),
            stop_grad_norm=_optional_float(data.get("stop_grad_norm")),
        )
        if rule.max_iters < 0:
            raise ValueError(f"'{max_iters_key}' must be non-negative, got {rule.max_iters}")
        return rule

    def recorder(self, problem: GlmProblem, w_star: Optional[np.ndarray]) -> TraceRecorder:
        """Creates the recorder applying this rule."""
        return TraceRecorder(problem, w_star, self.stop_rel_error, self.stop_grad_norm)


def _optional_float(value: Any) -> Optional[float]:
    return None if value is None else float(value)


# pylint: disable=too-many-instance-attributes
@dataclass(frozen=True)
class BaselineConfig:
    """Settings of the reference optimizers.

    `step_size` and `strong_convexity` default to curvature estimates at the starting point.
    `backtracking_alpha` defaults to 0.3 for gradient descent and to the Armijo constant 1e-4 for L-BFGS.
    """

    method: str
    inner_solver: str = "direct"
    inner_tol: float = 1e-12
    lbfgs_history: int = 50
    step_rule: str = "fixed"
    step_size: Optional[float] = None
    strong_convexity: Optional[float] = None
    backtracking_alpha: Optional[float] = None
    backtracking_beta: float = 0.5
    stop: StopRule = StopRule()
    seed: int = 0

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "BaselineConfig":
        """Parses and validates a method section."""
        method = data.get("method")
        if method not in BASELINE_METHODS:
            raise ValueError(f"Incorrect method '{method}'. Available baselines are: {BASELINE_METHODS}")

        default_rule = "backtracking" if method == "lbfgs" else "fixed"
        config = BaselineConfig(
            method=method,
            inner_solver=data.get("inner_solver", "direct"),
            inner_tol=float(data.get("inner_tol", 1e-12)),
            lbfgs_history=int(data.get("lbfgs_history", 50)),
            step_rule=data.get("step_rule", default_rule),
            step_size=_optional_float(data.get("step_size")),
            strong_convexity=_optional_float(data.get("strong_convexity")),
            backtracking_alpha=_optional_float(data.get("backtracking_alpha")),
            backtracking_beta=float(data.get("backtracking_beta", 0.5)),
            stop=StopRule.from_dict(data),
            seed=int(data.get("seed", 0)),
        )
        config.validate()
        return config

    def validate(self) -> None:
        """Checks the invariants of the configuration."""
        if self.inner_solver not in INNER_SOLVERS:
            raise ValueError(f"Incorrect inner solver '{self.inner_solver}'. Available solvers are: {INNER_SOLVERS}")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"Incorrect step rule '{self.step_rule}'. Available rules are: {STEP_RULES}")
        if self.method == "lbfgs" and self.lbfgs_history < 1:
            raise ValueError(f"L-BFGS history must be at least 1, got {self.lbfgs_history}")
        if self.method == "agd" and self.step_rule != "fixed":
            raise ValueError("Accelerated gradient descent supports the fixed step rule only")
        if self.step_size is not None and self.step_size <= 0.0:
            raise ValueError(f"Step size must be positive, got {self.step_size}")
        if not 0.0 < self.backtracking_beta < 1.0:
            raise ValueError(f"Backtracking shrink factor must lie in (0, 1), got {self.backtracking_beta}")
        if self.backtracking_alpha is not None and not 0.0 < self.backtracking_alpha < 0.5:
            raise ValueError(f"Sufficient decrease constant must lie in (0, 1/2), got {self.backtracking_alpha}")

    def armijo_constant(self) -> float:
        """Sufficient decrease constant of the line search."""
        if self.backtracking_alpha is not None:
            return self.backtracking_alpha
        return 1e-4 if self.method == "lbfgs" else 0.3


class Optimizer(metaclass=abc.ABCMeta):
    """Interface for the optimizers a benchmark can run.

    Plugins subclass it and are constructed with the options of their method section.
    """

    def __init__(self, options: Dict[str, Any]) -> None:
        self.options = dict(options)

    @abc.abstractmethod
    def run(
        self, problem: GlmProblem, w0: np.ndarray, seed: int, w_star: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, RunTrace]:
        """Minimizes `problem` from `w0`, returning the final iterate and the trace."""

    def describe(self) -> Dict[str, Any]:
        """Settings echoed into run metadata."""
        return dict(self.options)
