"""`optimizers` module contains the sub-sampled Newton method and the reference optimizers."""
from typing import Dict, Type

from .optimizer import (
    BaselineConfig,
    DivergenceError,
    Optimizer,
    OptimizerError,
    StepSizeError,
    StopRule,
)
from .first_order import AgdOptimizer, GdOptimizer, agd_run, gd_run
from .lbfgs import LbfgsOptimizer, lbfgs_run, two_loop_direction
from .newton import NewtonOptimizer, newton_run, solve_reference
from .ssn import SsnConfig, SsnOptimizer, SsnStep, resolve_budget, ssn_run

OPTIMIZERS: Dict[str, Type[Optimizer]] = {
    "ssn": SsnOptimizer,
    "newton": NewtonOptimizer,
    "lbfgs": LbfgsOptimizer,
    "gd": GdOptimizer,
    "agd": AgdOptimizer,
}
