"""Sub-sampled Newton method with non-uniform block sampling."""
import logging
import re
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np

from ..glm import GlmProblem, HessianFactorization
from ..hessian import SOLVERS, SolveStats, SubsampledHessian, solve_subproblem
from ..linalg import NumericalError
from ..sampling import (
    BETA_SAFETY,
    SCHEMES,
    SKETCH_FACTOR,
    EmptySampleError,
    LeverageScores,
    SamplingPlan,
    build_plan,
    derive_seed,
    draw_nonempty_sample,
    exact_block_partial_leverage_scores,
    fast_block_partial_leverage_scores,
    scheme_sampling_size,
)
from ..trace import RunTrace
from .optimizer import DivergenceError, Optimizer, OptimizerError, StopRule

LEVERAGE_MODES = ["exact", "fast"]

Budget = Union[int, str]

_PER_D_BUDGET = re.compile(r"^\s*(\d+)\s*d\s*$")

logger = logging.getLogger(__name__)


def resolve_budget(budget: Budget, d: int) -> Optional[int]:
    """Number of blocks for an explicit or `<k>d` budget; None for `auto`."""
    if isinstance(budget, bool):
        raise ValueError(f"Incorrect budget {budget!r}")
    if isinstance(budget, int):
        if budget < 1:
            raise ValueError(f"Sampling budget must be at least 1, got {budget}")
        return budget
    if budget == "auto":
        return None

    match = _PER_D_BUDGET.match(str(budget))
    if match is None or int(match.group(1)) < 1:
        raise ValueError(f"Incorrect budget '{budget}'. Use a positive integer, 'auto' or '<k>d'")
    return int(match.group(1)) * d


# pylint: disable=too-many-instance-attributes
@dataclass(frozen=True)
class SsnConfig:
    """Settings of one sub-sampled Newton run.

    `budget` is a block count, `"auto"` (the sampling size of the scheme at `eps` and `delta`)
    or `"<k>d"`. Leverage scores are recomputed every `leverage_recompute_period` iterations.
    """

    scheme: str = "block_partial_leverage"
    budget: Budget = "20d"
    eps: float = 0.5
    delta: float = 0.1
    solver: str = "auto"
    solver_tol: float = 1e-6
    max_solver_iters: Optional[int] = None
    leverage_recompute_period: int = 10
    leverage_mode: str = "exact"
    sketch_rows: Optional[int] = None
    beta_safety: float = BETA_SAFETY
    stop: StopRule = StopRule()
    seed: int = 0

    @staticmethod
    def from_dict(data: Dict[str, Any]) -> "SsnConfig":
        """Parses and validates a method section."""
        budget = data.get("budget", "20d")
        config = SsnConfig(
            scheme=data.get("scheme", "block_partial_leverage"),
            budget=budget if isinstance(budget, int) else str(budget),
            eps=float(data.get("eps", 0.5)),
            delta=float(data.get("delta", 0.1)),
            solver=data.get("solver", "auto"),
            solver_tol=float(data.get("solver_tol", 1e-6)),
            max_solver_iters=None if data.get("max_solver_iters") is None else int(data["max_solver_iters"]),
            leverage_recompute_period=int(data.get("leverage_recompute_period", 10)),
            leverage_mode=data.get("leverage_mode", "exact"),
            sketch_rows=None if data.get("sketch_rows") is None else int(data["sketch_rows"]),
            beta_safety=float(data.get("beta_safety", BETA_SAFETY)),
            stop=StopRule.from_dict(data, max_iters_key="max_outer_iters"),
            seed=int(data.get("seed", 0)),
        )
        config.validate()
        return config

    def validate(self) -> None:
        """Checks the invariants of the configuration."""
        if self.scheme not in SCHEMES:
            raise ValueError(f"Incorrect scheme '{self.scheme}'. Available schemes are: {SCHEMES}")
        if self.solver not in SOLVERS:
            raise ValueError(f"Incorrect solver '{self.solver}'. Available solvers are: {SOLVERS}")
        if self.leverage_mode not in LEVERAGE_MODES:
            raise ValueError(f"Incorrect leverage mode '{self.leverage_mode}'. Available modes are: {LEVERAGE_MODES}")
        if self.leverage_recompute_period < 1:
            raise ValueError(f"Recompute period must be at least 1, got {self.leverage_recompute_period}")
        if self.solver_tol <= 0.0:
            raise ValueError(f"Solver tolerance must be positive, got {self.solver_tol}")
        resolve_budget(self.budget, 1)

    def to_dict(self) -> Dict[str, Any]:
        """Settings as a method section."""
        return {
            "method": "ssn",
            "scheme": self.scheme,
            "budget": self.budget,
            "eps": self.eps,
            "delta": self.delta,
            "solver": self.solver,
            "solver_tol": self.solver_tol,
            "max_solver_iters": self.max_solver_iters,
            "leverage_recompute_period": self.leverage_recompute_period,
            "leverage_mode": self.leverage_mode,
            "sketch_rows": self.sketch_rows,
            "beta_safety": self.beta_safety,
            "max_outer_iters": self.stop.max_iters,
            "stop_rel_error": self.stop.stop_rel_error,
            "stop_grad_norm": self.stop.stop_grad_norm,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SsnStep:
    """Everything one iteration used, handed to observers before the update is applied."""

    iteration: int
    w: np.ndarray
    factorization: HessianFactorization
    plan: SamplingPlan
    hessian: SubsampledHessian
    gradient: np.ndarray
    direction: np.ndarray
    stats: SolveStats


Observer = Callable[[SsnStep], None]


def _leverage_scores(
    factorization: HessianFactorization, cfg: SsnConfig, iteration: int
) -> LeverageScores:
    if cfg.leverage_mode == "fast":
        return fast_block_partial_leverage_scores(
            factorization.a,
            factorization.q,
            sketch_rows=cfg.sketch_rows or SKETCH_FACTOR * factorization.a.cols,
            seed=derive_seed(cfg.seed, iteration, 1),
            beta_safety=cfg.beta_safety,
        )
    return exact_block_partial_leverage_scores(factorization.a, factorization.q)


def ssn_run(
    problem: GlmProblem,
    w0: np.ndarray,
    cfg: SsnConfig,
    w_star: Optional[np.ndarray] = None,
    observer: Optional[Observer] = None,
) -> Tuple[np.ndarray, RunTrace]:
    """Unit-step iteration `w <- w + v` with `v` approximately solving `H~ v = -g`.

    `H~` is rebuilt every iteration from a fresh Bernoulli sample of the blocks of `A(w)`.
    """
    recorder = cfg.stop.recorder(problem, w_star)
    recorder.trace.metadata.update({"scheme": cfg.scheme, "leverage_mode": cfg.leverage_mode})
    w = np.array(w0, dtype=np.float64)
    recorder.record(w)

    scores: Optional[LeverageScores] = None
    for iteration in range(cfg.stop.max_iters):
        if recorder.should_stop():
            break

        try:
            factorization = problem.hessian_factorization(w)
            if cfg.scheme == "block_partial_leverage" and iteration % cfg.leverage_recompute_period == 0:
                scores = _leverage_scores(factorization, cfg, iteration)

            budget = resolve_budget(cfg.budget, problem.d)
            if budget is None:
                budget = scheme_sampling_size(cfg.scheme, factorization.a, factorization.q, cfg.eps, cfg.delta, scores)
            plan = build_plan(
                cfg.scheme, factorization.a, factorization.q, budget, derive_seed(cfg.seed, iteration), scores
            )
            sample = draw_nonempty_sample(plan)
            hessian = SubsampledHessian(sample, factorization.a, factorization.q)
            gradient = problem.gradient(w)
            direction, stats = solve_subproblem(hessian, gradient, cfg.solver, cfg.solver_tol, cfg.max_solver_iters)
        except (NumericalError, EmptySampleError) as error:
            raise OptimizerError(f"Sub-sampled Newton iteration {iteration} failed: {error}", recorder.trace)

        if observer is not None:
            observer(SsnStep(iteration, w, factorization, plan, hessian, gradient, direction, stats))

        w = w + direction
        try:
            recorder.record(w, sample.kept_count, stats.iters, stats.residual)
        except NumericalError as error:
            raise OptimizerError(f"Sub-sampled Newton iterate {iteration + 1} is not finite: {error}", recorder.trace)
        if recorder.is_diverging():
            raise DivergenceError("Sub-sampled Newton iteration diverged", recorder.trace)

    return w, recorder.trace


class SsnOptimizer(Optimizer):
    """Sub-sampled Newton method; `observer` is called on every iteration when set."""

    def __init__(self, options: Dict[str, Any]) -> None:
        super().__init__(options)
        self.config = SsnConfig.from_dict(options)
        self.observer: Optional[Observer] = None

    def run(
        self, problem: GlmProblem, w0: np.ndarray, seed: int, w_star: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, RunTrace]:
        return ssn_run(problem, w0, replace(self.config, seed=seed), w_star, self.observer)

    def describe(self) -> Dict[str, Any]:
        return self.config.to_dict()
