"""Main module of the benchmark harness."""
import csv
import functools
import json
import logging
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .configuration import ConfigurationError, ExperimentConfig, MethodSpec, ProblemSource
from .datasets import Dataset, generate, load_dataset
from .diagnostics import ConditionNumbers, IterationDiagnostics, condition_numbers_from_factor
from .glm import GlmProblem, ProblemError, preprocess
from .linalg import NumericalError
from .optimizers import (
    BaselineConfig,
    DivergenceError,
    OptimizerError,
    SsnOptimizer,
    StopRule,
    newton_run,
    solve_reference,
)
from .optimizers.ssn import Budget
from .run_state import RunState
from .run_status import RunStatus
from .trace import RunTrace

SWEEP_HEADER = ["method", "seed", "budget", "time_to_third_s", "iters_to_third"]
LAMBDA_SWEEP_HEADER = [
    "lambda",
    "method",
    "kappa",
    "kappa_hat",
    "kappa_bar",
    "best_budget",
    "time_to_target_s",
    "newton_time_s",
]

# Relative error the lambda sweep times every method to.
TARGET_REL_ERROR = 1e-8
# Budget reported when no budget of the grid reaches the target, with the time of full Newton.
NEWTON_FALLBACK = "newton"
NEWTON_MAX_ITERS = 100

logger = logging.getLogger(__name__)


@dataclass
class CellResult:
    """Outcome of one (method, seed) cell."""

    method: str
    seed: int
    status: RunStatus
    description: str
    trace: RunTrace = field(default_factory=RunTrace)
    w: Optional[np.ndarray] = None

    def summary(self) -> Dict[str, Any]:
        """Final values of the trace."""
        last = self.trace.last if self.trace.records else None
        return {
            "method": self.method,
            "seed": self.seed,
            "status": str(self.status),
            "description": self.description,
            "iterations": len(self.trace) - 1 if self.trace.records else 0,
            "final_objective": None if last is None else last.objective,
            "final_grad_norm": None if last is None else last.grad_norm,
            "final_rel_err": None if last is None else last.rel_err,
            "time_s": None if last is None else last.time_s,
        }


@dataclass(frozen=True)
class SweepRow:
    """Time and iterations a budget needed to reach `F(w) <= F(w0) / 3`."""

    method: str
    seed: int
    budget: str
    time_to_third_s: Optional[float]
    iters_to_third: Optional[int]

    def to_row(self) -> List[str]:
        """CSV fields; unreached targets are empty."""
        return [
            self.method,
            str(self.seed),
            self.budget,
            "" if self.time_to_third_s is None else repr(self.time_to_third_s),
            "" if self.iters_to_third is None else str(self.iters_to_third),
        ]


@dataclass(frozen=True)
class LambdaRow:
    """Condition numbers at `w*` for one ridge parameter and the budget timing best for one method."""

    lam: float
    method: str
    numbers: ConditionNumbers
    best_budget: str
    time_to_target_s: Optional[float]
    newton_time_s: Optional[float]

    def to_row(self) -> List[str]:
        """CSV fields; unreached targets are empty."""
        return [
            repr(self.lam),
            self.method,
            repr(self.numbers.kappa),
            repr(self.numbers.kappa_hat),
            repr(self.numbers.kappa_bar),
            self.best_budget,
            "" if self.time_to_target_s is None else repr(self.time_to_target_s),
            "" if self.newton_time_s is None else repr(self.newton_time_s),
        ]


def build_problem(source: ProblemSource, lam: float) -> Tuple[GlmProblem, Dataset]:
    """Loads or generates the data and wraps it in a problem.

    Dataset files are preprocessed as configured; synthetic data is used as drawn.
    """
    if source.synthetic is not None:
        dataset = generate(source.synthetic)
    else:
        assert source.dataset is not None
        options = source.dataset.loader_options(binary=source.loss == "logistic")
        dataset = load_dataset(source.dataset.path, source.dataset.data_format, **options)
        x, _ = preprocess(dataset.x, source.dataset.normalize_columns, source.dataset.add_intercept)
        dataset.x = x

    try:
        return GlmProblem(dataset.x, dataset.y, lam, source.loss), dataset
    except ProblemError as error:
        raise ConfigurationError(f"Problem from {dataset.source} is invalid: {error}")


def load_reference(path: str, d: int) -> np.ndarray:
    """Reads `w*` from a JSON list or a whitespace separated text file."""
    if path.endswith(".json"):
        with open(path, "r") as reference_file:
            w_star = np.asarray(json.load(reference_file), dtype=np.float64)
    else:
        w_star = np.loadtxt(path, dtype=np.float64, ndmin=1)

    if w_star.shape != (d,):
        raise ConfigurationError(f"Reference solution in {path} has shape {w_star.shape}, expected ({d},)")
    return w_star


def first_third(trace: RunTrace) -> Tuple[Optional[float], Optional[int]]:
    """Time and iteration of the first record with `F(w) <= F(w0) / 3`."""
    if not trace.records:
        return None, None
    target = trace.records[0].objective / 3.0
    for record in trace.records:
        if record.objective <= target:
            return record.time_s, record.iteration
    return None, None


def time_to_target(trace: RunTrace, target: float) -> Optional[float]:
    """Time of the first record with relative error at most `target`."""
    for record in trace.records:
        if record.rel_err is not None and record.rel_err <= target:
            return record.time_s
    return None


def _to_json(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path: str, data: Any) -> None:
    """Writes `data` as indented JSON, converting numpy values."""
    with open(path, "w") as json_file:
        json.dump(data, json_file, indent=2, default=_to_json)


def write_csv(path: str, header: List[str], rows: List[List[str]]) -> None:
    """Writes `rows` below `header`."""
    with open(path, "w", newline="") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(header)
        writer.writerows(rows)


class ExperimentLauncher:
    """ExperimentLauncher runs every (method, seed) cell of an experiment config
    from `w0 = 0` and writes per-cell traces, metadata and a final manifest."""

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self.run_state = RunState()

        self.problem: Optional[GlmProblem] = None
        self.dataset: Optional[Dataset] = None
        self.w_star: Optional[np.ndarray] = None
        self.condition_numbers: Dict[str, ConditionNumbers] = dict()

        self._results: Dict[Tuple[str, int], CellResult] = dict()

    def __enter__(self) -> "ExperimentLauncher":
        self.initialize()

        return self

    def __exit__(self, exc_type: Optional[type], exc_value: Optional[Any], exc_traceback: Optional[object]) -> None:
        self.deinitialize()

    @property
    def output_dir(self) -> str:
        """Directory of all emitted files."""
        return self.config.outputs.directory

    def initialize(self) -> None:
        """Builds the problem, obtains the reference solution and prepares the output directory."""
        self.problem, self.dataset = build_problem(self.config.problem, self.config.lam)
        logger.info("Problem %s: n=%d, d=%d", self.dataset.source, self.problem.n, self.problem.d)

        reference = self.config.reference
        if reference.kind == "compute_via_newton":
            self.w_star, _ = solve_reference(self.problem, tol=reference.tol)
        elif reference.kind == "load":
            assert reference.path is not None
            self.w_star = load_reference(reference.path, self.problem.d)

        w0 = np.zeros(self.problem.d)
        points = {"w0": w0} if self.w_star is None else {"w_star": self.w_star, "w0": w0}
        for name, point in points.items():
            factorization = self.problem.hessian_factorization(point)
            self.condition_numbers[name] = condition_numbers_from_factor(factorization.a, factorization.q)

        os.makedirs(self.output_dir, exist_ok=True)

    def deinitialize(self) -> None:
        """Writes the manifest of completed cells."""
        for name, seed in self.run_state.pending():
            logger.warning("Cell %s/%d did not complete", name, seed)
        if self._results:
            write_json(os.path.join(self.output_dir, "manifest.json"), self.manifest())

    def _problem(self) -> GlmProblem:
        if self.problem is None:
            raise RuntimeError("Launcher is not initialized")
        return self.problem

    def run_all(self) -> Dict[Tuple[str, int], CellResult]:
        """Runs all cells on `config.threads` workers; cells write their own files."""
        cells = [(name, seed) for name in self.config.methods for seed in self.config.seeds]
        for name, seed in cells:
            self.run_state.add_pending(name, seed)

        with ThreadPoolExecutor(max_workers=self.config.threads) as executor:
            results = list(executor.map(lambda cell: self.run_cell(*cell), cells))

        for result in results:
            self._results[(result.method, result.seed)] = result
        return dict(self._results)

    def run_cell(self, name: str, seed: int) -> CellResult:
        """Runs one method with one seed and writes its outputs."""
        problem = self._problem()
        method = self.config.methods[name]
        optimizer = method.create()
        observer: Optional[IterationDiagnostics] = None
        if self.config.diagnostics and isinstance(optimizer, SsnOptimizer):
            observer = IterationDiagnostics(optimizer.config.solver_tol)
            optimizer.observer = observer

        w: Optional[np.ndarray] = None
        try:
            w, trace = optimizer.run(problem, np.zeros(problem.d), seed, self.w_star)
            result = CellResult(name, seed, RunStatus.Success, "success", trace, w)
        except DivergenceError as error:
            result = CellResult(name, seed, RunStatus.Diverged, str(error), error.trace)
        except OptimizerError as error:
            result = CellResult(name, seed, RunStatus.Fail, str(error), error.trace)
        except NumericalError as error:
            result = CellResult(name, seed, RunStatus.Fail, str(error))
        except (ValueError, RuntimeError) as error:
            logger.warning("Cell %s/%d raised %s: %s", name, seed, type(error).__name__, error)
            result = CellResult(name, seed, RunStatus.Fail, f"{type(error).__name__}: {error}")

        self._write_cell(method, result, optimizer.describe(), observer)
        self.run_state.complete(name, seed, result.status, result.description)
        logger.info("Cell %s/%d finished: %s", name, seed, result.status)
        return result

    def _write_cell(
        self,
        method: MethodSpec,
        result: CellResult,
        description: Dict[str, Any],
        observer: Optional[IterationDiagnostics],
    ) -> None:
        stem = os.path.join(self.output_dir, f"{result.method}_{result.seed}")
        if "csv" in self.config.outputs.formats:
            result.trace.to_csv(f"{stem}.csv")
        if "json" not in self.config.outputs.formats:
            return

        metadata: Dict[str, Any] = {
            **result.summary(),
            "method_options": method.to_dict(),
            "resolved_options": description,
            "config": self.config.to_dict(),
            "condition_numbers": {name: numbers.to_dict() for name, numbers in self.condition_numbers.items()},
            "label_mapping": self.dataset.label_mapping if self.dataset is not None else {},
            "run": dict(result.trace.metadata),
        }
        if observer is not None:
            metadata["diagnostics"] = observer.records
            cost = observer.estimated_cost()
            metadata["estimated_cost"] = cost if math.isfinite(cost) else "inf"
        write_json(f"{stem}.json", metadata)

    def manifest(self) -> Dict[str, Any]:
        """Cells and their per-method aggregate over seeds."""
        cells = [result.summary() for _, result in sorted(self._results.items())]
        summary: Dict[str, Any] = dict()
        for name in self.config.methods:
            results = [result for (method, _), result in sorted(self._results.items()) if method == name]
            summary[name] = _aggregate(results)

        return {"config": self.config.to_dict(), "cells": cells, "summary": summary}

    def _ssn_methods(self) -> List[str]:
        optimizers = ExperimentConfig.optimizers()
        names = [
            name for name, method in self.config.methods.items() if issubclass(optimizers[method.method], SsnOptimizer)
        ]
        if not names:
            raise ConfigurationError("Sweep needs at least one sub-sampled Newton method")
        return names

    def sweep(self) -> List[SweepRow]:
        """Runs every SSN method with each budget of the sweep grid and writes `sweep.csv`."""
        problem = self._problem()
        jobs: List[Tuple[str, int, Budget]] = [
            (name, seed, budget)
            for name in self._ssn_methods()
            for seed in self.config.seeds
            for budget in self.config.sweep_grid
        ]

        def run_job(job: Tuple[str, int, Budget]) -> SweepRow:
            name, seed, budget = job
            method = self.config.methods[name]
            optimizer = MethodSpec(name, method.method, {**method.options, "budget": budget}).create()
            try:
                _, trace = optimizer.run(problem, np.zeros(problem.d), seed, self.w_star)
            except OptimizerError as error:
                logger.warning("Sweep run %s/%d with budget %s failed: %s", name, seed, budget, error)
                trace = error.trace
            except (ValueError, RuntimeError) as error:
                logger.warning("Sweep run %s/%d with budget %s failed: %s", name, seed, budget, error)
                trace = RunTrace()
            time_to_third, iters_to_third = first_third(trace)
            return SweepRow(name, seed, str(budget), time_to_third, iters_to_third)

        with ThreadPoolExecutor(max_workers=self.config.threads) as executor:
            rows = list(executor.map(run_job, jobs))

        write_csv(os.path.join(self.output_dir, "sweep.csv"), SWEEP_HEADER, [row.to_row() for row in rows])

        return rows

    def lambda_sweep(self) -> List[LambdaRow]:
        """Repeats the budget sweep for every ridge parameter of `config.lambda_grid()`.

        Each SSN method and budget runs with the first seed until the relative error drops to
        `TARGET_REL_ERROR`. The row of a method keeps the fastest budget; when no budget gets there
        the row falls back to full Newton. Writes `lambda_sweep.csv`.
        """
        base = self._problem()
        names = self._ssn_methods()
        seed = self.config.seeds[0]
        jobs = [(name, budget) for name in names for budget in self.config.sweep_grid]

        rows: List[LambdaRow] = []
        for lam in self.config.lambda_grid():
            problem = base.with_lambda(lam)
            w_star, _ = solve_reference(problem, tol=self.config.reference.tol)
            factorization = problem.hessian_factorization(w_star)
            numbers = condition_numbers_from_factor(factorization.a, factorization.q)
            newton_time = self._newton_time(problem, w_star)

            time_job = functools.partial(self._ssn_time, problem, w_star, seed)
            with ThreadPoolExecutor(max_workers=self.config.threads) as executor:
                times = list(executor.map(time_job, [job[0] for job in jobs], [job[1] for job in jobs]))

            for name in names:
                reached = [
                    (time_s, str(budget))
                    for (job_name, budget), time_s in zip(jobs, times)
                    if job_name == name and time_s is not None
                ]
                best_time, best_budget = min(reached) if reached else (newton_time, NEWTON_FALLBACK)
                logger.info("Lambda %g, method %s: best budget %s", lam, name, best_budget)
                rows.append(LambdaRow(lam, name, numbers, best_budget, best_time, newton_time))

        write_csv(
            os.path.join(self.output_dir, "lambda_sweep.csv"), LAMBDA_SWEEP_HEADER, [row.to_row() for row in rows]
        )
        return rows

    def _ssn_time(
        self, problem: GlmProblem, w_star: np.ndarray, seed: int, name: str, budget: Budget
    ) -> Optional[float]:
        method = self.config.methods[name]
        options = {**method.options, "budget": budget, "stop_rel_error": TARGET_REL_ERROR, "stop_grad_norm": 0.0}
        optimizer = MethodSpec(name, method.method, options).create()
        try:
            _, trace = optimizer.run(problem, np.zeros(problem.d), seed, w_star)
        except OptimizerError as error:
            logger.warning("Lambda %g run %s with budget %s failed: %s", problem.lam, name, budget, error)
            trace = error.trace
        except (ValueError, RuntimeError) as error:
            logger.warning("Lambda %g run %s with budget %s failed: %s", problem.lam, name, budget, error)
            return None
        return time_to_target(trace, TARGET_REL_ERROR)

    @staticmethod
    def _newton_time(problem: GlmProblem, w_star: np.ndarray) -> Optional[float]:
        stop = StopRule(max_iters=NEWTON_MAX_ITERS, stop_rel_error=TARGET_REL_ERROR, stop_grad_norm=0.0)
        try:
            _, trace = newton_run(problem, np.zeros(problem.d), BaselineConfig(method="newton", stop=stop), w_star)
        except OptimizerError as error:
            trace = error.trace
        return time_to_target(trace, TARGET_REL_ERROR)


def best_budgets(rows: List[SweepRow]) -> Dict[Tuple[str, int], SweepRow]:
    """Budget reaching the target fastest per (method, seed); cells that never reach it are left out."""
    best: Dict[Tuple[str, int], SweepRow] = dict()
    for row in rows:
        if row.time_to_third_s is None:
            continue
        current = best.get((row.method, row.seed))
        if current is None or row.time_to_third_s < (current.time_to_third_s or 0.0):
            best[(row.method, row.seed)] = row
    return best


def _aggregate(results: List[CellResult]) -> Dict[str, Any]:
    successful = [result for result in results if result.status]
    errors = [result.trace.last.rel_err for result in successful if result.trace.last.rel_err is not None]
    return {
        "seeds": len(results),
        "successful_seeds": len(successful),
        "mean_final_rel_err": statistics.mean(errors) if errors else None,
        "median_final_rel_err": statistics.median(errors) if errors else None,
        "mean_iterations": statistics.mean(len(result.trace) - 1 for result in successful) if successful else None,
        "mean_time_s": statistics.mean(result.trace.last.time_s for result in successful) if successful else None,
    }
