"""Per-iteration run traces and the recorder shared by all optimizers."""
import csv
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .glm import GlmProblem

CSV_HEADER = ["iter", "time_s", "objective", "grad_norm", "rel_err", "kept_blocks", "solver_iters", "solver_residual"]

# A run diverges when its error metric exceeds DIVERGENCE_FACTOR times the initial value
# for DIVERGENCE_PATIENCE consecutive iterations.
DIVERGENCE_FACTOR = 10.0
DIVERGENCE_PATIENCE = 5
# Default gradient stopping rule: |g| <= GRAD_STOP_FACTOR * (1 + |F(w0)|).
GRAD_STOP_FACTOR = 1e-10


@dataclass(frozen=True)
class TraceRecord:
    """State after iteration `iteration` (0 is the starting point)."""

    iteration: int
    time_s: float
    objective: float
    grad_norm: float
    rel_err: Optional[float]
    kept_blocks: int = 0
    solver_iters: int = 0
    solver_residual: float = 0.0

    def to_row(self) -> List[str]:
        """CSV fields in header order."""
        return [
            str(self.iteration),
            repr(self.time_s),
            repr(self.objective),
            repr(self.grad_norm),
            "" if self.rel_err is None else repr(self.rel_err),
            str(self.kept_blocks),
            str(self.solver_iters),
            repr(self.solver_residual),
        ]


@dataclass
class RunTrace:
    """Records of one run, the iterates they were taken at and free-form metadata."""

    records: List[TraceRecord] = field(default_factory=list)
    iterates: List[np.ndarray] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def last(self) -> TraceRecord:
        """Most recent record."""
        return self.records[-1]

    def errors(self) -> List[Optional[float]]:
        """Relative solution errors per record."""
        return [record.rel_err for record in self.records]

    def to_csv(self, path: str) -> None:
        """Writes the records with the fixed trace header."""
        with open(path, "w", newline="") as trace_file:
            writer = csv.writer(trace_file)
            writer.writerow(CSV_HEADER)
            for record in self.records:
                writer.writerow(record.to_row())


def relative_error(w: np.ndarray, w_star: np.ndarray) -> float:
    """`|w - w*| / |w*|`, or the absolute error when `w* = 0`."""
    scale = float(np.linalg.norm(w_star))
    error = float(np.linalg.norm(w - w_star))
    return error / scale if scale > 0.0 else error


class TraceRecorder:
    """Builds a `RunTrace` and evaluates the stopping and divergence rules.

    The clock is paused while a record is evaluated, so `time_s` only counts optimizer work.
    """

    def __init__(
        self,
        problem: GlmProblem,
        w_star: Optional[np.ndarray] = None,
        stop_rel_error: Optional[float] = None,
        stop_grad_norm: Optional[float] = None,
    ) -> None:
        self.problem = problem
        self.w_star = None if w_star is None else np.asarray(w_star, dtype=np.float64)
        self.stop_rel_error = stop_rel_error
        self.stop_grad_norm = stop_grad_norm
        self.trace = RunTrace()
        self._elapsed = 0.0
        self._resumed = time.perf_counter()
        self._diverging_for = 0

    def record(
        self, w: np.ndarray, kept_blocks: int = 0, solver_iters: int = 0, solver_residual: float = 0.0
    ) -> TraceRecord:
        """Appends the record of iterate `w`."""
        self._elapsed += time.perf_counter() - self._resumed

        objective = self.problem.objective(w)
        grad_norm = float(np.linalg.norm(self.problem.gradient(w)))
        rel_err = None if self.w_star is None else relative_error(w, self.w_star)
        if not self.trace.records and self.stop_grad_norm is None:
            self.stop_grad_norm = GRAD_STOP_FACTOR * (1.0 + abs(objective))

        record = TraceRecord(
            iteration=len(self.trace.records),
            time_s=self._elapsed,
            objective=objective,
            grad_norm=grad_norm,
            rel_err=rel_err,
            kept_blocks=kept_blocks,
            solver_iters=solver_iters,
            solver_residual=float(solver_residual),
        )
        self.trace.records.append(record)
        self.trace.iterates.append(np.array(w, dtype=np.float64))
        self._update_divergence()

        self._resumed = time.perf_counter()
        return record

    def _metric(self, record: TraceRecord) -> float:
        return record.grad_norm if record.rel_err is None else record.rel_err

    def _update_divergence(self) -> None:
        start = self._metric(self.trace.records[0])
        if start > 0.0 and self._metric(self.trace.last) > DIVERGENCE_FACTOR * start:
            self._diverging_for += 1
        else:
            self._diverging_for = 0

    def is_diverging(self) -> bool:
        """Whether the error stayed far above its initial value for too long."""
        return self._diverging_for >= DIVERGENCE_PATIENCE

    def should_stop(self) -> bool:
        """Whether the last record meets a stopping criterion."""
        last = self.trace.last
        if self.stop_grad_norm is not None and last.grad_norm <= self.stop_grad_norm:
            return True
        if self.stop_rel_error is not None and last.rel_err is not None and last.rel_err <= self.stop_rel_error:
            return True
        return False
