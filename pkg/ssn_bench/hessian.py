"""Sub-sampled Hessians and the Newton subproblem solvers."""
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .glm import BlockedMatrix
from .linalg import (
    Operator,
    cholesky_solve,
    conjugate_gradient,
    gradient_descent_quadratic,
    symmetric_eig_extremes,
)
from .sampling import BlockSample

SOLVERS = ["direct", "cg", "gd", "auto"]
MODES = ["materialize", "operator"]


@dataclass(frozen=True)
class SolveStats:
    """Outcome of one subproblem solve."""

    solver: str
    iters: int
    residual: float


class SubsampledHessian:
    """`sum_{i kept} A_i^T A_i / q_i + Q` for one drawn sample."""

    @staticmethod
    def full(a: BlockedMatrix, q: np.ndarray) -> "SubsampledHessian":
        """Every block kept with scale one, i.e. the exact Hessian."""
        sample = BlockSample(kept_indices=np.arange(a.block_count), scale_factors=np.ones(a.block_count))
        return SubsampledHessian(sample, a, q)

    def __init__(self, sample: BlockSample, a: BlockedMatrix, q: np.ndarray) -> None:
        if sample.kept_count == 0:
            raise ValueError("Sub-sampled Hessian needs at least one kept block")
        self.sample = sample
        self.a = a
        self.q = q
        self._rows = a.select(sample.kept_indices, sample.scale_factors)

    @property
    def dim(self) -> int:
        """Dimension `d`."""
        return self.a.cols

    @property
    def kept_rows(self) -> int:
        """Number of rows over all kept blocks."""
        return self._rows.shape[0]

    def materialize(self) -> np.ndarray:
        """Dense `d x d` matrix."""
        return self._rows.T @ self._rows + self.q

    def operator(self) -> Operator:
        """Matrix-vector product without forming the matrix."""
        rows = self._rows
        q = self.q

        def apply(v: np.ndarray) -> np.ndarray:
            return rows.T @ (rows @ v) + q @ v

        return apply

    def assemble_or_apply(self, mode: str) -> Union[np.ndarray, Operator]:
        """Returns the materialized matrix or the operator."""
        if mode == "materialize":
            return self.materialize()
        if mode == "operator":
            return self.operator()

        raise ValueError(f"Incorrect mode '{mode}'. Available modes are: {MODES}")


def resolve_solver(solver: str, h: SubsampledHessian) -> str:
    """`auto` picks CG when the kept rows outnumber the columns, the direct solver otherwise."""
    if solver not in SOLVERS:
        raise ValueError(f"Incorrect solver '{solver}'. Available solvers are: {SOLVERS}")
    if solver != "auto":
        return solver
    return "cg" if h.kept_rows > h.dim else "direct"


def solve_subproblem(
    h: SubsampledHessian, g: np.ndarray, solver: str = "auto", tol: float = 1e-6, max_iters: Optional[int] = None
) -> Tuple[np.ndarray, SolveStats]:
    """Approximately solves `H v = -g`.

    `direct` factorizes `H`, `cg` stops on relative residual `tol`, `gd` takes `max_iters` steps
    of size `1 / lambda_max(H)`.
    """
    solver = resolve_solver(solver, h)
    rhs = -np.asarray(g, dtype=np.float64)
    if max_iters is None:
        max_iters = 10 * h.dim

    if solver == "direct":
        matrix = h.materialize()
        v = cholesky_solve(matrix, rhs)
        rhs_norm = float(np.linalg.norm(rhs))
        residual = float(np.linalg.norm(matrix @ v - rhs)) / rhs_norm if rhs_norm > 0.0 else 0.0
        return v, SolveStats(solver, 1, residual)

    if solver == "cg":
        result = conjugate_gradient(h.operator(), rhs, tol, max_iters)
        return result.x, SolveStats(solver, result.iters, result.achieved_residual)

    _, lambda_max = symmetric_eig_extremes(h.materialize())
    result = gradient_descent_quadratic(h.operator(), rhs, 1.0 / lambda_max, max_iters)
    return result.x, SolveStats(solver, result.iters, result.achieved_residual)
