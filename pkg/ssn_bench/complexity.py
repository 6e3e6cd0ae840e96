"""Cost model of one sub-sampled Newton iteration and the solver error factors."""
import math

from .hessian import SOLVERS
from .sampling import SCHEMES


def solver_error_factor(solver: str, kappa_tilde: float, tol: float) -> float:
    """Relative solution error a solver reaches on `H~ v = -g`.

    Direct solves are exact, CG at relative residual `tol` is within `sqrt(kappa~) tol`,
    gradient descent is charged `tol`.
    """
    if solver == "direct":
        return 0.0
    if solver == "cg":
        return math.sqrt(kappa_tilde) * tol
    if solver == "gd":
        return tol

    raise ValueError(f"Incorrect solver '{solver}'. Available solvers are: {SOLVERS[:-1]}")


def construction_cost(scheme: str, nnz: int, n: int) -> float:
    """Work to build the sampling distribution."""
    if scheme == "block_partial_leverage":
        return nnz * math.log(max(n, 2))
    if scheme == "block_norm_squares":
        return float(nnz)
    if scheme == "uniform":
        return 1.0

    raise ValueError(f"Incorrect scheme '{scheme}'. Available schemes are: {SCHEMES}")


# pylint: disable=too-many-arguments
def solve_cost(solver: str, s: int, d: int, kappa_tilde: float, tol: float) -> float:
    """Work to solve the subproblem built from `s` sampled rows."""
    if solver == "direct":
        return float(s * d * d)
    if solver == "cg":
        return s * d * math.sqrt(kappa_tilde) * math.log(1.0 / tol)
    if solver == "gd":
        return s * d * kappa_tilde * math.log(1.0 / tol)

    raise ValueError(f"Incorrect solver '{solver}'. Available solvers are: {SOLVERS[:-1]}")


# pylint: disable=too-many-arguments
def per_iteration_cost(
    scheme: str, solver: str, nnz: int, n: int, s: int, d: int, kappa_tilde: float, tol: float
) -> float:
    """Gradient (one pass over the data), distribution and solve work of one iteration."""
    return float(nnz) + construction_cost(scheme, nnz, n) + solve_cost(solver, s, d, kappa_tilde, tol)
