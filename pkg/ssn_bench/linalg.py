"""Dense linear-algebra kernels and sketching transforms shared by the other modules."""
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse

# Relative tolerance for treating a symmetric matrix as positive semi-definite.
TOL_PSD = 1e-10
# Relative pivot size below which a triangular factor is treated as singular.
RANK_TOL = 1e-12
# Curvature below -CURVATURE_TOL * |d|^2 means the CG operator is not PSD.
CURVATURE_TOL = 1e-14

Operator = Callable[[np.ndarray], np.ndarray]


class NumericalError(RuntimeError):
    """Base class for numerical failures of the kernels."""


class SingularMatrixError(NumericalError):
    """Error raised when a factorization meets a (numerically) singular matrix."""


class IndefiniteMatrixError(NumericalError):
    """Error raised when a matrix expected to be positive (semi-)definite is not."""


class NonPsdOperatorError(NumericalError):
    """Error raised when conjugate gradient observes negative curvature."""


class DimensionMismatchError(ValueError):
    """Error raised when operand shapes are incompatible."""


class CgResult(NamedTuple):
    """Outcome of a conjugate gradient solve."""

    x: np.ndarray
    iters: int
    achieved_residual: float


class SparseEmbedding:
    """Sparse subspace embedding with exactly one signed nonzero per input row.

    Row `j` of the input is added, with sign `sign_map[j]`, to row `column_map[j]` of the output.
    """

    def __init__(self, target_rows: int, column_map: np.ndarray, sign_map: np.ndarray, seed: Optional[int]) -> None:
        column_map = np.asarray(column_map, dtype=np.int64)
        sign_map = np.asarray(sign_map, dtype=np.float64)
        if target_rows < 1:
            raise DimensionMismatchError(f"Sketch must have at least one row, got {target_rows}")
        if column_map.shape != sign_map.shape or column_map.ndim != 1:
            raise DimensionMismatchError("Column and sign maps must be vectors of equal length")
        if column_map.size and (column_map.min() < 0 or column_map.max() >= target_rows):
            raise DimensionMismatchError(f"Column map points outside of {target_rows} target rows")
        if not np.all(np.abs(sign_map) == 1.0):
            raise DimensionMismatchError("Signs must be +1 or -1")

        self.target_rows = target_rows
        self.column_map = column_map
        self.sign_map = sign_map
        self.seed = seed

    @staticmethod
    def create(input_rows: int, target_rows: int, seed: int) -> "SparseEmbedding":
        """Draws a random embedding of `input_rows` rows into `target_rows` rows."""
        rng = np.random.default_rng(seed)
        column_map = rng.integers(0, target_rows, size=input_rows)
        sign_map = rng.choice(np.array([-1.0, 1.0]), size=input_rows)
        return SparseEmbedding(target_rows, column_map, sign_map, seed)

    @staticmethod
    def identity(rows: int) -> "SparseEmbedding":
        """Embedding that leaves its input untouched."""
        return SparseEmbedding(rows, np.arange(rows), np.ones(rows), None)

    @property
    def input_rows(self) -> int:
        """Number of rows the embedding accepts."""
        return int(self.column_map.size)

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        """Returns the embedding as a `target_rows x input_rows` sparse matrix."""
        return scipy.sparse.csr_matrix(
            (self.sign_map, (self.column_map, np.arange(self.input_rows))), shape=(self.target_rows, self.input_rows)
        )


def qr_thin(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization of a tall full-column-rank matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise DimensionMismatchError(f"QR expects a tall matrix, got shape {m.shape}")

    q_factor, r_factor = scipy.linalg.qr(m, mode="economic")
    scale = np.linalg.norm(m, "fro")
    if scale == 0.0 or np.any(np.abs(np.diag(r_factor)) < RANK_TOL * scale):
        raise SingularMatrixError(f"Matrix of shape {m.shape} is rank deficient")

    return q_factor, r_factor


def cholesky_solve(m: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solves `m x = b` for a symmetric positive definite `m`."""
    m = np.asarray(m, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != b.shape[0]:
        raise DimensionMismatchError(f"Cannot solve system with matrix {m.shape} and right-hand side {b.shape}")

    try:
        factor = scipy.linalg.cho_factor(m, lower=True, check_finite=True)
    except np.linalg.LinAlgError as error:
        raise IndefiniteMatrixError(f"Matrix is not positive definite: {error}")

    return scipy.linalg.cho_solve(factor, b)


def conjugate_gradient(
    apply_m: Operator,
    b: np.ndarray,
    rel_residual_tol: float,
    max_iters: int,
    callback: Optional[Callable[[np.ndarray], None]] = None,
) -> CgResult:
    """Solves `M x = b` for a symmetric PSD operator, stopping on relative residual.

    `callback` is invoked with the current iterate after every iteration.
    """
    b = np.asarray(b, dtype=np.float64)
    b_norm = float(np.linalg.norm(b))
    x = np.zeros_like(b)
    if b_norm == 0.0:
        return CgResult(x, 0, 0.0)

    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    residual = 1.0
    for iteration in range(1, max_iters + 1):
        mp = apply_m(p)
        curvature = float(p @ mp)
        direction_sq = float(p @ p)
        if curvature < -CURVATURE_TOL * direction_sq:
            raise NonPsdOperatorError(f"Negative curvature {curvature:.3e} at CG iteration {iteration}")
        if curvature <= 0.0:
            # Direction in the null space: no further progress is possible.
            return CgResult(x, iteration - 1, residual)

        alpha = rs / curvature
        x += alpha * p
        r -= alpha * mp
        rs_next = float(r @ r)
        residual = np.sqrt(rs_next) / b_norm
        if callback is not None:
            callback(x)
        if residual <= rel_residual_tol:
            return CgResult(x, iteration, residual)

        p = r + (rs_next / rs) * p
        rs = rs_next

    return CgResult(x, max_iters, residual)


def gradient_descent_quadratic(apply_m: Operator, b: np.ndarray, step: float, max_iters: int) -> CgResult:
    """Fixed-step gradient descent on `x^T M x / 2 - b^T x`, started at zero."""
    b = np.asarray(b, dtype=np.float64)
    b_norm = float(np.linalg.norm(b))
    x = np.zeros_like(b)
    if b_norm == 0.0:
        return CgResult(x, 0, 0.0)

    for _ in range(max_iters):
        x -= step * (apply_m(x) - b)

    residual = float(np.linalg.norm(apply_m(x) - b)) / b_norm
    return CgResult(x, max_iters, residual)


def apply_sparse_embedding(embedding: SparseEmbedding, m: np.ndarray) -> np.ndarray:
    """Computes `Pi M` in one pass over the rows of `M`."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != embedding.input_rows:
        raise DimensionMismatchError(
            f"Embedding expects {embedding.input_rows} rows, matrix has shape {m.shape}"
        )
    return np.asarray(embedding.to_sparse() @ m)


def symmetric_eig_extremes(m: np.ndarray) -> Tuple[float, float]:
    """Returns the smallest and the largest eigenvalue of a symmetric matrix."""
    eigenvalues = symmetric_eigenvalues(m)
    return float(eigenvalues[0]), float(eigenvalues[-1])


def symmetric_eigenvalues(m: np.ndarray) -> np.ndarray:
    """All eigenvalues of a symmetric matrix in ascending order."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"Expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalError("Matrix has non-finite entries")
    return scipy.linalg.eigvalsh(m)


def spectral_norm_symmetric(m: np.ndarray) -> float:
    """Spectral norm of a symmetric matrix."""
    lambda_min, lambda_max = symmetric_eig_extremes(m)
    return max(abs(lambda_min), abs(lambda_max))


def scalar_identity_factor(m: np.ndarray) -> Optional[float]:
    """Returns `c` if `m` is exactly `c * I`, otherwise None."""
    diagonal = np.diag(m)
    if np.all(diagonal == diagonal[0]) and np.count_nonzero(m - np.diag(diagonal)) == 0:
        return float(diagonal[0])
    return None


def check_psd(m: np.ndarray) -> np.ndarray:
    """Validates a PSD matrix and returns its exactly symmetric version."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"Expected a square matrix, got shape {m.shape}")
    symmetric = (m + m.T) / 2.0
    if scalar_identity_factor(symmetric) is not None:
        if symmetric[0, 0] < 0.0:
            raise IndefiniteMatrixError(f"Scaled identity with negative factor {symmetric[0, 0]}")
        return symmetric

    lambda_min, lambda_max = symmetric_eig_extremes(symmetric)
    if lambda_min < -TOL_PSD * max(lambda_max, 0.0):
        raise IndefiniteMatrixError(f"Smallest eigenvalue {lambda_min:.3e} is below the PSD tolerance")
    return symmetric


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix; eigenvalues within tolerance of zero are clamped."""
    m = check_psd(m)
    factor = scalar_identity_factor(m)
    if factor is not None:
        return np.sqrt(factor) * np.eye(m.shape[0])

    eigenvalues, eigenvectors = scipy.linalg.eigh(m)
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return (eigenvectors * roots) @ eigenvectors.T
