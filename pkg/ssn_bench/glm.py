"""Generalized linear model problems with ridge penalty and their Hessian factorizations."""
import logging
from typing import List, Tuple

import numpy as np
from scipy.special import expit

from .linalg import DimensionMismatchError, NumericalError, check_psd

LOSSES = ["logistic", "squared"]

logger = logging.getLogger(__name__)


class ProblemError(ValueError):
    """Error raised when a problem is constructed from invalid data."""


def psi_derivatives(u: np.ndarray, y: np.ndarray, loss_kind: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns the loss value and its first and second derivatives with respect to `u`.

    Logistic: psi(u, y) = log(1 + exp(-u y)).
    Squared:  psi(u, y) = (u - y)^2 / 2.
    """
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    if loss_kind == "logistic":
        margin = u * y
        value = np.logaddexp(0.0, -margin)
        first = -y * expit(-margin)
        second = expit(margin) * expit(-margin)
        return value, first, second

    if loss_kind == "squared":
        residual = u - y
        return 0.5 * residual ** 2, residual, np.ones_like(residual)

    raise ProblemError(f"Unknown loss '{loss_kind}'. Available losses are: {LOSSES}")


class BlockedMatrix:
    """Augmented matrix made of `block_count` row blocks with `block_rows` rows each.

    Block `i` (0-based) occupies rows `k*i ... k*(i+1) - 1` of `entries`.
    """

    def __init__(self, entries: np.ndarray, block_rows: int = 1) -> None:
        entries = np.asarray(entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] < 1 or entries.shape[1] < 1:
            raise DimensionMismatchError(f"Blocked matrix needs a non-empty 2-d array, got shape {entries.shape}")
        if block_rows < 1 or entries.shape[0] % block_rows != 0:
            raise DimensionMismatchError(f"{entries.shape[0]} rows cannot be split into blocks of {block_rows}")

        self.entries = entries
        self.block_rows = block_rows

    @property
    def block_count(self) -> int:
        """Number of blocks `n`."""
        return self.entries.shape[0] // self.block_rows

    @property
    def cols(self) -> int:
        """Number of columns `d`."""
        return self.entries.shape[1]

    def blocks(self) -> np.ndarray:
        """View of the entries as an `n x k x d` array."""
        return self.entries.reshape(self.block_count, self.block_rows, self.cols)

    def block(self, index: int) -> np.ndarray:
        """Returns the `k x d` block with the given 0-based index."""
        return self.blocks()[index]

    def block_frobenius_sq(self) -> np.ndarray:
        """Squared Frobenius norm of every block."""
        return np.einsum("ij,ij->i", self.entries, self.entries).reshape(self.block_count, self.block_rows).sum(axis=1)

    def block_spectral_sq(self) -> np.ndarray:
        """Squared spectral norm of every block."""
        if self.block_rows == 1:
            return self.block_frobenius_sq()
        return np.linalg.svd(self.blocks(), compute_uv=False)[:, 0] ** 2

    def block_gram(self, index: int) -> np.ndarray:
        """Returns `A_i^T A_i` for the given block."""
        block = self.block(index)
        return block.T @ block

    def gram(self) -> np.ndarray:
        """Returns `A^T A`."""
        return self.entries.T @ self.entries

    def select(self, indices: np.ndarray, scales: np.ndarray) -> np.ndarray:
        """Rows of the selected blocks, each block multiplied by its scale."""
        rows = self.blocks()[indices] * np.asarray(scales, dtype=np.float64)[:, None, None]
        return rows.reshape(-1, self.cols)


class HessianFactorization:
    """Factorization `H(w) = A(w)^T A(w) + Q`."""

    def __init__(self, a: BlockedMatrix, q: np.ndarray) -> None:
        if q.shape != (a.cols, a.cols):
            raise DimensionMismatchError(f"Regularizer shape {q.shape} does not match {a.cols} columns")
        self.a = a
        self.q = check_psd(q)

    def hessian(self) -> np.ndarray:
        """Materializes the exact Hessian."""
        return self.a.gram() + self.q


class GlmProblem:
    """Problem `F(w) = sum_i psi(x_i^T w, y_i) + lambda |w|^2`.

    The ridge term follows the experimental convention `lambda |w|^2`, so the regularizer
    contributes `Q = 2 lambda I` to the Hessian.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray, lam: float, loss_kind: str = "logistic") -> None:
        x = np.array(x, dtype=np.float64)
        y = np.array(y, dtype=np.float64).ravel()
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ProblemError(f"Data matrix must be a non-empty 2-d array, got shape {x.shape}")
        if y.shape[0] != x.shape[0]:
            raise ProblemError(f"Got {y.shape[0]} labels for {x.shape[0]} data points")
        if lam < 0:
            raise ProblemError(f"Ridge parameter must be non-negative, got {lam}")
        if loss_kind not in LOSSES:
            raise ProblemError(f"Unknown loss '{loss_kind}'. Available losses are: {LOSSES}")
        if loss_kind == "logistic" and not np.all(np.abs(y) == 1.0):
            raise ProblemError("Logistic labels must be -1 or +1")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ProblemError("Data contains non-finite values")

        self.x = x
        self.y = y
        self.lam = float(lam)
        self.loss_kind = loss_kind
        # Shared by concurrent runs.
        self.x.setflags(write=False)
        self.y.setflags(write=False)

    @property
    def n(self) -> int:
        """Number of data points."""
        return self.x.shape[0]

    @property
    def d(self) -> int:
        """Number of features."""
        return self.x.shape[1]

    def with_lambda(self, lam: float) -> "GlmProblem":
        """Same data and loss with another ridge parameter."""
        return GlmProblem(self.x, self.y, lam, self.loss_kind)

    def _check_point(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.d,):
            raise DimensionMismatchError(f"Point has shape {w.shape}, expected ({self.d},)")
        return w

    def objective(self, w: np.ndarray) -> float:
        """Evaluates `F(w)`."""
        w = self._check_point(w)
        value, _, _ = psi_derivatives(self.x @ w, self.y, self.loss_kind)
        result = float(np.sum(value)) + self.lam * float(w @ w)
        if not np.isfinite(result):
            raise NumericalError("Objective overflowed")
        return result

    def gradient(self, w: np.ndarray) -> np.ndarray:
        """Evaluates `sum_i psi'(x_i^T w, y_i) x_i + 2 lambda w`."""
        w = self._check_point(w)
        _, first, _ = psi_derivatives(self.x @ w, self.y, self.loss_kind)
        return self.x.T @ first + 2.0 * self.lam * w

    def regularizer_hessian(self) -> np.ndarray:
        """Returns `Q = 2 lambda I`."""
        return 2.0 * self.lam * np.eye(self.d)

    def hessian_factorization(self, w: np.ndarray) -> HessianFactorization:
        """Builds `A(w) = D(w) X` with `D_ii = sqrt(psi''(x_i^T w, y_i))` and block size one."""
        w = self._check_point(w)
        _, _, second = psi_derivatives(self.x @ w, self.y, self.loss_kind)
        a = BlockedMatrix(np.sqrt(second)[:, None] * self.x, block_rows=1)
        return HessianFactorization(a, self.regularizer_hessian())

    def hessian(self, w: np.ndarray) -> np.ndarray:
        """Materializes the exact Hessian at `w`."""
        w = self._check_point(w)
        _, _, second = psi_derivatives(self.x @ w, self.y, self.loss_kind)
        return (self.x.T * second) @ self.x + self.regularizer_hessian()


def preprocess(
    x: np.ndarray, normalize_columns: bool = True, add_intercept: bool = True
) -> Tuple[np.ndarray, List[int]]:
    """Scales nonzero columns to unit norm and appends an all-ones column.

    Returns the processed matrix and the indices of zero columns left unscaled.
    """
    x = np.array(x, dtype=np.float64)
    if x.ndim != 2 or x.size == 0:
        raise ProblemError(f"Cannot preprocess an empty matrix of shape {x.shape}")

    skipped: List[int] = []
    if normalize_columns:
        norms = np.linalg.norm(x, axis=0)
        skipped = [int(index) for index in np.flatnonzero(norms == 0.0)]
        if skipped:
            logger.warning("Columns %s are zero and were left unscaled", skipped)
        norms[norms == 0.0] = 1.0
        x /= norms

    if add_intercept:
        x = np.hstack([x, np.ones((x.shape[0], 1))])

    return x, skipped
