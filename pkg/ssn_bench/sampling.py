"""Sampling distributions over Hessian blocks, sampling-size bounds and block sampling."""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .glm import BlockedMatrix
from .linalg import (
    RANK_TOL,
    SingularMatrixError,
    SparseEmbedding,
    apply_sparse_embedding,
    psd_sqrt,
    qr_thin,
)

SCHEMES = ["uniform", "block_norm_squares", "block_partial_leverage"]

# Default sketch size of the fast leverage scores, in multiples of d.
SKETCH_FACTOR = 20
BETA_SAFETY = 2.0
MAX_RESAMPLES = 10
# Tolerance on the probabilities summing to one.
PROBABILITY_TOL = 1e-10

logger = logging.getLogger(__name__)


class DegenerateInputError(ValueError):
    """Error raised when a distribution cannot be built, e.g. for an all-zero matrix."""


class EmptySampleError(RuntimeError):
    """Error raised when a draw keeps no block at all."""


@dataclass(frozen=True)
class SamplingPlan:
    """Per-block probabilities `p` and inclusion probabilities `q = min(s p, 1)`."""

    scheme: str
    p: np.ndarray
    q: np.ndarray
    budget_s: int
    seed: int

    @staticmethod
    def from_probabilities(scheme: str, p: np.ndarray, budget_s: int, seed: int) -> "SamplingPlan":
        """Validates `p` and derives the inclusion probabilities."""
        if scheme not in SCHEMES:
            raise ValueError(f"Incorrect scheme '{scheme}'. Available schemes are: {SCHEMES}")
        if budget_s < 1:
            raise ValueError(f"Sampling budget must be at least 1, got {budget_s}")

        p = np.asarray(p, dtype=np.float64)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0.0) or not np.all(np.isfinite(p)):
            raise DegenerateInputError("Probabilities must be a non-empty vector of non-negative numbers")
        if abs(float(np.sum(p)) - 1.0) > PROBABILITY_TOL:
            raise DegenerateInputError(f"Probabilities sum to {float(np.sum(p))!r}, expected 1")

        q = np.minimum(budget_s * p, 1.0)
        return SamplingPlan(scheme=scheme, p=p, q=q, budget_s=int(budget_s), seed=int(seed))

    @property
    def block_count(self) -> int:
        """Number of blocks `n`."""
        return int(self.p.size)

    def expected_kept(self) -> float:
        """Expected number of kept blocks, `sum q_i <= s`."""
        return float(np.sum(self.q))


@dataclass(frozen=True)
class BlockSample:
    """Kept blocks (0-based, ascending) with their rescaling factors `1 / sqrt(q_i)`."""

    kept_indices: np.ndarray
    scale_factors: np.ndarray

    @property
    def kept_count(self) -> int:
        """Number of kept blocks."""
        return int(self.kept_indices.size)


@dataclass(frozen=True)
class LeverageScores:
    """Block partial leverage scores, exact or sketched."""

    tau: np.ndarray
    is_approximate: bool = False
    beta_bound: float = 1.0
    sketch_rows: Optional[int] = None

    def total(self) -> float:
        """Sum of the scores."""
        return float(np.sum(self.tau))


def derive_seed(seed: int, *keys: int) -> int:
    """Derives an independent 63-bit seed from `seed` and integer keys."""
    state = np.random.SeedSequence([int(seed), *[int(key) for key in keys]]).generate_state(1, dtype=np.uint64)
    return int(state[0] >> np.uint64(1))


def uniform_distribution(block_count: int) -> np.ndarray:
    """`p_i = 1 / n`."""
    if block_count < 1:
        raise DegenerateInputError("Cannot sample from zero blocks")
    return np.full(block_count, 1.0 / block_count)


def block_norm_squares_distribution(a: BlockedMatrix) -> np.ndarray:
    """`p_i = |A_i|_F^2 / |A|_F^2`."""
    norms = a.block_frobenius_sq()
    total = float(np.sum(norms))
    if total == 0.0:
        raise DegenerateInputError("Block norm squares are undefined for an all-zero matrix")
    return norms / total


def leverage_distribution(scores: LeverageScores) -> np.ndarray:
    """`p_i = tau_i / sum_j tau_j`."""
    total = scores.total()
    if total <= 0.0:
        raise DegenerateInputError("All leverage scores are zero")
    return scores.tau / total


def augmented_matrix(a: BlockedMatrix, q: np.ndarray) -> np.ndarray:
    """Stacks `A` over `Q^{1/2}`."""
    return np.vstack([a.entries, psd_sqrt(q)])


def row_leverage_scores(m: np.ndarray) -> np.ndarray:
    """Row leverage scores of `m` with pseudo-inverse semantics.

    Rank is decided by a column-pivoted QR, so rank-deficient inputs are handled.
    """
    q_factor, r_factor, _ = scipy.linalg.qr(m, mode="economic", pivoting=True)
    pivots = np.abs(np.diag(r_factor))
    if pivots.size == 0 or pivots[0] == 0.0:
        return np.zeros(m.shape[0])
    rank = int(np.count_nonzero(pivots > RANK_TOL * pivots[0]))
    return np.sum(q_factor[:, :rank] ** 2, axis=1)


def _sum_per_block(a: BlockedMatrix, row_scores: np.ndarray) -> np.ndarray:
    return row_scores[: a.entries.shape[0]].reshape(a.block_count, a.block_rows).sum(axis=1)


def exact_block_partial_leverage_scores(a: BlockedMatrix, q: np.ndarray) -> LeverageScores:
    """Leverage scores of the rows of `[A; Q^{1/2}]`, summed over the rows of each block of `A`."""
    row_scores = row_leverage_scores(augmented_matrix(a, q))
    return LeverageScores(tau=_sum_per_block(a, row_scores), is_approximate=False, beta_bound=1.0)


# pylint: disable=too-many-arguments
def fast_block_partial_leverage_scores(
    a: BlockedMatrix,
    q: np.ndarray,
    sketch_rows: Optional[int] = None,
    seed: int = 0,
    beta_safety: float = BETA_SAFETY,
    embedding: Optional[SparseEmbedding] = None,
) -> LeverageScores:
    """Approximate scores from `R` of a sparse sketch of `[A; Q^{1/2}]`.

    Row scores are `|a_j^T R^{-1}|^2`, inflated by `beta_safety` so they overestimate the exact ones
    with high probability. A singular sketch is redrawn once with a derived seed. An explicit
    `embedding` replaces the random one and is never redrawn.
    """
    abar = augmented_matrix(a, q)
    if embedding is not None:
        sketch_rows = embedding.target_rows
    elif sketch_rows is None:
        sketch_rows = SKETCH_FACTOR * a.cols
    if sketch_rows < a.cols:
        raise ValueError(f"Sketch needs at least d = {a.cols} rows, got {sketch_rows}")
    if beta_safety < 1.0:
        raise ValueError(f"Safety factor must be at least 1, got {beta_safety}")

    seeds = [seed] if embedding is not None else [seed, derive_seed(seed, 1)]
    r_factor = None
    for attempt_seed in seeds:
        current = embedding or SparseEmbedding.create(abar.shape[0], sketch_rows, attempt_seed)
        try:
            _, r_factor = qr_thin(apply_sparse_embedding(current, abar))
            break
        except SingularMatrixError:
            logger.warning("Sketch with seed %d is singular", attempt_seed)

    if r_factor is None:
        raise SingularMatrixError(f"Sketch of the augmented matrix stayed singular after {len(seeds)} attempt(s)")

    whitened = scipy.linalg.solve_triangular(r_factor, abar.T, trans="T", lower=False)
    row_scores = beta_safety * np.sum(whitened ** 2, axis=0)

    distortion = math.sqrt(a.cols / sketch_rows)
    beta_bound = beta_safety ** 2 * (1.0 + distortion) / (1.0 - distortion) if distortion < 1.0 else math.inf
    return LeverageScores(
        tau=_sum_per_block(a, row_scores), is_approximate=True, beta_bound=beta_bound, sketch_rows=sketch_rows
    )


def coherence(scores: LeverageScores) -> float:
    """Largest block score; close to one when a single block dominates a direction."""
    return float(np.max(scores.tau))


def stable_rank(a: BlockedMatrix) -> float:
    """`|A|_F^2 / |A|_2^2`."""
    frobenius_sq = float(np.sum(a.entries ** 2))
    if frobenius_sq == 0.0:
        raise DegenerateInputError("Stable rank is undefined for an all-zero matrix")
    return frobenius_sq / float(np.linalg.norm(a.entries, 2)) ** 2


def _check_accuracy(eps: float, delta: float) -> None:
    if not 0.0 < eps < 1.0:
        raise ValueError(f"Accuracy eps must lie in (0, 1), got {eps}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"Failure probability delta must lie in (0, 1), got {delta}")


def sampling_size_leverage_raw(sum_tau: float, d: int, eps: float, delta: float) -> float:
    """`4 sum_tau log(4d / delta) / eps^2`."""
    _check_accuracy(eps, delta)
    if sum_tau <= 0.0:
        raise ValueError(f"Sum of leverage scores must be positive, got {sum_tau}")
    return 4.0 * sum_tau * math.log(4.0 * d / delta) / eps ** 2


def sampling_size_leverage(sum_tau: float, d: int, eps: float, delta: float) -> int:
    """Number of blocks sufficient for the two-sided spectral condition under leverage sampling."""
    return int(math.ceil(sampling_size_leverage_raw(sum_tau, d, eps, delta)))


def sampling_size_block_norms_raw(sr_a: float, d: int, eps: float, delta: float) -> float:
    """`4 sr log(min(4 sr, d) / delta) / eps^2`."""
    _check_accuracy(eps, delta)
    if sr_a < 1.0 - 1e-9:
        raise ValueError(f"Stable rank is at least 1, got {sr_a}")
    return 4.0 * sr_a * math.log(min(4.0 * sr_a, d) / delta) / eps ** 2


def sampling_size_block_norms(sr_a: float, d: int, eps: float, delta: float) -> int:
    """Number of blocks sufficient for the relative spectral-norm condition under block norm sampling."""
    return int(math.ceil(sampling_size_block_norms_raw(sr_a, d, eps, delta)))


def sampling_size_uniform_raw(a: BlockedMatrix, d: int, eps: float, delta: float) -> float:
    """`4 n max_i |A_i|^2 / |A|^2 log(d / delta) / eps^2` with spectral norms."""
    _check_accuracy(eps, delta)
    total = float(np.linalg.norm(a.entries, 2)) ** 2
    if total == 0.0:
        raise DegenerateInputError("Uniform sampling size is undefined for an all-zero matrix")
    ratio = float(np.max(a.block_spectral_sq())) / total
    return 4.0 * a.block_count * ratio * math.log(d / delta) / eps ** 2


def sampling_size_uniform(a: BlockedMatrix, d: int, eps: float, delta: float) -> int:
    """Number of blocks sufficient under uniform sampling; grows like n for coherent matrices."""
    return int(math.ceil(sampling_size_uniform_raw(a, d, eps, delta)))


# pylint: disable=too-many-arguments
def scheme_sampling_size(
    scheme: str,
    a: BlockedMatrix,
    q: np.ndarray,
    eps: float,
    delta: float,
    scores: Optional[LeverageScores] = None,
) -> int:
    """Sampling size of `scheme` at accuracy `eps` and failure probability `delta`."""
    if scheme == "block_partial_leverage":
        scores = scores or exact_block_partial_leverage_scores(a, q)
        return sampling_size_leverage(scores.total(), a.cols, eps, delta)
    if scheme == "block_norm_squares":
        return sampling_size_block_norms(stable_rank(a), a.cols, eps, delta)
    if scheme == "uniform":
        return sampling_size_uniform(a, a.cols, eps, delta)

    raise ValueError(f"Incorrect scheme '{scheme}'. Available schemes are: {SCHEMES}")


# pylint: disable=too-many-arguments
def build_plan(
    scheme: str,
    a: BlockedMatrix,
    q: np.ndarray,
    budget_s: int,
    seed: int,
    scores: Optional[LeverageScores] = None,
) -> SamplingPlan:
    """Builds the plan of `scheme` for the current factor `a`.

    Leverage plans use `scores` when given, otherwise exact scores.
    """
    if scheme == "uniform":
        p = uniform_distribution(a.block_count)
    elif scheme == "block_norm_squares":
        p = block_norm_squares_distribution(a)
    elif scheme == "block_partial_leverage":
        p = leverage_distribution(scores or exact_block_partial_leverage_scores(a, q))
    else:
        raise ValueError(f"Incorrect scheme '{scheme}'. Available schemes are: {SCHEMES}")

    return SamplingPlan.from_probabilities(scheme, p, budget_s, seed)


def inclusion_mask(plan: SamplingPlan, attempt: int = 0) -> np.ndarray:
    """Independent Bernoulli(q_i) inclusion of every block."""
    rng = np.random.default_rng([plan.seed, attempt])
    return rng.random(plan.block_count) < plan.q


def draw_block_sample(plan: SamplingPlan, attempt: int = 0) -> BlockSample:
    """Keeps every block independently with probability `q_i` and scale `1 / sqrt(q_i)`."""
    kept = np.flatnonzero(inclusion_mask(plan, attempt))
    if kept.size == 0:
        raise EmptySampleError(f"No block kept with seed {plan.seed}, attempt {attempt}")
    return BlockSample(kept_indices=kept, scale_factors=1.0 / np.sqrt(plan.q[kept]))


def draw_nonempty_sample(plan: SamplingPlan, max_attempts: int = MAX_RESAMPLES) -> BlockSample:
    """Redraws empty samples with fresh derived randomness, at most `max_attempts` times."""
    for attempt in range(max_attempts):
        try:
            return draw_block_sample(plan, attempt)
        except EmptySampleError:
            logger.warning("Empty block sample (seed %d, attempt %d), resampling", plan.seed, attempt)

    raise EmptySampleError(
        f"No block kept in {max_attempts} draws; the budget {plan.budget_s} is too small for {plan.block_count} blocks"
    )
