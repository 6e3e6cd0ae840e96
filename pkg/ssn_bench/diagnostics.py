"""Certification of the Hessian approximation conditions, condition numbers and error recursions."""
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from .complexity import per_iteration_cost, solver_error_factor
from .convergence import ConvergenceConstants
from .glm import BlockedMatrix, GlmProblem
from .hessian import SubsampledHessian
from .linalg import SingularMatrixError, qr_thin, spectral_norm_symmetric, symmetric_eig_extremes
from .optimizers.ssn import SsnStep
from .sampling import (
    BlockSample,
    EmptySampleError,
    LeverageScores,
    augmented_matrix,
    build_plan,
    draw_block_sample,
)
from .trace import RunTrace

# Eigenvalues below SINGULAR_TOL times the largest one count as zero.
SINGULAR_TOL = 1e-12
# Relative slack when comparing an observed error with its bound.
BOUND_SLACK = 1e-9
# Errors below FLOOR_FACTOR * (1 + |w*|) are at the accuracy of the reference itself.
FLOOR_FACTOR = 1e-12


class RankDeficientError(ValueError):
    """Error raised when `[A; Q^{1/2}]` has no full column rank; a positive ridge parameter fixes it."""


def _symmetric(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2.0


def measure_c1(h_exact: np.ndarray, h_tilde: np.ndarray) -> float:
    """`|H~ - H| / |H|` in the spectral norm."""
    if h_exact.shape != h_tilde.shape:
        raise ValueError(f"Hessians have different shapes {h_exact.shape} and {h_tilde.shape}")
    return spectral_norm_symmetric(_symmetric(h_tilde - h_exact)) / spectral_norm_symmetric(_symmetric(h_exact))


def whitening_factor(a: BlockedMatrix, q: np.ndarray) -> np.ndarray:
    """Triangular `R` with `R^T R = A^T A + Q`."""
    try:
        _, r_factor = qr_thin(augmented_matrix(a, q))
    except SingularMatrixError:
        raise RankDeficientError("Augmented matrix is rank deficient; use a positive ridge parameter")
    return r_factor


def _whitened_norm(r_factor: np.ndarray, difference: np.ndarray) -> float:
    left = scipy.linalg.solve_triangular(r_factor, difference, trans="T", lower=False)
    both = scipy.linalg.solve_triangular(r_factor, left.T, trans="T", lower=False)
    return spectral_norm_symmetric(_symmetric(both))


def measure_c2(
    a: BlockedMatrix,
    q: np.ndarray,
    sample: Optional[BlockSample] = None,
    h_tilde: Optional[np.ndarray] = None,
) -> float:
    """Smallest `eps` with `-eps H <= H~ - H <= eps H`, i.e. `|R^{-T} (H~ - H) R^{-1}|`.

    `H~` is either built from `sample` or passed directly.
    """
    if h_tilde is None:
        if sample is None:
            raise ValueError("Either a sample or a sub-sampled Hessian is required")
        h_tilde = SubsampledHessian(sample, a, q).materialize()
    return _whitened_norm(whitening_factor(a, q), h_tilde - (a.gram() + q))


@dataclass(frozen=True)
class ConditionReport:
    """Measured accuracies and the thresholds they were tested against."""

    eps_c1: float
    eps_c2: float
    holds_c1_at: Dict[float, bool] = field(default_factory=dict)
    holds_c2_at: Dict[float, bool] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-friendly form."""
        return {
            "eps_c1": self.eps_c1,
            "eps_c2": self.eps_c2,
            "holds_c1_at": {str(eps): holds for eps, holds in self.holds_c1_at.items()},
            "holds_c2_at": {str(eps): holds for eps, holds in self.holds_c2_at.items()},
        }


class ConditionCertifier:
    """Measures both conditions for many samples of one fixed factor `A`."""

    def __init__(self, a: BlockedMatrix, q: np.ndarray) -> None:
        self.a = a
        self.q = q
        self.h_exact = a.gram() + q
        self._r_factor = whitening_factor(a, q)

    def report(self, h_tilde: np.ndarray, thresholds: Sequence[float] = ()) -> ConditionReport:
        """Measures the accuracy of `h_tilde`."""
        eps_c1 = measure_c1(self.h_exact, h_tilde)
        eps_c2 = _whitened_norm(self._r_factor, h_tilde - self.h_exact)
        return ConditionReport(
            eps_c1=eps_c1,
            eps_c2=eps_c2,
            holds_c1_at={float(eps): eps_c1 <= eps for eps in thresholds},
            holds_c2_at={float(eps): eps_c2 <= eps for eps in thresholds},
        )

    def measure(self, sample: BlockSample, thresholds: Sequence[float] = ()) -> ConditionReport:
        """Measures the accuracy of the Hessian built from `sample`."""
        return self.report(SubsampledHessian(sample, self.a, self.q).materialize(), thresholds)


def psd_order_holds(h_exact: np.ndarray, h_tilde: np.ndarray, eps: float, tol: float = 1e-9) -> bool:
    """Checks `-eps H <= H~ - H <= eps H` by eigensolves of `eps H -+ (H~ - H)`."""
    difference = _symmetric(h_tilde - h_exact)
    scale = spectral_norm_symmetric(_symmetric(h_exact))
    for sign in (1.0, -1.0):
        lambda_min, _ = symmetric_eig_extremes(_symmetric(eps * h_exact - sign * difference))
        if lambda_min < -tol * scale:
            return False
    return True


def bilinear_quotient(h_exact: np.ndarray, h_tilde: np.ndarray, trials: int, seed: int) -> float:
    """Largest `|x^T (H~ - H) y| / sqrt(x^T H x * y^T H y)` over random Gaussian pairs.

    A Monte Carlo lower estimate of the accuracy returned by `measure_c2`.
    """
    rng = np.random.default_rng(seed)
    difference = h_tilde - h_exact
    best = 0.0
    for _ in range(trials):
        x = rng.standard_normal(h_exact.shape[0])
        y = rng.standard_normal(h_exact.shape[0])
        scale = math.sqrt(float(x @ h_exact @ x) * float(y @ h_exact @ y))
        if scale > 0.0:
            best = max(best, abs(float(x @ difference @ y)) / scale)
    return best


@dataclass(frozen=True)
class ConditionNumbers:
    """Condition numbers of `H = sum_i H_i + Q`.

    `kappa` includes `Q`; `kappa_raw`, `kappa_hat` and `kappa_bar` use the blocks only.
    """

    kappa: float
    kappa_raw: float
    kappa_hat: float
    kappa_bar: float
    mu: float
    nu: float

    def to_dict(self) -> Dict[str, Any]:
        """JSON-friendly form; infinities become the string 'inf'."""
        return {key: (value if math.isfinite(value) else "inf") for key, value in self.__dict__.items()}


def _ratio(top: float, bottom: float, scale: float) -> float:
    return math.inf if bottom <= SINGULAR_TOL * scale else top / bottom


def _condition_numbers(
    block_count: int, block_max: np.ndarray, block_min: Optional[np.ndarray], gram: np.ndarray, q: np.ndarray
) -> ConditionNumbers:
    mu, nu = symmetric_eig_extremes(_symmetric(gram + q))
    raw_min, raw_max = symmetric_eig_extremes(_symmetric(gram))
    largest_block = float(np.max(block_max))

    if block_min is None or np.any(block_min <= SINGULAR_TOL * block_max):
        kappa_bar = math.inf
    else:
        kappa_bar = largest_block / float(np.min(block_min))

    return ConditionNumbers(
        kappa=_ratio(nu, mu, nu),
        kappa_raw=_ratio(raw_max, raw_min, raw_max),
        kappa_hat=_ratio(block_count * largest_block, raw_min, raw_max),
        kappa_bar=kappa_bar,
        mu=mu,
        nu=nu,
    )


def condition_numbers(h_blocks: Sequence[np.ndarray], q: np.ndarray) -> ConditionNumbers:
    """Condition numbers from explicit per-block Hessians `H_i`."""
    if not h_blocks:
        raise ValueError("At least one block Hessian is required")
    stacked = np.array([_symmetric(np.asarray(block, dtype=np.float64)) for block in h_blocks])
    eigenvalues = np.linalg.eigvalsh(stacked)
    return _condition_numbers(len(h_blocks), eigenvalues[:, -1], eigenvalues[:, 0], stacked.sum(axis=0), q)


def condition_numbers_from_factor(a: BlockedMatrix, q: np.ndarray) -> ConditionNumbers:
    """Condition numbers with `H_i = A_i^T A_i`.

    Blocks with fewer rows than columns are singular, so `kappa_bar` is infinite without eigensolves.
    """
    block_max = a.block_spectral_sq()
    block_min: Optional[np.ndarray] = None
    if a.block_rows >= a.cols:
        blocks = a.blocks()
        block_min = np.linalg.eigvalsh(np.einsum("nki,nkj->nij", blocks, blocks))[:, 0]
    return _condition_numbers(a.block_count, block_max, block_min, a.gram(), q)


@dataclass(frozen=True)
class LipschitzEstimate:
    """Largest observed Hessian difference quotient and its inflated value used for region checks."""

    lower: float
    inflated: float
    probes: int


def estimate_lipschitz_L(
    problem: GlmProblem, center: np.ndarray, radius: float, probes: int, seed: int
) -> LipschitzEstimate:
    """Max of `|H(u) - H(v)| / |u - v|` over pairs of points drawn uniformly from a ball.

    Probes are drawn one after another from one stream, so a larger `probes` extends the same set.
    """
    if probes < 2:
        raise ValueError(f"At least two probes are required, got {probes}")
    if radius <= 0.0:
        raise ValueError(f"Radius must be positive, got {radius}")

    center = np.asarray(center, dtype=np.float64)
    rng = np.random.default_rng(seed)
    points: List[np.ndarray] = []
    hessians: List[np.ndarray] = []
    for _ in range(probes):
        direction = rng.standard_normal(problem.d)
        direction /= np.linalg.norm(direction)
        points.append(center + radius * rng.random() ** (1.0 / problem.d) * direction)
        hessians.append(problem.hessian(points[-1]))

    best = 0.0
    for i in range(probes):
        for j in range(i):
            distance = float(np.linalg.norm(points[i] - points[j]))
            if distance > 0.0:
                best = max(best, spectral_norm_symmetric(_symmetric(hessians[i] - hessians[j])) / distance)

    return LipschitzEstimate(lower=best, inflated=2.0 * best, probes=probes)


@dataclass(frozen=True)
class RecursionStep:
    """One step of the error recursion check."""

    iteration: int
    error: float
    next_error: float
    bound: float
    in_region: bool
    satisfied: bool


@dataclass(frozen=True)
class RecursionReport:
    """Per-step results and the fraction of in-region steps that obey the recursion."""

    steps: List[RecursionStep]
    region_radius: float
    contracting: bool

    @property
    def in_region_steps(self) -> List[RecursionStep]:
        """Steps started inside the local region."""
        return [step for step in self.steps if step.in_region]

    @property
    def fraction_satisfied(self) -> Optional[float]:
        """Share of in-region steps satisfying the recursion; None without in-region steps."""
        steps = self.in_region_steps
        if not steps:
            return None
        return sum(step.satisfied for step in steps) / len(steps)


def verify_recursion(
    trace: RunTrace,
    w_star: np.ndarray,
    constants: ConvergenceConstants,
    eps0: float = 0.0,
    floor: Optional[float] = None,
) -> RecursionReport:
    """Checks `|D_{t+1}| <= (1 + eps0) C_q |D_t|^2 + (eps0 + (1 + eps0) C_l) |D_t|` on every step.

    Steps whose next error is below `floor` count as satisfied.
    """
    w_star = np.asarray(w_star, dtype=np.float64)
    if floor is None:
        floor = FLOOR_FACTOR * (1.0 + float(np.linalg.norm(w_star)))

    effective = constants.inexact(eps0)
    radius = constants.region_radius()
    errors = [float(np.linalg.norm(w - w_star)) for w in trace.iterates]

    steps = []
    for iteration, (error, next_error) in enumerate(zip(errors, errors[1:])):
        bound = effective.bound(error)
        satisfied = next_error <= floor or next_error <= bound * (1.0 + BOUND_SLACK)
        steps.append(RecursionStep(iteration, error, next_error, bound, error <= radius, satisfied))

    return RecursionReport(steps=steps, region_radius=radius, contracting=effective.is_contracting())


@dataclass(frozen=True)
class CertificationResult:
    """Measured accuracies of independent draws of one sampling plan."""

    scheme: str
    budget_s: int
    eps: float
    delta: float
    eps_c1: List[float]
    eps_c2: List[float]
    empty_draws: int
    expected_kept: float

    @property
    def trials(self) -> int:
        """Number of draws."""
        return len(self.eps_c1)

    @property
    def success_c1(self) -> float:
        """Share of draws with `eps_c1 <= eps`."""
        return sum(value <= self.eps for value in self.eps_c1) / self.trials

    @property
    def success_c2(self) -> float:
        """Share of draws with `eps_c2 <= eps`."""
        return sum(value <= self.eps for value in self.eps_c2) / self.trials

    def to_dict(self) -> Dict[str, Any]:
        """JSON report."""
        return {
            "scheme": self.scheme,
            "budget_s": self.budget_s,
            "eps": self.eps,
            "delta": self.delta,
            "trials": self.trials,
            "expected_kept": self.expected_kept,
            "empty_draws": self.empty_draws,
            "target_fraction": 1.0 - self.delta,
            "success_c1": self.success_c1,
            "success_c2": self.success_c2,
            "eps_c1": list(self.eps_c1),
            "eps_c2": list(self.eps_c2),
        }


# pylint: disable=too-many-arguments
def certify_sampling(
    a: BlockedMatrix,
    q: np.ndarray,
    scheme: str,
    budget_s: int,
    trials: int,
    eps: float,
    delta: float,
    seed: int,
    scores: Optional[LeverageScores] = None,
) -> CertificationResult:
    """Draws `trials` samples of one plan and measures both conditions for each.

    An empty draw leaves `H~ = Q` and is measured as such.
    """
    if trials < 1:
        raise ValueError(f"At least one trial is required, got {trials}")

    certifier = ConditionCertifier(a, q)
    plan = build_plan(scheme, a, q, budget_s, seed, scores)
    eps_c1: List[float] = []
    eps_c2: List[float] = []
    empty_draws = 0
    for trial in range(trials):
        try:
            report = certifier.measure(draw_block_sample(plan, trial))
        except EmptySampleError:
            empty_draws += 1
            report = certifier.report(np.array(q, dtype=np.float64))
        eps_c1.append(report.eps_c1)
        eps_c2.append(report.eps_c2)

    return CertificationResult(
        scheme=scheme,
        budget_s=budget_s,
        eps=eps,
        delta=delta,
        eps_c1=eps_c1,
        eps_c2=eps_c2,
        empty_draws=empty_draws,
        expected_kept=plan.expected_kept(),
    )


class IterationDiagnostics:
    """SSN observer measuring both conditions of every drawn Hessian.

    Also records the condition number of `H~`, the solver error factor it implies and the modelled
    work of the iteration.
    """

    def __init__(self, solver_tol: float) -> None:
        self.solver_tol = solver_tol
        self.records: List[Dict[str, Any]] = []

    def __call__(self, step: SsnStep) -> None:
        a, q = step.factorization.a, step.factorization.q
        h_tilde = step.hessian.materialize()
        eps_c1 = measure_c1(a.gram() + q, h_tilde)
        try:
            eps_c2: Optional[float] = ConditionCertifier(a, q).report(h_tilde).eps_c2
        except RankDeficientError:
            eps_c2 = None
        lambda_min, lambda_max = symmetric_eig_extremes(_symmetric(h_tilde))
        kappa_tilde = _ratio(lambda_max, lambda_min, lambda_max)
        cost = per_iteration_cost(
            step.plan.scheme,
            step.stats.solver,
            int(np.count_nonzero(a.entries)),
            a.block_count,
            step.hessian.kept_rows,
            a.cols,
            kappa_tilde,
            self.solver_tol,
        )
        self.records.append(
            {
                "iter": step.iteration,
                "eps_c1": eps_c1,
                "eps_c2": eps_c2,
                "kappa_tilde": kappa_tilde if math.isfinite(kappa_tilde) else "inf",
                "eps0_bound": solver_error_factor(step.stats.solver, kappa_tilde, self.solver_tol),
                "kept_blocks": step.hessian.sample.kept_count,
                "iteration_cost": cost if math.isfinite(cost) else "inf",
            }
        )

    def estimated_cost(self) -> float:
        """Modelled work summed over the recorded iterations."""
        costs = [record["iteration_cost"] for record in self.records]
        return float(sum(math.inf if cost == "inf" else cost for cost in costs))
