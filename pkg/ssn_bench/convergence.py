"""Constants of the linear-quadratic error recursion of sub-sampled Newton steps."""
import math
from dataclasses import dataclass

REGIMES = ["c1", "c2"]


class RegimeError(ValueError):
    """Error raised when the inputs violate the precondition of a regime."""


@dataclass(frozen=True)
class ConvergenceConstants:
    """`|D_{t+1}| <= C_q |D_t|^2 + C_l |D_t|` for the error `D_t = w_t - w*`."""

    c_q: float
    c_l: float
    regime: str
    eps: float
    kappa: float
    lipschitz: float
    mu: float

    def inexact(self, eps0: float) -> "ConvergenceConstants":
        """Constants for subproblems solved to relative solution error `eps0`."""
        if eps0 < 0.0:
            raise ValueError(f"Inexactness must be non-negative, got {eps0}")
        return ConvergenceConstants(
            c_q=(1.0 + eps0) * self.c_q,
            c_l=eps0 + (1.0 + eps0) * self.c_l,
            regime=self.regime,
            eps=self.eps,
            kappa=self.kappa,
            lipschitz=self.lipschitz,
            mu=self.mu,
        )

    def bound(self, error: float) -> float:
        """Right-hand side of the recursion for the current error."""
        return self.c_q * error ** 2 + self.c_l * error

    def region_radius(self) -> float:
        """Radius `mu / (4 L)` of the local region; infinite for a constant Hessian."""
        return math.inf if self.lipschitz == 0.0 else self.mu / (4.0 * self.lipschitz)

    def region_contraction(self) -> float:
        """Worst-case factor `C_q mu / (4 L) + C_l` of one step started inside the region."""
        if self.lipschitz == 0.0:
            return self.c_l
        return self.c_q * self.region_radius() + self.c_l

    def is_contracting(self) -> bool:
        """Whether the linear term alone lets the error decrease."""
        return self.c_l < 1.0


# pylint: disable=too-many-arguments
def convergence_constants(eps: float, kappa: float, lipschitz: float, mu: float, regime: str) -> ConvergenceConstants:
    """Constants of the recursion for Hessian approximation accuracy `eps`.

    c1 (relative spectral-norm error): needs `eps * kappa < 1/2`,
        C_q = 2L / ((1 - 2 eps kappa) mu), C_l = 4 eps kappa / (1 - 2 eps kappa).
    c2 (two-sided spectral approximation): needs `eps < 1`,
        C_q = 2L / ((1 - eps) mu), C_l = 3 eps sqrt(kappa) / (1 - eps).
    """
    if regime not in REGIMES:
        raise ValueError(f"Incorrect regime '{regime}'. Available regimes are: {REGIMES}")
    if eps < 0.0 or kappa < 1.0 or lipschitz < 0.0 or mu <= 0.0:
        raise ValueError(
            f"Expected eps >= 0, kappa >= 1, L >= 0 and mu > 0, got eps = {eps}, kappa = {kappa}, "
            f"L = {lipschitz}, mu = {mu}"
        )

    if regime == "c1":
        if eps * kappa >= 0.5:
            raise RegimeError(f"Regime c1 requires eps * kappa < 1/2, got {eps} * {kappa} = {eps * kappa}")
        shrink = 1.0 - 2.0 * eps * kappa
        c_q = 2.0 * lipschitz / (shrink * mu)
        c_l = 4.0 * eps * kappa / shrink
    else:
        if eps >= 1.0:
            raise RegimeError(f"Regime c2 requires eps < 1, got {eps}")
        c_q = 2.0 * lipschitz / ((1.0 - eps) * mu)
        c_l = 3.0 * eps * math.sqrt(kappa) / (1.0 - eps)

    return ConvergenceConstants(c_q=c_q, c_l=c_l, regime=regime, eps=eps, kappa=kappa, lipschitz=lipschitz, mu=mu)
