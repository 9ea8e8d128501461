"""Proportional-regime predictions for hard max-margin classification.

With n/p → δ on embedded two-component GMM data whose class-mean direction
was rescaled by (1+η), everything about the limit is captured by a scalar
potential in two variables,

    f(u, κ) = −u² + δ·E[(√(1+u²)·G + κ·√(u²+c) − √ρ)₊²],   c = (1+η)⁻²,

where G is standard normal, ρ = ‖μ‖², and the positive-part moment has a
closed form.  Separability of the data has a sharp aspect-ratio threshold
δ*(ρ); below it the asymptotic margin κ* is the unique root of
κ ↦ inf_u f(u, κ), the off-signal mass ratio u* is the smallest minimizer of
u ↦ f(u, κ*), and the limiting test error is Φ(−√(ρ/(1+u*²))).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import inf, sqrt
from typing import Optional, Tuple

from .numerics import (
    BracketError,
    DomainError,
    bisect_root,
    gaussian_cdf,
    minimize_scalar,
    positive_part_moment2,
)

__all__ = [
    "SEPARABLE",
    "NON_SEPARABLE",
    "RegimeError",
    "BoundaryWarning",
    "AsymptoticProblem",
    "AsymptoticSolution",
    "margin_potential",
    "delta_star",
    "solve_kappa_star",
    "solve_u_star",
    "predicted_test_error",
    "solve_asymptotics",
]

SEPARABLE = "Separable"
NON_SEPARABLE = "NonSeparable"

_U_LO, _U_HI = 1e-6, 1e4
_GRID = 2048
_KAPPA_CAP = 1e3


class RegimeError(ValueError):
    """The requested quantity only exists in the separable regime."""


class BoundaryWarning(UserWarning):
    """δ sits within 1% of the separability threshold; roots are ill-conditioned."""


@dataclass(frozen=True)
class AsymptoticProblem:
    """Problem scalars: aspect ratio δ = n/p, signal ρ = ‖μ‖², head strength η."""

    delta: float
    rho: float
    eta: float

    def __post_init__(self) -> None:
        if not self.delta > 0.0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if self.rho < 0.0:
            raise DomainError(f"rho must be nonnegative, got {self.rho}")
        if not self.eta > -1.0:
            raise DomainError(f"eta must exceed -1, got {self.eta}")

    @property
    def c(self) -> float:
        return 1.0 / (1.0 + self.eta) ** 2

    @property
    def mu_norm(self) -> float:
        return sqrt(self.rho)

    @classmethod
    def from_c(cls, delta: float, rho: float, c: float) -> "AsymptoticProblem":
        if not c > 0.0:
            raise DomainError(f"c must be positive, got {c}")
        return cls(delta=delta, rho=rho, eta=1.0 / sqrt(c) - 1.0)


@dataclass(frozen=True)
class AsymptoticSolution:
    """Solved limit for one problem; in the non-separable regime the margin
    is 0, the ratio is ∞, and the reported error is the coin flip ½."""

    kappa_star: float
    u_star: float
    delta_star: float
    predicted_error: float
    regime: str


def margin_potential(u: float, kappa: float, prob: AsymptoticProblem) -> float:
    """The scalar potential f(u, κ); exact via the positive-part moment."""
    if u < 0.0 or kappa < 0.0:
        raise DomainError("potential is defined for u, kappa >= 0")
    a = sqrt(1.0 + u * u)
    b = kappa * sqrt(u * u + prob.c) - prob.mu_norm
    return -u * u + prob.delta * positive_part_moment2(a, b)


def delta_star(rho: float) -> float:
    """Sharp aspect-ratio threshold for linear separability.

    Equals (inf_{u>0} u⁻²·E[(√(1+u²)G − √ρ)₊²])⁻¹; equals 2 at ρ = 0 (the
    infimum is then attained in the u → ∞ limit) and increases with ρ.
    """
    if rho < 0.0:
        raise DomainError(f"rho must be nonnegative, got {rho}")
    root_rho = sqrt(rho)

    def objective(u: float) -> float:
        return positive_part_moment2(sqrt(1.0 + u * u), -root_rho) / (u * u)

    _, value = minimize_scalar(
        objective, _U_LO, _U_HI, grid_points=_GRID, log_spacing=True
    )
    return 1.0 / value


def _inf_potential(kappa: float, prob: AsymptoticProblem) -> Tuple[float, float]:
    """(argmin, min) of u ↦ f(u, κ) over [0, ∞), with the u → ∞ tail handled
    analytically: f grows like u²·(δ·E[(G+κ)₊²] − 1), so a negative tail
    coefficient means the infimum is −∞ (reported with argmin = ∞)."""
    tail = prob.delta * positive_part_moment2(1.0, kappa) - 1.0
    if tail < 0.0:
        return inf, -inf

    def objective(u: float) -> float:
        return margin_potential(u, kappa, prob)

    u_best, value = minimize_scalar(
        objective, _U_LO, _U_HI, grid_points=_GRID, log_spacing=True,
        value_tie_tol=1e-12,
    )
    at_zero = margin_potential(0.0, kappa, prob)
    if at_zero <= value:
        return 0.0, at_zero
    return u_best, value


def _require_separable(prob: AsymptoticProblem, threshold: float) -> None:
    if prob.delta >= threshold:
        raise RegimeError(
            f"delta = {prob.delta} is at or above the separability threshold "
            f"{threshold}; the margin system has no positive solution"
        )
    if prob.delta >= 0.99 * threshold:
        warnings.warn(
            f"delta = {prob.delta} is within 1% of the separability threshold "
            f"{threshold}; solved values are ill-conditioned",
            BoundaryWarning,
        )


def solve_kappa_star(prob: AsymptoticProblem) -> float:
    """Asymptotic margin: the unique root of the increasing κ ↦ inf_u f(u, κ).

    Requires the separable regime δ < δ*(ρ).  The upper bracket doubles from
    1 until the infimum is positive (capped at 1e3), then bisection runs to
    1e-10.
    """
    _require_separable(prob, delta_star(prob.rho))
    hi = 1.0
    while _inf_potential(hi, prob)[1] <= 0.0:
        hi *= 2.0
        if hi > _KAPPA_CAP:
            raise BracketError(f"no positive infimum below kappa = {_KAPPA_CAP}")
    return bisect_root(lambda k: _inf_potential(k, prob)[1], 0.0, hi, tol=1e-10)


def solve_u_star(prob: AsymptoticProblem, kappa_star: Optional[float] = None) -> float:
    """Smallest minimizer of u ↦ f(u, κ*); the minimum value there is ≈ 0."""
    if kappa_star is None:
        kappa_star = solve_kappa_star(prob)
    u_best, _ = _inf_potential(kappa_star, prob)
    return u_best


def predicted_test_error(
    prob: AsymptoticProblem, u_star: Optional[float] = None
) -> float:
    """Limiting test error Φ(−√(ρ/(1+u*²))) of the max-margin classifier."""
    if u_star is None:
        u_star = solve_u_star(prob)
    return gaussian_cdf(-sqrt(prob.rho / (1.0 + u_star * u_star)))


def solve_asymptotics(prob: AsymptoticProblem) -> AsymptoticSolution:
    """Solve the full scalar system for one problem instance."""
    threshold = delta_star(prob.rho)
    if prob.delta >= threshold:
        return AsymptoticSolution(
            kappa_star=0.0,
            u_star=inf,
            delta_star=threshold,
            predicted_error=0.5,
            regime=NON_SEPARABLE,
        )
    kappa = solve_kappa_star(prob)
    u = solve_u_star(prob, kappa_star=kappa)
    return AsymptoticSolution(
        kappa_star=kappa,
        u_star=u,
        delta_star=threshold,
        predicted_error=predicted_test_error(prob, u_star=u),
        regime=SEPARABLE,
    )
