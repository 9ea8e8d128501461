"""Expansion/shrinkage phase analysis of the surrogate loss.

The surrogate loss is a function of the single statistic t = ‖W‖²_F/α alone,
with feasible range t ∈ [1/(1+σ²_aug+‖μ‖²), 1/(1+σ²_aug)].  Small t means the
projector stretches the class-mean direction ("expansion"); the right endpoint
means the class mean is annihilated ("shrinkage").  Its derivative in t,

    F(t) = (1/τ)·[1 + 2σ²_aug − 2(1+σ²_aug)/(1 + exp((−2 + 2(1+σ²_aug)t)/τ))],

is strictly increasing, so the sign of F at the left endpoint decides the
regime: positive ⇒ the minimizer sits at the left endpoint (expansion);
negative ⇒ an interior stationary point with a closed form (shrinkage).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf, log

import numpy as np
from scipy.special import expit

from .numerics import DomainError

__all__ = [
    "DegenerateAugmentationError",
    "EXPANSION",
    "SHRINKAGE",
    "BOUNDARY",
    "PhaseConfig",
    "PhaseReport",
    "GapDiagnostic",
    "phase_derivative_F",
    "shrinkage_t_star",
    "tau_star",
    "classify_regime",
    "expansion_measure",
    "surrogate_gap_diagnostic",
]

EXPANSION = "Expansion"
SHRINKAGE = "Shrinkage"
BOUNDARY = "Boundary"

_BOUNDARY_BAND = 1e-10


class DegenerateAugmentationError(DomainError):
    """σ²_aug = 0 has no finite transition temperature."""


@dataclass(frozen=True)
class PhaseConfig:
    """The three scalars that decide the regime: σ²_aug, τ, ‖μ‖²."""

    sigma_aug_sq: float
    tau: float
    mu_norm_sq: float

    def __post_init__(self) -> None:
        if self.sigma_aug_sq < 0.0:
            raise DomainError(f"sigma_aug_sq must be >= 0, got {self.sigma_aug_sq}")
        if not self.tau > 0.0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if not self.mu_norm_sq > 0.0:
            raise DomainError(f"mu_norm_sq must be positive, got {self.mu_norm_sq}")

    @property
    def left_endpoint(self) -> float:
        return 1.0 / (1.0 + self.sigma_aug_sq + self.mu_norm_sq)

    @property
    def right_endpoint(self) -> float:
        return 1.0 / (1.0 + self.sigma_aug_sq)


@dataclass(frozen=True)
class PhaseReport:
    """Regime label plus the surrogate optimum t* and the transition τ*."""

    regime: str
    t_star: float
    tau_star: float
    boundary_F_value: float


def phase_derivative_F(t: float, cfg: PhaseConfig) -> float:
    """Derivative of the surrogate loss with respect to t (strictly increasing)."""
    s2, tau = cfg.sigma_aug_sq, cfg.tau
    arg = (-2.0 + 2.0 * (1.0 + s2) * t) / tau
    # 1/(1 + e^arg) = expit(−arg), stable for any sign of arg
    return (1.0 + 2.0 * s2 - 2.0 * (1.0 + s2) * float(expit(-arg))) / tau


def shrinkage_t_star(cfg: PhaseConfig) -> float:
    """Interior stationary point (1+σ²)⁻¹·(1 − (τ/2)·log(1+2σ²))."""
    s2 = cfg.sigma_aug_sq
    return (1.0 - 0.5 * cfg.tau * log(1.0 + 2.0 * s2)) / (1.0 + s2)


def tau_star(sigma_aug_sq: float, mu_norm_sq: float) -> float:
    """Transition temperature: expansion for τ > τ*, shrinkage for τ < τ*.

        τ* = 2‖μ‖² / [(1+σ²_aug+‖μ‖²)·log(1+2σ²_aug)]

    Raises DegenerateAugmentationError at σ²_aug = 0, where the formula's
    limit is +∞: without augmentation noise every finite temperature sits on
    the shrinkage side and no finite threshold exists.
    """
    if sigma_aug_sq < 0.0 or not mu_norm_sq > 0.0:
        raise DomainError("need sigma_aug_sq >= 0 and mu_norm_sq > 0")
    if sigma_aug_sq == 0.0:
        raise DegenerateAugmentationError(
            "no finite transition temperature at sigma_aug_sq = 0"
        )
    return 2.0 * mu_norm_sq / (
        (1.0 + sigma_aug_sq + mu_norm_sq) * log(1.0 + 2.0 * sigma_aug_sq)
    )


def classify_regime(cfg: PhaseConfig) -> PhaseReport:
    """Decide the regime from the sign of F at the left endpoint of t.

    |F| ≤ 1e-10 is reported as the boundary.  t* is the left endpoint under
    expansion and the interior closed form under shrinkage (they coincide on
    the boundary).  τ* is +∞ when σ²_aug = 0 (see tau_star).
    """
    f_left = phase_derivative_F(cfg.left_endpoint, cfg)
    if cfg.sigma_aug_sq == 0.0:
        ts = inf
    else:
        ts = tau_star(cfg.sigma_aug_sq, cfg.mu_norm_sq)
    if f_left > _BOUNDARY_BAND:
        return PhaseReport(EXPANSION, cfg.left_endpoint, ts, f_left)
    if f_left < -_BOUNDARY_BAND:
        return PhaseReport(SHRINKAGE, shrinkage_t_star(cfg), ts, f_left)
    return PhaseReport(BOUNDARY, cfg.left_endpoint, ts, f_left)


def expansion_measure(w, mu: np.ndarray) -> float:
    """T(W) = ‖Wμ‖² / (‖W‖²_F·‖μ‖²) ∈ [0, 1]; 1 iff W is rank-one along μ."""
    W = w.W if hasattr(w, "W") else np.asarray(w, dtype=float)
    mu = np.asarray(mu, dtype=float)
    fro2 = float(np.sum(W * W))
    rho = float(mu @ mu)
    if fro2 == 0.0 or rho == 0.0:
        raise DomainError("expansion measure undefined for zero W or zero μ")
    return float(np.sum((W @ mu) ** 2)) / (fro2 * rho)


@dataclass(frozen=True)
class GapDiagnostic:
    """Distance between a trained projector's t and the surrogate optimum t*."""

    t_trained: float
    t_star: float
    gap: float
    regime: str


def surrogate_gap_diagnostic(
    w, cfg: PhaseConfig, mu: np.ndarray
) -> GapDiagnostic:
    """Compare t of a trained projector against the surrogate prediction t*.

    In the expansion regime the surrogate optimum is the lower endpoint of
    the feasible interval, so t_trained ≥ t* − roundoff always holds there;
    the interesting content is how fast the gap shrinks as ‖μ‖ grows.
    """
    W = w.W if hasattr(w, "W") else np.asarray(w, dtype=float)
    mu = np.asarray(mu, dtype=float)
    rho = float(mu @ mu)
    if abs(rho - cfg.mu_norm_sq) > 1e-8 * max(1.0, cfg.mu_norm_sq):
        raise DomainError(
            f"‖μ‖²={rho!r} disagrees with the configuration's {cfg.mu_norm_sq!r}"
        )
    fro2 = float(np.sum(W * W))
    if fro2 == 0.0:
        raise DomainError("zero projector has no t statistic")
    alpha = (1.0 + cfg.sigma_aug_sq) * fro2 + float(np.sum((W @ mu) ** 2))
    t_trained = fro2 / alpha
    report = classify_regime(cfg)
    return GapDiagnostic(
        t_trained=t_trained,
        t_star=report.t_star,
        gap=abs(t_trained - report.t_star),
        regime=report.regime,
    )
