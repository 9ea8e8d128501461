"""Spiked-augmentation theory: direction-dependent noise A = I + ρ_aug·vvᵀ.

When augmentation noise is stronger along one direction v_aug, the closed
forms of the homogeneous model generalize through the whitening pair
W̃ = W(I+σ²_aug·A)^{1/2}, μ̃ = (I+σ²_aug·A)^{-1/2}·μ, and the first-order
surrogate collapses to a univariate problem in the alignment
T = ‖Wμ̄‖²/‖W‖²_F with an extra positive-part penalty

    ρ_aug·σ²_aug·[(|r|·√T − √(1−r²)·√(1−T))₊]²,   r = ⟨μ̄, v_aug⟩,

charged only once the head's top direction swings past the orthogonal
complement of v_aug inside span{μ, v_aug}.  The penalty kinks at T = 1−r²;
below the transition temperature τ₁* the optimum annihilates v_aug and has a
closed form, above it the optimum is rank-one strictly inside (1−r², 1).
The penalty is written with |r| so that the ±v_aug symmetry of the noise
model is explicit.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp, log, sqrt
from typing import Optional, Tuple, Union

import numpy as np

from .gmm import GmmConfig
from .loss import LossBreakdown, Projector, embedding_second_moment
from .numerics import DomainError, minimize_scalar, svd_descending

__all__ = [
    "BOTH_SHRINK",
    "SIMULTANEOUS_ES",
    "BOTH_EXPAND",
    "ALIGNED_EXPAND",
    "DEGENERATE",
    "NotRankOneError",
    "InhomoConfig",
    "InhomoSolution",
    "population_loss_inhomo",
    "approx_loss_inhomo",
    "objective_T",
    "tau1_star",
    "solve_T_star",
    "shrink_branch_T_star",
    "rank_one_projector",
    "classify_phase_inhomo",
]

BOTH_SHRINK = "BothShrink"
SIMULTANEOUS_ES = "SimultaneousES"
BOTH_EXPAND = "BothExpand"
ALIGNED_EXPAND = "AlignedExpand"
DEGENERATE = "Degenerate"

# Conventions turning asymptotic phase descriptions into concrete labels:
# T* at or below _T_SMALL counts as collapsed, and √T* above 1 − _ALIGN_EPS
# counts as aligned with the signal direction.
_T_SMALL = 0.05
_ALIGN_EPS = 0.01


class NotRankOneError(ValueError):
    """The solution does not carry a rank-one optimizer."""


@dataclass(frozen=True)
class InhomoConfig:
    """Scalar reduction of a spiked model: everything the univariate
    objective needs, with r the cosine between μ̄ and the spike direction."""

    mu_norm_sq: float
    sigma_aug_sq: float
    rho_aug: float
    r: float
    tau: float

    def __post_init__(self) -> None:
        if not self.mu_norm_sq > 0.0:
            raise DomainError(f"mu_norm_sq must be positive, got {self.mu_norm_sq}")
        if not self.sigma_aug_sq > 0.0:
            raise DomainError(
                f"sigma_aug_sq must be positive, got {self.sigma_aug_sq}"
            )
        if self.rho_aug < 0.0:
            raise DomainError(f"rho_aug must be nonnegative, got {self.rho_aug}")
        if abs(self.r) > 1.0:
            raise DomainError(f"cosine r must lie in [-1, 1], got {self.r}")
        if not self.tau > 0.0:
            raise DomainError(f"tau must be positive, got {self.tau}")

    @property
    def a(self) -> float:
        """Sine of the angle between μ̄ and v_aug: √(1−r²)."""
        return sqrt(max(1.0 - self.r * self.r, 0.0))

    @property
    def nondegenerate(self) -> bool:
        return self.rho_aug > 0.0 and 0.0 < abs(self.r) < 1.0

    @classmethod
    def from_model(cls, cfg: GmmConfig, tau: float) -> "InhomoConfig":
        if not cfg.has_spike:
            raise DomainError("the model carries no spike direction")
        return cls(
            mu_norm_sq=cfg.rho,
            sigma_aug_sq=cfg.sigma_aug**2,
            rho_aug=cfg.rho_aug,
            r=cfg.r,
            tau=tau,
        )


@dataclass(frozen=True)
class InhomoSolution:
    """Optimum of the univariate surrogate plus its phase bookkeeping.

    right_vector_coeffs spells the rank-one optimizer's direction as
    coefficients (√T*, −√(1−T*)) on the orthonormal pair (μ̄, μ_⊥); it is
    None whenever rank_one is False.
    """

    T_star: float
    tau1_star: float
    regime: str
    rank_one: bool
    right_vector_coeffs: Optional[Tuple[float, float]]


# ---------------------------------------------------------------------------
# Closed-form losses under the spiked model
# ---------------------------------------------------------------------------


def _whitening_scalars(cfg: GmmConfig) -> Tuple[float, float, float]:
    """(base, spiked, rho_aug) eigenvalues of I + σ²·A on v_aug^⊥ and v_aug."""
    sig2 = cfg.sigma_aug**2
    rho_aug = cfg.rho_aug if cfg.has_spike else 0.0
    return 1.0 + sig2, 1.0 + sig2 * (1.0 + rho_aug), rho_aug


def population_loss_inhomo(
    w: Union[Projector, np.ndarray], cfg: GmmConfig, tau: float
) -> LossBreakdown:
    """Exact population loss under direction-dependent augmentation noise.

    alignment = σ²_aug·Tr(W A Wᵀ)/(τ·α̃) and the uniformity term is the
    homogeneous closed form evaluated on the whitened pair (W̃, μ̃), with
    α̃ = E‖Wh‖².  At ρ_aug = 0 this reproduces population_loss exactly.
    """
    if not tau > 0.0:
        raise DomainError(f"temperature must be positive, got {tau}")
    W = w.W if isinstance(w, Projector) else np.asarray(w, dtype=float)
    base, spiked, rho_aug = _whitening_scalars(cfg)
    alpha = embedding_second_moment(W, cfg)
    fro2 = float(np.sum(W * W))
    ta = tau * alpha

    if cfg.has_spike and rho_aug > 0.0:
        v = cfg.v_aug
        wv = W @ v
        w_tilde = sqrt(base) * W + (sqrt(spiked) - sqrt(base)) * np.outer(wv, v)
        mu_tilde = cfg.mu / sqrt(base) + (
            1.0 / sqrt(spiked) - 1.0 / sqrt(base)
        ) * float(v @ cfg.mu) * v
        trace_wawt = fro2 + rho_aug * float(wv @ wv)
    else:
        w_tilde = sqrt(base) * W
        mu_tilde = cfg.mu / sqrt(base)
        trace_wawt = fro2

    align = cfg.sigma_aug**2 * trace_wawt / ta

    svd = svd_descending(w_tilde)
    s2 = svd.singular_values**2
    m2 = (svd.right_vectors.T @ mu_tilde) ** 2
    unif = -log(2.0) - 0.5 * float(np.sum(np.log1p(2.0 * s2 / ta)))
    expo = float(np.sum(2.0 * s2 * m2 / (2.0 * s2 + ta)))
    unif += float(np.log1p(exp(-expo)))

    return LossBreakdown(
        align=align,
        unif=unif,
        total=align + unif,
        alpha=alpha,
        t=fro2 / alpha,
    )


def approx_loss_inhomo(
    w: Union[Projector, np.ndarray], cfg: GmmConfig, tau: float
) -> float:
    """First-order surrogate −‖W‖²_F/(τα̃) + log(1+e^{−2‖Wμ‖²/(τα̃)}) − log 2."""
    if not tau > 0.0:
        raise DomainError(f"temperature must be positive, got {tau}")
    W = w.W if isinstance(w, Projector) else np.asarray(w, dtype=float)
    alpha = embedding_second_moment(W, cfg)
    fro2 = float(np.sum(W * W))
    wmu2 = float(np.sum((W @ cfg.mu) ** 2))
    return -fro2 / (tau * alpha) + float(np.log1p(exp(-2.0 * wmu2 / (tau * alpha)))) - log(2.0)


# ---------------------------------------------------------------------------
# Univariate reduction in T = ‖Wμ̄‖²/‖W‖²_F
# ---------------------------------------------------------------------------


def objective_T(T: float, cfg: InhomoConfig) -> float:
    """Surrogate value as a function of the alignment T alone.

    Differs from approx_loss_inhomo by the additive constant log 2 (dropping
    it changes no minimizer).  The denominator scale is
    h(T) = 1 + σ² + ‖μ‖²T + ρ_aug·σ²·[(|r|√T − √(1−r²)√(1−T))₊]².
    """
    if not 0.0 <= T <= 1.0:
        raise DomainError(f"alignment T must lie in [0, 1], got {T}")
    s2 = cfg.sigma_aug_sq
    gap = abs(cfg.r) * sqrt(T) - cfg.a * sqrt(1.0 - T)
    penalty = cfg.rho_aug * s2 * max(gap, 0.0) ** 2
    h = (1.0 + s2) + cfg.mu_norm_sq * T + penalty
    return -1.0 / (cfg.tau * h) + float(
        np.log1p(exp(-2.0 * cfg.mu_norm_sq * T / (cfg.tau * h)))
    )


def tau1_star(cfg: InhomoConfig) -> float:
    """Transition temperature of the spiked model.

        τ₁* = 2(1−r²)‖μ‖² / [log(1+2σ²)·(1+σ²+(1−r²)‖μ‖²)]

    Never exceeds the homogeneous transition temperature; equality holds
    only at r = 0, and the value sinks to 0 as |r| → 1.
    """
    a2 = cfg.a**2
    return (
        2.0
        * a2
        * cfg.mu_norm_sq
        / (log(1.0 + 2.0 * cfg.sigma_aug_sq) * (1.0 + cfg.sigma_aug_sq + a2 * cfg.mu_norm_sq))
    )


def shrink_branch_T_star(cfg: InhomoConfig) -> float:
    """Closed-form optimum on the τ ≤ τ₁* branch (the head kills v_aug):

        T* = (τ(1+σ²)/(2‖μ‖²))·log(1+2σ²)·[1 − (τ/2)·log(1+2σ²)]⁻¹.
    """
    half_log = 0.5 * cfg.tau * log(1.0 + 2.0 * cfg.sigma_aug_sq)
    return (1.0 + cfg.sigma_aug_sq) * half_log / (cfg.mu_norm_sq * (1.0 - half_log))


def _phase_label(cfg: InhomoConfig, T_star: float, threshold: float) -> str:
    if not cfg.nondegenerate:
        return DEGENERATE
    if T_star <= _T_SMALL:
        return BOTH_SHRINK
    if cfg.tau <= threshold:
        return SIMULTANEOUS_ES
    if sqrt(T_star) >= 1.0 - _ALIGN_EPS:
        return ALIGNED_EXPAND
    return BOTH_EXPAND


def solve_T_star(cfg: InhomoConfig) -> InhomoSolution:
    """Minimize the univariate surrogate over T ∈ [0, 1].

    Always solves numerically (grid + golden-section); the τ ≤ τ₁* closed
    form and the T* ∈ (1−r², 1) bracketing of the rank-one branch serve as
    cross-checks in the test suite, not as fast paths here.
    """
    threshold = tau1_star(cfg)
    T_star, _ = minimize_scalar(
        lambda T: objective_T(min(max(T, 0.0), 1.0), cfg),
        0.0,
        1.0,
        tol=1e-12,
        grid_points=2048,
        value_tie_tol=1e-13,
    )
    rank_one = bool(cfg.nondegenerate and cfg.tau > threshold)
    coeffs = (sqrt(T_star), -sqrt(1.0 - T_star)) if rank_one else None
    return InhomoSolution(
        T_star=float(T_star),
        tau1_star=threshold,
        regime=_phase_label(cfg, T_star, threshold),
        rank_one=rank_one,
        right_vector_coeffs=coeffs,
    )


def rank_one_projector(
    sol: InhomoSolution, mu_bar: np.ndarray, mu_perp: np.ndarray
) -> Projector:
    """Materialize the rank-one optimizer W* = qqᵀ, q = √T*·μ̄ − √(1−T*)·μ_⊥.

    Callers must orient μ_⊥ so that r·⟨μ_⊥, v_aug⟩ ≥ 0 (GmmConfig.mu_perp
    already does).  W* is symmetric with unit Frobenius norm and attains
    exactly the solved alignment T*.
    """
    if not sol.rank_one or sol.right_vector_coeffs is None:
        raise NotRankOneError("this solution has no rank-one optimizer attached")
    mu_bar = np.asarray(mu_bar, dtype=float)
    mu_perp = np.asarray(mu_perp, dtype=float)
    for name, vec in (("mu_bar", mu_bar), ("mu_perp", mu_perp)):
        if abs(float(vec @ vec) - 1.0) > 1e-10:
            raise DomainError(f"{name} must be a unit vector")
    if abs(float(mu_bar @ mu_perp)) > 1e-10:
        raise DomainError("mu_bar and mu_perp must be orthogonal")
    c_bar, c_perp = sol.right_vector_coeffs
    q = c_bar * mu_bar + c_perp * mu_perp
    return Projector(np.outer(q, q))


def classify_phase_inhomo(cfg: InhomoConfig) -> str:
    """Label the temperature phase of a spiked configuration.

    Collapsed optimum (T* ≤ 0.05) → BothShrink; below the transition with a
    live optimum → SimultaneousES (the head expands μ̄ while killing v_aug);
    above it → BothExpand, upgraded to AlignedExpand once √T* ≥ 0.99.
    Degenerate configurations (ρ_aug = 0 or r ∈ {0, ±1}) get their own label.
    """
    return solve_T_star(cfg).regime
