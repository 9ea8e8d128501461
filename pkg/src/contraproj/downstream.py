"""Downstream linear classification on projected GMM features.

Covers the one-parameter symmetric head family W_η = I + η·μμᵀ/‖μ‖² (η > −1
stretches or shrinks the class-mean direction only), hard max-margin fitting
in the embedded space and its norm-reparametrized twin in feature space,
ℓ₂-regularized logistic regression with an unpenalized intercept, the scale
of its population-limit coefficient vector, and exact test errors under the
two-component symmetric GMM.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from math import inf, isnan, nan, sqrt
from typing import Optional

import numpy as np
from scipy.special import expit

from .numerics import (
    BracketError,
    DomainError,
    Quadrature,
    bisect_root,
    expect_gaussian_1d,
    gaussian_cdf,
    softplus,
)

__all__ = [
    "ConvergenceWarning",
    "EtaProjector",
    "MarginFit",
    "RidgeLogisticFit",
    "apply_eta",
    "max_margin",
    "max_margin_omega",
    "gmm_test_error",
    "ridge_logistic_fit",
    "ridge_coef_scale_root",
    "lowdim_asymptotic_error",
]

_FEASIBILITY_TOL = 1e-9
_DUAL_NORM_CAP = 1e8
_MAX_PASSES = 100_000


class ConvergenceWarning(UserWarning):
    """A fit hit its iteration cap; the returned values are best-effort."""


@dataclass(frozen=True, eq=False)
class EtaProjector:
    """Symmetric head I + (η/ρ)·μμᵀ: scales the μ direction by (1+η)."""

    eta: float
    mu: np.ndarray
    rho: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.eta > -1.0:
            raise DomainError(f"eta must exceed -1, got {self.eta}")
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1 or not np.all(np.isfinite(mu)):
            raise DomainError("mu must be a finite vector")
        rho = float(mu @ mu)
        if rho <= 0.0:
            raise DomainError("mu must be nonzero")
        if self.rho is not None and abs(self.rho - rho) > 1e-8 * max(1.0, rho):
            raise DomainError(f"stated rho {self.rho} is not ‖mu‖² = {rho}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "rho", rho)

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    def matrix(self) -> np.ndarray:
        return np.eye(self.p) + (self.eta / self.rho) * np.outer(self.mu, self.mu)


def apply_eta(proj: EtaProjector, H: np.ndarray) -> np.ndarray:
    """Embed rows of H without forming the p×p matrix: O(np)."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[1] != proj.p:
        raise DomainError(f"features must be (n, {proj.p}), got {H.shape}")
    coef = (H @ proj.mu) * (proj.eta / proj.rho)
    return H + coef[:, None] * proj.mu[None, :]


@dataclass(frozen=True, eq=False)
class MarginFit:
    """Hard max-margin fit.

    For a separable problem beta_hat is the unit maximizer of the minimum
    signed projection and margin is that minimum; otherwise beta_hat is the
    zero sentinel.  u_hat is the mass ratio of beta_hat off versus along a
    reference direction (NaN when no direction was supplied).
    """

    beta_hat: np.ndarray
    margin: float
    u_hat: float
    separable: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "beta_hat": [float(b) for b in self.beta_hat],
                "margin": float(self.margin),
                "u_hat": None if isnan(self.u_hat) else float(self.u_hat),
                "separable": bool(self.separable),
            }
        )


def _offsignal_ratio(beta: np.ndarray, direction: Optional[np.ndarray]) -> float:
    if direction is None:
        return nan
    d = np.asarray(direction, dtype=float)
    dn = np.linalg.norm(d)
    if dn == 0.0:
        raise DomainError("reference direction must be nonzero")
    along = float(beta @ d) / dn
    off = sqrt(max(float(beta @ beta) - along * along, 0.0))
    if along == 0.0:
        return inf if off > 0.0 else nan
    return off / abs(along)


def _nonseparable(p: int) -> MarginFit:
    return MarginFit(beta_hat=np.zeros(p), margin=0.0, u_hat=nan, separable=False)


def max_margin(
    Z: np.ndarray, y: np.ndarray, mu: Optional[np.ndarray] = None
) -> MarginFit:
    """ℓ₂ hard max-margin classifier by dual coordinate ascent.

    Solves min ‖β‖² subject to y_i⟨z_i, β⟩ ≥ 1, then rescales β to unit
    norm, so margin = min_i y_i⟨z_i, β̂⟩ = 1/‖β_qp‖.  Infeasibility (data
    not linearly separable) is declared when the dual iterate's norm blows
    past 1e8 or the pass budget ends without a feasible primal.

    All-same-label inputs are trivially feasible and return separable=True
    with the minimum projection as margin.  Pass ``mu`` to fill u_hat.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y)
    if Z.ndim != 2 or y.shape != (Z.shape[0],):
        raise DomainError("need Z of shape (n, p) and y of shape (n,)")
    if not np.all(np.isin(y, (-1, 1))):
        raise DomainError("labels must be ±1")
    n, p = Z.shape
    X = y[:, None].astype(float) * Z  # signed points: constraints Xβ ≥ 1
    qii = np.sum(X * X, axis=1)
    if np.any(qii == 0.0):
        return _nonseparable(p)  # a zero row can never satisfy its constraint

    alpha = np.zeros(n)
    w = np.zeros(p)
    for _ in range(_MAX_PASSES):
        for i in range(n):
            g = 1.0 - float(X[i] @ w)
            if g <= 0.0 and alpha[i] == 0.0:
                continue
            delta = max(-alpha[i], g / qii[i])
            if delta != 0.0:
                alpha[i] += delta
                w += delta * X[i]
        wn2 = float(w @ w)
        if sqrt(wn2) > _DUAL_NORM_CAP:
            return _nonseparable(p)
        worst = 1.0 - float(np.min(X @ w))
        gap = wn2 - float(np.sum(alpha))
        if worst <= _FEASIBILITY_TOL and abs(gap) <= 1e-10 * max(1.0, wn2):
            norm = sqrt(wn2)
            beta = w / norm
            return MarginFit(
                beta_hat=beta,
                margin=float(np.min((y[:, None] * Z) @ beta)),
                u_hat=_offsignal_ratio(beta, mu),
                separable=True,
            )
    return _nonseparable(p)


def max_margin_omega(
    H: np.ndarray,
    y: np.ndarray,
    proj: EtaProjector,
    mu: Optional[np.ndarray] = None,
) -> MarginFit:
    """Feature-space twin of max_margin under the head-induced norm.

    Fits β̂ on the embeddings Z = apply_eta(proj, H) and returns β̃ = W β̂,
    which attains the same margins on the raw features (W is symmetric, so
    ⟨Wh, β̂⟩ = ⟨h, Wβ̂⟩).  β̃ has unit norm in the transformed sense
    ‖W⁻¹β̃‖ = 1 rather than ‖β̃‖ = 1.
    """
    zfit = max_margin(apply_eta(proj, H), y, mu=None)
    if not zfit.separable:
        return MarginFit(
            beta_hat=zfit.beta_hat,
            margin=0.0,
            u_hat=_offsignal_ratio(zfit.beta_hat, mu) if mu is not None else nan,
            separable=False,
        )
    coef = (proj.eta / proj.rho) * float(zfit.beta_hat @ proj.mu)
    beta_tilde = zfit.beta_hat + coef * proj.mu
    return MarginFit(
        beta_hat=beta_tilde,
        margin=float(np.min((np.asarray(y)[:, None] * np.asarray(H, dtype=float)) @ beta_tilde)),
        u_hat=_offsignal_ratio(beta_tilde, mu),
        separable=True,
    )


def gmm_test_error(
    beta: np.ndarray,
    intercept: float,
    mu: np.ndarray,
    proj: Optional[EtaProjector] = None,
) -> float:
    """Exact misclassification probability of sign(γ + ⟨z, β⟩) under the GMM.

    With w = Wβ when a head is supplied (else w = β):
        err = ½·Φ(−(⟨μ, w⟩ + γ)/‖w‖) + ½·Φ(−(⟨μ, w⟩ − γ)/‖w‖),
    which collapses to Φ(−⟨μ, w⟩/‖w‖) at γ = 0.
    """
    beta = np.asarray(beta, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.linalg.norm(beta) == 0.0:
        raise DomainError("test error undefined for the zero classifier")
    if proj is not None:
        w = beta + (proj.eta / proj.rho) * float(beta @ proj.mu) * proj.mu
    else:
        w = beta
    norm = float(np.linalg.norm(w))
    signal = float(mu @ w)
    plus = gaussian_cdf(-(signal + intercept) / norm)
    minus = gaussian_cdf(-(signal - intercept) / norm)
    return 0.5 * (plus + minus)


@dataclass(frozen=True, eq=False)
class RidgeLogisticFit:
    """Minimizer of mean log(1+exp(−y(γ+zᵀβ))) + lam·‖β‖², intercept free."""

    gamma_hat: float
    beta_hat: np.ndarray
    lam: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "gamma_hat": float(self.gamma_hat),
                "beta_hat": [float(b) for b in self.beta_hat],
                "lambda": float(self.lam),
            }
        )


def ridge_logistic_fit(H: np.ndarray, y: np.ndarray, lam: float) -> RidgeLogisticFit:
    """Damped-Newton logistic regression with ℓ₂ penalty on β only.

    Deterministic from the zero start; stops at gradient norm ≤ 1e-8.  With
    lam = 0 on separable data no finite minimizer exists (the norm diverges);
    the fit emits a ConvergenceWarning and returns the current direction,
    which is still a perfect separator of the training set.
    """
    H = np.asarray(H, dtype=float)
    y = np.asarray(y, dtype=float)
    if H.ndim != 2 or y.shape != (H.shape[0],):
        raise DomainError("need H of shape (n, p) and y of shape (n,)")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DomainError("labels must be ±1")
    if lam < 0.0:
        raise DomainError(f"penalty must be nonnegative, got {lam}")
    n, p = H.shape
    X = np.hstack([np.ones((n, 1)), H])  # column 0 carries the intercept
    theta = np.zeros(p + 1)
    reg = np.full(p + 1, 2.0 * lam)
    reg[0] = 0.0

    def objective(th):
        margins = y * (X @ th)
        return float(np.mean(softplus(-margins)) + lam * float(th[1:] @ th[1:]))

    value = objective(theta)
    stationary = False
    for _ in range(200):
        margins = y * (X @ theta)
        resid = -y * expit(-margins)  # d/da of log(1+e^{-ya})
        grad = X.T @ resid / n + reg * theta
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= 1e-8:
            stationary = True
            break
        weights = expit(margins) * expit(-margins)
        hess = (X.T * weights) @ X / n + np.diag(reg)
        try:
            direction = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            direction = grad
        step = 1.0
        while step > 2.0**-40:
            cand = theta - step * direction
            cval = objective(cand)
            if cval <= value - 1e-4 * step * float(grad @ direction):
                theta, value = cand, cval
                break
            step *= 0.5
        else:
            break  # no progress at any step; objective is numerically flat
    if lam == 0.0 and float(np.min(y * (X @ theta))) > 0.0:
        # separable + unpenalized: the infimum is only attained at infinite
        # norm, so the returned coefficients are a direction, not an optimum
        warnings.warn(
            "lam = 0 on separable data has no finite minimizer; returning "
            "the fitted direction",
            ConvergenceWarning,
        )
    elif not stationary:
        warnings.warn(
            "ridge logistic fit stopped above gradient tolerance; returning "
            "the best iterate",
            ConvergenceWarning,
        )
    return RidgeLogisticFit(gamma_hat=float(theta[0]), beta_hat=theta[1:], lam=lam)


def ridge_coef_scale_root(
    lambda_n: float,
    eta: float,
    mu_norm: float,
    quad: Optional[Quadrature] = None,
) -> float:
    """Scale κ of the population-limit logistic coefficient β → κ·μ.

    κ is the positive root of the stationarity function

        κ ↦ E_G[ s(−x)² + (1−κ)·s(x)·s(−x) ] − 2·λ·κ/(1+η)²,
        x = κ‖μ‖² + κ‖μ‖·G,  s = logistic sigmoid,

    which starts at ½ at κ = 0 and crosses zero exactly once.  Solved by
    doubling the bracket then bisecting; the expectation uses Gauss–Hermite
    quadrature (order 80 unless a Quadrature is supplied).
    """
    if lambda_n < 0.0:
        raise DomainError(f"penalty must be nonnegative, got {lambda_n}")
    if not eta > -1.0:
        raise DomainError(f"eta must exceed -1, got {eta}")
    if not mu_norm > 0.0:
        raise DomainError(f"mu_norm must be positive, got {mu_norm}")

    def stationarity(kappa: float) -> float:
        return ridge_scale_stationarity(kappa, lambda_n, eta, mu_norm, quad)

    hi = 1.0
    while stationarity(hi) > 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise BracketError("no sign change below kappa = 1e6")
    return bisect_root(stationarity, 0.0, hi, tol=1e-12)


def ridge_scale_stationarity(
    kappa: float,
    lambda_n: float,
    eta: float,
    mu_norm: float,
    quad: Optional[Quadrature] = None,
) -> float:
    """The function whose positive root :func:`ridge_coef_scale_root` returns.

    Equals 1/2 at κ = 0 for every admissible parameter set.
    """
    quad = quad if quad is not None else Quadrature.gauss_hermite(80)
    shrink = 2.0 * lambda_n / (1.0 + eta) ** 2

    def integrand(g):
        x = kappa * mu_norm * mu_norm + kappa * mu_norm * g
        s_neg = expit(-x)
        return s_neg * s_neg + (1.0 - kappa) * expit(x) * s_neg

    return expect_gaussian_1d(integrand, quad) - shrink * kappa


def lowdim_asymptotic_error(mu_norm: float) -> float:
    """Limiting test error Φ(−‖μ‖) of lightly regularized logistic fits.

    Constant in the head parameter η: with p fixed and n → ∞, any penalty
    growing slower than √n leaves the error at the η-independent dominant
    term.
    """
    if not mu_norm > 0.0:
        raise DomainError(f"mu_norm must be positive, got {mu_norm}")
    return gaussian_cdf(-mu_norm)
