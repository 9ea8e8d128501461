"""Two-component Gaussian mixture features with Gaussian view augmentation.

Feature model: labels y = ±1 equiprobable, features h0 | y ~ N(y·μ, I_p).
Each feature spawns two conditionally independent "views"

    h = h0 + σ_aug·ξ,    ξ ~ N(0, A),    A = I + ρ_aug·v_aug v_augᵀ,

where ρ_aug = 0 (or no spike) recovers isotropic augmentation noise.  The
spiked draw is realized as ξ = g + (√(1+ρ_aug) − 1)·⟨g, v_aug⟩·v_aug with
g ~ N(0, I), which has exactly covariance A without forming a Cholesky factor.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .numerics import DomainError

__all__ = [
    "ShapeError",
    "Spike",
    "GmmConfig",
    "LabeledSample",
    "AugmentedPair",
    "NegativeDiffLaw",
    "derive_seed",
    "sample_dataset",
    "sample_feature_matrix",
    "sample_augmented_pair",
    "augment_views",
    "effective_negative_diff_moments",
]

_U64 = (1 << 64) - 1


class ShapeError(ValueError):
    """Array dimensions are inconsistent with the configuration."""


def derive_seed(base_seed: int, *tags) -> int:
    """Stable 64-bit sub-seed from a base seed and any hashable tags.

    Uses blake2b over the repr string (never Python's salted hash()), so
    parallel workers and re-runs derive identical streams.
    """
    key = "|".join([str(int(base_seed) & _U64)] + [repr(t) for t in tags])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _as_unit(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if abs(float(np.linalg.norm(v)) - 1.0) > 1e-12:
        raise DomainError(f"{name} must be a unit vector (‖·‖=1 within 1e-12)")
    return v


@dataclass(frozen=True, eq=False)
class Spike:
    """One-spike augmentation anisotropy: strength ρ_aug along direction v_aug."""

    rho_aug: float
    v_aug: np.ndarray

    def __post_init__(self) -> None:
        if self.rho_aug < 0.0:
            raise DomainError(f"rho_aug must be >= 0, got {self.rho_aug}")
        object.__setattr__(self, "v_aug", _as_unit(self.v_aug, "v_aug"))


@dataclass(frozen=True, eq=False)
class GmmConfig:
    """Model parameters: dimension p, class-mean half-difference μ, noise levels."""

    p: int
    mu: np.ndarray
    sigma_aug: float
    spike: Optional[Spike] = None

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float)
        if self.p < 2:
            raise DomainError(f"dimension must be >= 2, got p={self.p}")
        if mu.shape != (self.p,):
            raise ShapeError(f"mu must have shape ({self.p},), got {mu.shape}")
        if not np.all(np.isfinite(mu)):
            raise DomainError("mu contains non-finite entries")
        if self.sigma_aug < 0.0:
            raise DomainError(f"sigma_aug must be >= 0, got {self.sigma_aug}")
        if self.spike is not None:
            if self.p < 3:
                raise DomainError("spiked augmentation requires p >= 3")
            if self.spike.v_aug.shape != (self.p,):
                raise ShapeError("v_aug dimension does not match p")
        object.__setattr__(self, "mu", mu)

    # -- derived quantities ------------------------------------------------

    @property
    def rho(self) -> float:
        """Squared signal strength ‖μ‖²."""
        return float(self.mu @ self.mu)

    @property
    def mu_bar(self) -> np.ndarray:
        """Unit signal direction μ/‖μ‖ (requires μ ≠ 0)."""
        nrm = float(np.linalg.norm(self.mu))
        if nrm == 0.0:
            raise DomainError("mu_bar undefined for μ = 0")
        return self.mu / nrm

    @property
    def has_spike(self) -> bool:
        return self.spike is not None

    @property
    def rho_aug(self) -> float:
        return 0.0 if self.spike is None else float(self.spike.rho_aug)

    @property
    def v_aug(self) -> np.ndarray:
        if self.spike is None:
            raise DomainError("no spike direction configured")
        return self.spike.v_aug

    @property
    def r(self) -> float:
        """Cosine ⟨μ̄, v_aug⟩ between signal and spike directions."""
        return float(self.mu_bar @ self.v_aug)

    @property
    def mu_perp(self) -> np.ndarray:
        """Unit vector in span(μ̄, v_aug) orthogonal to μ̄.

        Oriented so that r·⟨μ_⊥, v_aug⟩ ≥ 0, with sign(0) taken as +1.
        Undefined when μ̄ and v_aug are collinear.
        """
        r = self.r
        w = self.v_aug - r * self.mu_bar
        nrm = float(np.linalg.norm(w))
        if nrm < 1e-8:
            raise DomainError("mu_perp undefined: μ̄ and v_aug are collinear")
        sgn = -1.0 if r < 0.0 else 1.0
        return sgn * w / nrm

    def aug_covariance(self) -> np.ndarray:
        """Covariance of one view's noise, σ²_aug·(I + ρ_aug v v ᵀ)."""
        cov = np.eye(self.p)
        if self.spike is not None:
            cov += self.spike.rho_aug * np.outer(self.spike.v_aug, self.spike.v_aug)
        return (self.sigma_aug**2) * cov


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """One latent feature h0 with its class label y ∈ {−1, +1}."""

    h0: np.ndarray
    y: int

    def __post_init__(self) -> None:
        if self.y not in (-1, 1):
            raise DomainError(f"label must be ±1, got {self.y}")
        object.__setattr__(self, "h0", np.asarray(self.h0, dtype=float))


@dataclass(frozen=True, eq=False)
class AugmentedPair:
    """Two augmented views of the same parent feature (a positive pair)."""

    h_plus_a: np.ndarray
    h_plus_b: np.ndarray
    parent: LabeledSample


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & _U64)


def sample_feature_matrix(cfg: GmmConfig, n: int, seed: int):
    """Matrix form of sample_dataset: returns (H0 of shape (n,p), y of shape (n,))."""
    if n < 1:
        raise DomainError(f"need n >= 1 samples, got {n}")
    rng = _rng(seed)
    y = rng.integers(0, 2, size=n) * 2 - 1
    h0 = y[:, None] * cfg.mu[None, :] + rng.standard_normal((n, cfg.p))
    return h0, y.astype(int)


def sample_dataset(cfg: GmmConfig, n: int, seed: int) -> list[LabeledSample]:
    """Draw n labeled features h0 = y·μ + N(0, I); deterministic in `seed`."""
    h0, y = sample_feature_matrix(cfg, n, seed)
    return [LabeledSample(h0=h0[i], y=int(y[i])) for i in range(n)]


def _spiked_noise(cfg: GmmConfig, g: np.ndarray) -> np.ndarray:
    """Map N(0,I) draws to N(0, A) draws, rowwise; O(p) per sample."""
    if cfg.spike is None or cfg.spike.rho_aug == 0.0:
        return g
    v = cfg.spike.v_aug
    gain = np.sqrt(1.0 + cfg.spike.rho_aug) - 1.0
    coef = g @ v
    return g + gain * np.multiply.outer(coef, v)


def sample_augmented_pair(cfg: GmmConfig, parent: LabeledSample, seed: int) -> AugmentedPair:
    """Two conditionally independent views h0 + σ_aug·N(0, A) of one parent."""
    if parent.h0.shape != (cfg.p,):
        raise ShapeError(
            f"parent has dimension {parent.h0.shape[0]}, config expects {cfg.p}"
        )
    rng = _rng(seed)
    g = rng.standard_normal((2, cfg.p))
    noise = cfg.sigma_aug * _spiked_noise(cfg, g)
    return AugmentedPair(
        h_plus_a=parent.h0 + noise[0], h_plus_b=parent.h0 + noise[1], parent=parent
    )


def augment_views(cfg: GmmConfig, h0: np.ndarray, seed: int):
    """Vectorized two-view augmentation of an (n,p) feature matrix.

    Returns (A, B), each (n,p), with independent noise per view and per row.
    """
    h0 = np.atleast_2d(np.asarray(h0, dtype=float))
    if h0.shape[1] != cfg.p:
        raise ShapeError(f"features have dimension {h0.shape[1]}, config expects {cfg.p}")
    rng = _rng(seed)
    ga = rng.standard_normal(h0.shape)
    gb = rng.standard_normal(h0.shape)
    return (
        h0 + cfg.sigma_aug * _spiked_noise(cfg, ga),
        h0 + cfg.sigma_aug * _spiked_noise(cfg, gb),
    )


@dataclass(frozen=True, eq=False)
class NegativeDiffLaw:
    """Mixture law of the difference h − h⁻ between two independent views.

    Equal in distribution to  (atom drawn with atom_weights) + N(0, gaussian_cov):
    atoms sit at 0 (same class, weight ½) and ±2μ (opposite classes, weight ¼
    each); the Gaussian part pools both features' unit noise and both views'
    augmentation noise.
    """

    atom_weights: tuple
    atom_locations: np.ndarray  # rows: 0, +2μ, −2μ
    gaussian_cov: np.ndarray


def effective_negative_diff_moments(cfg: GmmConfig) -> NegativeDiffLaw:
    """Three-atom + Gaussian decomposition of the negative-pair difference."""
    atoms = np.vstack([np.zeros(cfg.p), 2.0 * cfg.mu, -2.0 * cfg.mu])
    cov = 2.0 * (np.eye(cfg.p) + cfg.aug_covariance())
    return NegativeDiffLaw(
        atom_weights=(0.5, 0.25, 0.25), atom_locations=atoms, gaussian_cov=cov
    )
