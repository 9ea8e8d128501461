"""Contrastive losses for linear projectors on Gaussian-mixture features.

Four evaluation paths, all consuming the same Projector/GmmConfig pair:

* empirical_simclr_loss / empirical_simclr_grad — the canonical cosine-similarity
  InfoNCE objective on a finite batch of augmented pairs (two views per parent,
  summed over all 2n anchors).
* population_loss — exact closed form of the modified (population-normalized)
  contrastive loss for the homogeneous model, split into an alignment part and
  a uniformity part.
* approx_loss — the large-signal first-order surrogate, a function of the single
  scalar t = ‖W‖²_F/α only; always a lower bound on the exact loss.
* finite_sample_loss — closed form of the modified loss conditional on the n
  observed features (augmentations and the negatives' feature noise integrated
  out exactly).

Throughout, α = E‖Wh‖² = (1+σ²_aug)‖W‖²_F + ‖Wμ‖² (+ σ²_aug·ρ_aug·‖W v_aug‖²
with a spiked augmentation) is the normalization that makes similarities
scale-free:  sim(z, z') = −‖z−z'‖²/(2α).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .gmm import AugmentedPair, GmmConfig, LabeledSample, ShapeError
from .numerics import DomainError, SvdTriple, svd_descending

__all__ = [
    "DegenerateEmbeddingError",
    "WrongModelError",
    "Projector",
    "LossContext",
    "LossBreakdown",
    "embedding_second_moment",
    "empirical_simclr_loss",
    "empirical_simclr_grad",
    "population_loss",
    "approx_loss",
    "sandwich_upper_delta",
    "finite_sample_loss",
]

LOG2 = math.log(2.0)


class DegenerateEmbeddingError(ValueError):
    """A view was mapped to the zero vector; cosine similarity is undefined."""


class WrongModelError(ValueError):
    """The requested closed form does not cover this augmentation model."""


@dataclass(frozen=True, eq=False)
class Projector:
    """A p×p linear projection head z = W·h with a cached deterministic SVD."""

    W: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.W, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DomainError(f"projector must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise DomainError("projector contains non-finite entries")
        if float(np.linalg.norm(w)) == 0.0:
            raise DomainError("zero projector rejected: ‖W‖_F must be positive")
        object.__setattr__(self, "W", w)

    @property
    def p(self) -> int:
        return self.W.shape[0]

    @cached_property
    def svd(self) -> SvdTriple:
        return svd_descending(self.W)

    @property
    def frobenius_sq(self) -> float:
        return float(np.sum(self.W * self.W))


@dataclass(frozen=True, eq=False)
class LossContext:
    """Model + temperature bundle shared by every loss evaluation."""

    cfg: GmmConfig
    tau: float

    def __post_init__(self) -> None:
        if not self.tau > 0.0:
            raise DomainError(f"temperature must be positive, got {self.tau}")


@dataclass(frozen=True)
class LossBreakdown:
    """Alignment/uniformity split of a closed-form loss, with α and t attached."""

    align: float
    unif: float
    total: float
    alpha: float
    t: float


def _as_matrix(w: Union[Projector, np.ndarray]) -> np.ndarray:
    return w.W if isinstance(w, Projector) else np.asarray(w, dtype=float)


def embedding_second_moment(w: Union[Projector, np.ndarray], cfg: GmmConfig) -> float:
    """α = E‖Wh‖² under the (possibly spiked) augmentation model."""
    W = _as_matrix(w)
    if W.shape[1] != cfg.p:
        raise ShapeError(f"projector acts on dimension {W.shape[1]}, model has {cfg.p}")
    sig2 = cfg.sigma_aug**2
    alpha = (1.0 + sig2) * float(np.sum(W * W)) + float(np.sum((W @ cfg.mu) ** 2))
    if cfg.has_spike:
        alpha += sig2 * cfg.rho_aug * float(np.sum((W @ cfg.v_aug) ** 2))
    return alpha


# ---------------------------------------------------------------------------
# Empirical SimCLR (finite batch, cosine similarity, two views per parent)
# ---------------------------------------------------------------------------


def _stack_views(w: Union[Projector, np.ndarray], batch):
    """Interleave two views per parent into one (2n, p) matrix and embed it.

    ``batch`` is either a sequence of AugmentedPair or a tuple (A, B) of
    (n, p) view matrices (row i of A and of B sharing parent i).
    """
    W = _as_matrix(w)
    if isinstance(batch, tuple) and len(batch) == 2:
        A = np.asarray(batch[0], dtype=float)
        B = np.asarray(batch[1], dtype=float)
        if A.shape != B.shape or A.ndim != 2:
            raise ShapeError("view matrices must share one (n, p) shape")
        if A.shape[0] < 2:
            raise DomainError("need at least two parents (one negative) in a batch")
        H = np.empty((2 * A.shape[0], A.shape[1]), dtype=float)
        H[0::2] = A
        H[1::2] = B
    else:
        if len(batch) < 2:
            raise DomainError("need at least two parents (one negative) in a batch")
        views = []
        for pair in batch:
            views.append(pair.h_plus_a)
            views.append(pair.h_plus_b)
        H = np.asarray(views, dtype=float)
    if H.shape[1] != W.shape[1]:
        raise ShapeError("batch dimension does not match projector")
    Z = H @ W.T
    norms = np.linalg.norm(Z, axis=1)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise DegenerateEmbeddingError("a view embeds to the zero vector under W")
    return H, Z, norms


def empirical_simclr_loss(
    w: Union[Projector, np.ndarray],
    batch: Union[Sequence[AugmentedPair], tuple],
    tau: float,
) -> float:
    """Canonical two-view contrastive loss, summed over all 2n anchors.

    Per anchor s with positive partner s⁺:
        −sim(z_s, z_{s⁺})/τ + log Σ_{s̄ ≠ s} exp(sim(z_s̄, z_s)/τ),
    with sim the cosine similarity.  The anchor's own positive stays inside
    the log-sum, matching the cross-entropy form of the loss.  ``batch`` may
    be a sequence of AugmentedPair or a tuple of two (n, p) view matrices.
    """
    if not tau > 0.0:
        raise DomainError(f"temperature must be positive, got {tau}")
    _, Z, norms = _stack_views(w, batch)
    zhat = Z / norms[:, None]
    sims = zhat @ zhat.T
    m = sims.shape[0]
    logits = sims / tau
    np.fill_diagonal(logits, -np.inf)
    lse = logsumexp(logits, axis=1)
    pos = np.arange(m) ^ 1  # views are interleaved (a0, b0, a1, b1, ...)
    return float(np.sum(lse - sims[np.arange(m), pos] / tau))


def empirical_simclr_grad(
    w: Union[Projector, np.ndarray],
    batch: Union[Sequence[AugmentedPair], tuple],
    tau: float,
) -> np.ndarray:
    """∂/∂W of empirical_simclr_loss, in closed form.

    Chain rule through the cosine normalization: with ĝ_s the gradient w.r.t.
    the normalized embedding, ∂L/∂z_s = (ĝ_s − ⟨ĝ_s, ẑ_s⟩ ẑ_s)/‖z_s‖, and
    ∂L/∂W = Σ_s (∂L/∂z_s) h_sᵀ.  The result is tangent to the scale orbit:
    ⟨grad, W⟩ = 0 up to roundoff.
    """
    if not tau > 0.0:
        raise DomainError(f"temperature must be positive, got {tau}")
    H, Z, norms = _stack_views(w, batch)
    zhat = Z / norms[:, None]
    sims = zhat @ zhat.T
    m = sims.shape[0]
    logits = sims / tau
    np.fill_diagonal(logits, -np.inf)
    pos = np.arange(m) ^ 1
    # C[s, k] = ∂L/∂sims[s, k]: softmax of anchor s's log-sum minus the
    # indicator of its positive partner, all scaled by 1/τ.
    C = np.exp(logits - logsumexp(logits, axis=1)[:, None])
    C[np.arange(m), pos] -= 1.0
    C /= tau
    Csym = C + C.T
    np.fill_diagonal(Csym, 0.0)
    ghat = Csym @ zhat
    proj = np.sum(ghat * zhat, axis=1)
    dz = (ghat - proj[:, None] * zhat) / norms[:, None]
    return dz.T @ H


# ---------------------------------------------------------------------------
# Closed-form population loss (homogeneous augmentation)
# ---------------------------------------------------------------------------


def _require_homogeneous(cfg: GmmConfig, what: str) -> None:
    if cfg.has_spike and cfg.rho_aug > 0.0:
        raise WrongModelError(
            f"{what} covers isotropic augmentation only; "
            "use the spiked-augmentation routines for this model"
        )


def population_loss(w: Union[Projector, np.ndarray], ctx: LossContext) -> LossBreakdown:
    """Exact population loss split into alignment + uniformity.

    alignment = σ²_aug·‖W‖²_F/(τα);
    uniformity = −log 2 − ½·Σ_j log(1 + 2(1+σ²_aug)σ_j²/(τα))
                 + log(1 + exp(−Σ_j 2σ_j²⟨μ, v_j⟩²/(2(1+σ²_aug)σ_j² + τα))),
    where σ_j, v_j are W's singular values and right singular vectors.
    """
    _require_homogeneous(ctx.cfg, "population_loss")
    proj = w if isinstance(w, Projector) else Projector(np.asarray(w, dtype=float))
    cfg, tau = ctx.cfg, ctx.tau
    sig2 = cfg.sigma_aug**2
    alpha = embedding_second_moment(proj, cfg)
    fro2 = proj.frobenius_sq
    s2 = proj.svd.singular_values**2
    m2 = (proj.svd.right_vectors.T @ cfg.mu) ** 2

    align = sig2 * fro2 / (tau * alpha)
    unif_spread = -0.5 * float(np.sum(np.log1p(2.0 * (1.0 + sig2) * s2 / (tau * alpha))))
    S = float(np.sum(2.0 * s2 * m2 / (2.0 * (1.0 + sig2) * s2 + tau * alpha)))
    unif_gap = float(np.log1p(np.exp(-S)))
    unif = -LOG2 + unif_spread + unif_gap
    return LossBreakdown(
        align=align,
        unif=unif,
        total=align + unif,
        alpha=alpha,
        t=fro2 / alpha,
    )


def feasible_t_interval(cfg: GmmConfig):
    """Range of t = ‖W‖²_F/α over all nonzero W (homogeneous model)."""
    sig2 = cfg.sigma_aug**2
    return 1.0 / (1.0 + sig2 + cfg.rho), 1.0 / (1.0 + sig2)


def approx_loss(w_or_t, ctx: LossContext) -> float:
    """First-order surrogate  −t/τ + log(½ + ½·exp(−2/τ + 2(1+σ²_aug)t/τ)).

    Accepts a Projector/matrix (t computed from it) or the scalar t directly;
    scalars must lie in the feasible interval of t up to 1e-9 slack.
    """
    _require_homogeneous(ctx.cfg, "approx_loss")
    cfg, tau = ctx.cfg, ctx.tau
    if isinstance(w_or_t, (Projector, np.ndarray)):
        W = _as_matrix(w_or_t)
        t = float(np.sum(W * W)) / embedding_second_moment(W, cfg)
    else:
        t = float(w_or_t)
        lo, hi = feasible_t_interval(cfg)
        if t < lo - 1e-9 or t > hi + 1e-9:
            raise DomainError(
                f"t={t!r} outside the feasible interval [{lo!r}, {hi!r}] (±1e-9)"
            )
    sig2 = cfg.sigma_aug**2
    arg = (-2.0 + 2.0 * (1.0 + sig2) * t) / tau
    return -t / tau + float(np.log1p(np.exp(arg))) - LOG2


def sandwich_upper_delta(w: Union[Projector, np.ndarray], ctx: LossContext) -> float:
    """Width Δ(W) ≥ 0 with  approx ≤ exact ≤ approx + Δ.

    Δ = Σ_j (1+σ²_aug)²σ_j⁴/(τα)²
        + exp(−‖Wμ‖²/(τα))·[exp(Σ_j 4(1+σ²_aug)σ_j⁴⟨μ, v_j⟩²/(τα)²) − 1].
    """
    _require_homogeneous(ctx.cfg, "sandwich_upper_delta")
    proj = w if isinstance(w, Projector) else Projector(np.asarray(w, dtype=float))
    cfg, tau = ctx.cfg, ctx.tau
    r = 1.0 + cfg.sigma_aug**2
    alpha = embedding_second_moment(proj, cfg)
    s2 = proj.svd.singular_values**2
    m2 = (proj.svd.right_vectors.T @ cfg.mu) ** 2
    ta = tau * alpha
    quad = float(np.sum((r * s2 / ta) ** 2))
    wmu2 = float(np.sum((proj.W @ cfg.mu) ** 2))
    tail = math.exp(-wmu2 / ta) * float(np.expm1(np.sum(4.0 * r * s2 * s2 * m2 / (ta * ta))))
    return quad + tail


# ---------------------------------------------------------------------------
# Finite-sample closed form (anchors held fixed, everything else integrated)
# ---------------------------------------------------------------------------


def finite_sample_loss(
    w: Union[Projector, np.ndarray],
    dataset: Union[Sequence[LabeledSample], np.ndarray],
    ctx: LossContext,
) -> float:
    """Modified contrastive loss conditional on the observed features.

    The anchor's augmentation and the negative's feature + augmentation noise
    (total Gaussian covariance (1+2σ²_aug)·I around the class means) are
    integrated out in closed form; only the empirical average over anchors
    remains.  With M = (I + (1+2σ²_aug)/(τα)·WᵀW)⁻¹ and class centers ±μ:

        loss = −log 2 + σ²_aug‖W‖²_F/(τα) + ½·log det M + log E_n[S(h₀)],
        S(h₀) = Σ_± exp(−(h₀ ∓ μ)ᵀ(I − M)(h₀ ∓ μ)/(2(1+2σ²_aug))).
    """
    _require_homogeneous(ctx.cfg, "finite_sample_loss")
    proj = w if isinstance(w, Projector) else Projector(np.asarray(w, dtype=float))
    cfg, tau = ctx.cfg, ctx.tau
    if isinstance(dataset, np.ndarray):
        h0 = np.atleast_2d(np.asarray(dataset, dtype=float))
    else:
        if len(dataset) == 0:
            raise DomainError("dataset must contain at least one sample")
        h0 = np.asarray([s.h0 for s in dataset], dtype=float)
    if h0.shape[1] != cfg.p:
        raise ShapeError("dataset dimension does not match the model")

    sig2 = cfg.sigma_aug**2
    kappa = 1.0 + 2.0 * sig2
    alpha = embedding_second_moment(proj, cfg)
    atil = kappa * proj.svd.singular_values**2 / (tau * alpha)
    half_logdet_m = -0.5 * float(np.sum(np.log1p(atil)))
    # (I − M) = V·diag(ã/(1+ã))·Vᵀ ; quadratic-form weights after the V-rotation
    weights = (atil / (1.0 + atil)) / (2.0 * kappa)
    V = proj.svd.right_vectors
    dplus = (h0 - cfg.mu) @ V
    dminus = (h0 + cfg.mu) @ V
    qplus = dplus * dplus @ weights
    qminus = dminus * dminus @ weights
    log_mean_s = float(logsumexp(np.concatenate([-qplus, -qminus]))) - math.log(
        h0.shape[0]
    )
    return -LOG2 + sig2 * proj.frobenius_sq / (tau * alpha) + half_logdet_m + log_mean_s
