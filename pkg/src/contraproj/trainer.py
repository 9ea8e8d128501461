"""Gradient training of the linear projection head, plus spectral diagnostics.

Two paths share one loop.  The experimental path minimizes the sampled
two-view contrastive loss with fresh augmentations every epoch; the
theory-verification path descends a closed-form objective (population or
conditional-on-features) whose gradient is taken by central finite
differences, so it is restricted to small head dimensions.

Every objective here is invariant to rescaling W, so gradients are tangent
to the scale orbit and plain fixed-step descent (with halving when the loss
goes up) is enough at these problem sizes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .gmm import GmmConfig, LabeledSample, augment_views, derive_seed
from .loss import (
    LossContext,
    Projector,
    embedding_second_moment,
    empirical_simclr_grad,
    empirical_simclr_loss,
    finite_sample_loss,
    population_loss,
)
from .numerics import DomainError
from .phase import expansion_measure

__all__ = [
    "EMPIRICAL_SIMCLR",
    "POPULATION_CLOSED_FORM",
    "FINITE_SAMPLE_CLOSED_FORM",
    "ORTHOGONAL_INIT",
    "IDENTITY_INIT",
    "TrainingDivergedError",
    "TrainConfig",
    "TrainTrace",
    "SpectralReport",
    "init_orthogonal",
    "train_projector",
    "cumulative_alignment_scores",
    "spectral_report",
]

EMPIRICAL_SIMCLR = "EmpiricalSimclr"
POPULATION_CLOSED_FORM = "PopulationClosedForm"
FINITE_SAMPLE_CLOSED_FORM = "FiniteSampleClosedForm"
_OBJECTIVES = (EMPIRICAL_SIMCLR, POPULATION_CLOSED_FORM, FINITE_SAMPLE_CLOSED_FORM)

ORTHOGONAL_INIT = "Orthogonal"
IDENTITY_INIT = "Identity"

# Central differences touch every W entry twice; past this size the
# closed-form path would dominate the runtime of any sweep that uses it.
_MAX_FD_DIM = 20

_CONVERGENCE_WINDOW = 5
_CONVERGENCE_RTOL = 1e-9


class TrainingDivergedError(RuntimeError):
    """Loss or iterate became non-finite; carries the offending epoch."""

    def __init__(self, epoch: int, message: str) -> None:
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True, eq=False)
class TrainConfig:
    """Optimizer settings.  ``init`` is a named scheme or an explicit matrix."""

    step_size: float
    epochs: int
    batch_size: int = 64
    seed: int = 0
    objective: str = EMPIRICAL_SIMCLR
    init: Union[str, np.ndarray] = ORTHOGONAL_INIT

    def __post_init__(self) -> None:
        if not self.step_size > 0.0:
            raise DomainError(f"step_size must be positive, got {self.step_size}")
        if self.epochs < 1:
            raise DomainError(f"epochs must be >= 1, got {self.epochs}")
        if self.objective not in _OBJECTIVES:
            raise DomainError(f"unknown objective {self.objective!r}")
        if self.objective == EMPIRICAL_SIMCLR and self.batch_size < 2:
            raise DomainError("batch_size must be >= 2 for the sampled objective")
        if isinstance(self.init, str):
            if self.init not in (ORTHOGONAL_INIT, IDENTITY_INIT):
                raise DomainError(f"unknown init scheme {self.init!r}")
        else:
            w0 = np.asarray(self.init, dtype=float)
            if w0.ndim != 2 or w0.shape[0] != w0.shape[1]:
                raise DomainError("explicit init must be a square matrix")


@dataclass(frozen=True, eq=False)
class TrainTrace:
    """Per-epoch record of a run.  All sequences share one length.

    ``stopped_by`` is "converged" when the relative loss change stayed below
    1e-9 across five consecutive epochs, else "budget".
    """

    loss_per_epoch: Tuple[float, ...]
    t_per_epoch: Tuple[float, ...]
    T_per_epoch: Tuple[float, ...]
    final_projector: Projector
    stopped_by: str

    @property
    def epochs_run(self) -> int:
        return len(self.loss_per_epoch)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "t", "T"])
            rows = zip(self.loss_per_epoch, self.t_per_epoch, self.T_per_epoch)
            for epoch, (lv, tv, Tv) in enumerate(rows, start=1):
                writer.writerow([epoch, repr(lv), repr(tv), repr(Tv)])


def init_orthogonal(p: int, seed: int) -> Projector:
    """Haar-random orthogonal head via QR with sign-corrected R diagonal."""
    if p < 2:
        raise DomainError(f"head dimension must be >= 2, got {p}")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return Projector(q * signs)


def _as_feature_matrix(dataset, p: int) -> np.ndarray:
    if isinstance(dataset, np.ndarray):
        h = np.asarray(dataset, dtype=float)
    else:
        h = np.asarray([s.h0 for s in dataset], dtype=float)
    if h.ndim != 2 or h.shape[1] != p:
        raise DomainError(f"dataset must be (n, {p}), got shape {h.shape}")
    return h


def _fd_gradient(fun, W: np.ndarray, step: float = 1e-6) -> np.ndarray:
    grad = np.empty_like(W)
    for i in range(W.shape[0]):
        for j in range(W.shape[1]):
            h = step * max(1.0, abs(W[i, j]))
            orig = W[i, j]
            W[i, j] = orig + h
            up = fun(W)
            W[i, j] = orig - h
            down = fun(W)
            W[i, j] = orig
            grad[i, j] = (up - down) / (2.0 * h)
    return grad


def _check_finite(value: float, W: np.ndarray, epoch: int) -> None:
    if not np.isfinite(value) or not np.all(np.isfinite(W)):
        raise TrainingDivergedError(
            epoch, f"training diverged at epoch {epoch}: non-finite loss or iterate"
        )


def _record(W: np.ndarray, cfg: GmmConfig) -> Tuple[float, float]:
    fro2 = float(np.sum(W * W))
    t = fro2 / embedding_second_moment(W, cfg)
    return t, expansion_measure(W, cfg.mu)


def _converged(losses) -> bool:
    if len(losses) < _CONVERGENCE_WINDOW + 1:
        return False
    tail = losses[-(_CONVERGENCE_WINDOW + 1):]
    scale = max(1.0, abs(tail[-1]))
    return max(tail) - min(tail) <= _CONVERGENCE_RTOL * scale


def train_projector(
    cfg: GmmConfig,
    ctx: LossContext,
    tc: TrainConfig,
    dataset: Optional[Union[Sequence[LabeledSample], np.ndarray]] = None,
) -> TrainTrace:
    """Minimize the selected objective over W and trace (loss, t, T) per epoch.

    The sampled objective draws fresh augmentation pairs every epoch and is
    stochastic, so its safeguard halves the step only on a gross (>5%
    relative) increase; the closed-form objectives halve-and-retry within the
    epoch, which keeps their recorded trace nonincreasing.
    """
    if ctx.cfg is not cfg and (
        ctx.cfg.p != cfg.p
        or ctx.cfg.sigma_aug != cfg.sigma_aug
        or not np.array_equal(ctx.cfg.mu, cfg.mu)
    ):
        raise DomainError("loss context was built for a different model")

    if isinstance(tc.init, str):
        if tc.init == ORTHOGONAL_INIT:
            W = init_orthogonal(cfg.p, derive_seed(tc.seed, "init")).W.copy()
        else:
            W = np.eye(cfg.p)
    else:
        W = np.asarray(tc.init, dtype=float).copy()
        if W.shape != (cfg.p, cfg.p):
            raise DomainError(f"explicit init must be {cfg.p}x{cfg.p}")

    needs_data = tc.objective in (EMPIRICAL_SIMCLR, FINITE_SAMPLE_CLOSED_FORM)
    if needs_data and dataset is None:
        raise DomainError(f"objective {tc.objective} requires a dataset")
    H0 = _as_feature_matrix(dataset, cfg.p) if needs_data else None

    losses: list = []
    ts: list = []
    Ts: list = []
    stopped_by = "budget"

    if tc.objective == EMPIRICAL_SIMCLR:
        rng = np.random.default_rng(derive_seed(tc.seed, "shuffle"))
        step = tc.step_size
        min_step = tc.step_size * 2.0**-30
        prev = np.inf
        for epoch in range(tc.epochs):
            A, B = augment_views(cfg, H0, derive_seed(tc.seed, "epoch", epoch))
            order = rng.permutation(H0.shape[0])
            total, anchors = 0.0, 0
            for lo in range(0, len(order), tc.batch_size):
                idx = order[lo : lo + tc.batch_size]
                if len(idx) < 2:
                    continue
                views = (A[idx], B[idx])
                total += empirical_simclr_loss(W, views, ctx.tau)
                anchors += 2 * len(idx)
                W -= step * empirical_simclr_grad(W, views, ctx.tau)
            epoch_loss = total / anchors
            _check_finite(epoch_loss, W, epoch)
            if epoch_loss > prev + 0.05 * max(1.0, abs(prev)) and step > min_step:
                step *= 0.5
            prev = epoch_loss
            losses.append(epoch_loss)
            t, T = _record(W, cfg)
            ts.append(t)
            Ts.append(T)
            if _converged(losses):
                stopped_by = "converged"
                break
    else:
        if cfg.p > _MAX_FD_DIM:
            raise DomainError(
                "closed-form objectives use finite-difference gradients and are "
                f"limited to p <= {_MAX_FD_DIM}, got p = {cfg.p}"
            )
        if tc.objective == POPULATION_CLOSED_FORM:
            fun = lambda M: population_loss(M, ctx).total  # noqa: E731
        else:
            fun = lambda M: finite_sample_loss(M, H0, ctx)  # noqa: E731
        step = tc.step_size
        current = fun(W)
        _check_finite(current, W, 0)
        for epoch in range(tc.epochs):
            grad = _fd_gradient(fun, W)
            while True:
                candidate = W - step * grad
                value = fun(candidate)
                if np.isfinite(value) and value <= current + 1e-12 * max(
                    1.0, abs(current)
                ):
                    W, current = candidate, value
                    break
                step *= 0.5
                if step < tc.step_size * 2.0**-60:
                    break  # no descent at any step; keep W and record as-is
            _check_finite(current, W, epoch)
            losses.append(current)
            t, T = _record(W, cfg)
            ts.append(t)
            Ts.append(T)
            if _converged(losses):
                stopped_by = "converged"
                break

    return TrainTrace(
        loss_per_epoch=tuple(losses),
        t_per_epoch=tuple(ts),
        T_per_epoch=tuple(Ts),
        final_projector=Projector(W),
        stopped_by=stopped_by,
    )


def cumulative_alignment_scores(w, direction: np.ndarray) -> np.ndarray:
    """Running energy of a direction in the head's top right-singular basis.

    Entry i is Σ_{j≤i} ⟨v_j, d̄⟩² for the unit direction d̄, so the sequence
    is nondecreasing and ends at 1.  A head that keeps a direction in its top
    singular spaces front-loads the sequence.
    """
    proj = w if isinstance(w, Projector) else Projector(np.asarray(w, dtype=float))
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0.0:
        raise DomainError("alignment scores are undefined for the zero direction")
    coords = proj.svd.right_vectors.T @ (d / norm)
    return np.cumsum(coords**2)


@dataclass(frozen=True)
class SpectralReport:
    """Serializable spectrum + alignment summary of a single head."""

    singular_values: Tuple[float, ...]
    mu_scores: Tuple[float, ...]
    v_aug_scores: Optional[Tuple[float, ...]]
    expansion: float


def spectral_report(w, mu: np.ndarray, v_aug: Optional[np.ndarray] = None) -> SpectralReport:
    """Bundle singular values, alignment scores, and the expansion measure."""
    proj = w if isinstance(w, Projector) else Projector(np.asarray(w, dtype=float))
    mu = np.asarray(mu, dtype=float)
    scores_aug = None
    if v_aug is not None:
        scores_aug = tuple(float(x) for x in cumulative_alignment_scores(proj, v_aug))
    return SpectralReport(
        singular_values=tuple(float(s) for s in proj.svd.singular_values),
        mu_scores=tuple(float(x) for x in cumulative_alignment_scores(proj, mu)),
        v_aug_scores=scores_aug,
        expansion=expansion_measure(proj, mu),
    )
