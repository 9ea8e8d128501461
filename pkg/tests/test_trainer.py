"""Trainer tests: descent paths, traces, spectral diagnostics."""

import csv
import warnings

import numpy as np
import pytest

from contraproj import (
    DomainError,
    GmmConfig,
    LossContext,
    PhaseConfig,
    POPULATION_CLOSED_FORM,
    FINITE_SAMPLE_CLOSED_FORM,
    TrainConfig,
    TrainingDivergedError,
    classify_regime,
    cumulative_alignment_scores,
    init_orthogonal,
    sample_feature_matrix,
    spectral_report,
    train_projector,
)


def expansion_setup(tau):
    p = 50
    mu = np.zeros(p)
    mu[0] = 5.0
    cfg = GmmConfig(p=p, mu=mu, sigma_aug=1.0)
    H0, _ = sample_feature_matrix(cfg, 2000, seed=7)
    return cfg, LossContext(cfg, tau=tau), H0


# ----------------------------------------------------------- initialization


def test_init_orthogonal():
    pr = init_orthogonal(6, seed=42)
    assert np.abs(pr.W.T @ pr.W - np.eye(6)).max() < 1e-12
    assert np.array_equal(pr.W, init_orthogonal(6, seed=42).W)
    assert not np.array_equal(pr.W, init_orthogonal(6, seed=43).W)
    with pytest.raises(DomainError):
        init_orthogonal(1, seed=0)


def test_train_config_validation():
    with pytest.raises(DomainError):
        TrainConfig(step_size=0.0, epochs=10)
    with pytest.raises(DomainError):
        TrainConfig(step_size=0.1, epochs=0)
    with pytest.raises(DomainError):
        TrainConfig(step_size=0.1, epochs=10, objective="Adam")
    with pytest.raises(DomainError):
        TrainConfig(step_size=0.1, epochs=10, batch_size=1)
    with pytest.raises(DomainError):
        TrainConfig(step_size=0.1, epochs=10, init="Xavier")
    with pytest.raises(DomainError):
        TrainConfig(step_size=0.1, epochs=10, init=np.zeros(3))


# ----------------------------------------------------------- empirical path


def test_empirical_training_reaches_expansion():
    # hot temperature: the head should end up concentrated on the mean
    cfg, ctx, H0 = expansion_setup(tau=5.0)
    tr = train_projector(cfg, ctx, TrainConfig(step_size=0.05, epochs=50, seed=3), H0)
    assert tr.T_per_epoch[0] < 0.5  # random init starts uncommitted
    assert tr.T_per_epoch[-1] > 0.9
    assert tr.epochs_run == len(tr.loss_per_epoch) == len(tr.t_per_epoch)


def test_empirical_training_stays_shrunk_when_cold():
    cfg, ctx, H0 = expansion_setup(tau=0.3)
    tr = train_projector(cfg, ctx, TrainConfig(step_size=0.05, epochs=50, seed=3), H0)
    assert tr.T_per_epoch[-1] < 0.1


def test_empirical_is_seed_deterministic():
    cfg, ctx, H0 = expansion_setup(tau=1.0)
    kw = dict(step_size=0.05, epochs=3, seed=11)
    a = train_projector(cfg, ctx, TrainConfig(**kw), H0)
    b = train_projector(cfg, ctx, TrainConfig(**kw), H0)
    assert a.loss_per_epoch == b.loss_per_epoch
    assert np.array_equal(a.final_projector.W, b.final_projector.W)
    c = train_projector(cfg, ctx, TrainConfig(step_size=0.05, epochs=3, seed=12), H0)
    assert a.loss_per_epoch != c.loss_per_epoch


def test_empirical_requires_dataset():
    cfg, ctx, _ = expansion_setup(tau=1.0)
    with pytest.raises(DomainError):
        train_projector(cfg, ctx, TrainConfig(step_size=0.05, epochs=2))


def test_budget_stop_label():
    cfg, ctx, H0 = expansion_setup(tau=1.0)
    tr = train_projector(cfg, ctx, TrainConfig(step_size=0.05, epochs=3, seed=1), H0)
    assert tr.stopped_by == "budget"
    assert tr.epochs_run == 3


# --------------------------------------------------------- closed-form path


def popform_setup(tau):
    mu = np.zeros(10)
    mu[0] = 5.0
    cfg = GmmConfig(p=10, mu=mu, sigma_aug=1.0)
    return cfg, LossContext(cfg, tau=tau)


def test_population_descent_convergence_and_monotonicity():
    cfg, ctx = popform_setup(tau=0.5)
    tr = train_projector(
        cfg, ctx,
        TrainConfig(step_size=0.5, epochs=400, seed=0, objective=POPULATION_CLOSED_FORM),
    )
    assert tr.stopped_by == "converged"
    assert tr.epochs_run < 400
    steps = np.diff(tr.loss_per_epoch)
    assert len(steps) and steps.max() <= 1e-10


def test_population_descent_tracks_surrogate_optimum():
    # near the transition the exact and surrogate optima almost coincide
    cfg, ctx = popform_setup(tau=1.2)
    tr = train_projector(
        cfg, ctx,
        TrainConfig(step_size=0.5, epochs=400, seed=2, objective=POPULATION_CLOSED_FORM),
    )
    rep = classify_regime(PhaseConfig(1.0, 1.2, 25.0))
    assert abs(tr.t_per_epoch[-1] - rep.t_star) <= 0.02


def test_finite_sample_objective_needs_data_and_small_p():
    cfg, ctx = popform_setup(tau=1.0)
    with pytest.raises(DomainError):
        train_projector(
            cfg, ctx,
            TrainConfig(step_size=0.1, epochs=2, objective=FINITE_SAMPLE_CLOSED_FORM),
        )
    mu = np.zeros(25)
    mu[0] = 5.0
    big = GmmConfig(p=25, mu=mu, sigma_aug=1.0)
    with pytest.raises(DomainError):
        train_projector(
            big, LossContext(big, tau=1.0),
            TrainConfig(step_size=0.1, epochs=2, objective=POPULATION_CLOSED_FORM),
        )


def test_finite_sample_objective_runs():
    cfg, ctx = popform_setup(tau=0.8)
    H0, _ = sample_feature_matrix(cfg, 200, seed=5)
    tr = train_projector(
        cfg, ctx,
        TrainConfig(step_size=0.3, epochs=10, seed=4, objective=FINITE_SAMPLE_CLOSED_FORM),
        H0,
    )
    assert np.diff(tr.loss_per_epoch).max() <= 1e-10


def test_explicit_init_and_identity_init():
    cfg, ctx = popform_setup(tau=0.8)
    W0 = np.diag(np.arange(1.0, 11.0))
    tr = train_projector(
        cfg, ctx,
        TrainConfig(step_size=0.1, epochs=1, objective=POPULATION_CLOSED_FORM, init=W0),
    )
    assert tr.epochs_run == 1
    with pytest.raises(DomainError):
        train_projector(
            cfg, ctx,
            TrainConfig(step_size=0.1, epochs=1, objective=POPULATION_CLOSED_FORM,
                        init=np.eye(4)),
        )
    tr2 = train_projector(
        cfg, ctx,
        TrainConfig(step_size=0.1, epochs=1, objective=POPULATION_CLOSED_FORM,
                    init="Identity"),
    )
    assert tr2.epochs_run == 1


def test_context_model_mismatch_rejected():
    cfg, _ = popform_setup(tau=1.0)
    other = GmmConfig(p=10, mu=np.r_[3.0, np.zeros(9)], sigma_aug=1.0)
    with pytest.raises(DomainError):
        train_projector(cfg, LossContext(other, tau=1.0),
                        TrainConfig(step_size=0.1, epochs=1,
                                    objective=POPULATION_CLOSED_FORM))


def test_divergence_is_reported():
    cfg = GmmConfig(p=3, mu=np.array([2.0, 0, 0]), sigma_aug=0.8)
    ctx = LossContext(cfg, tau=0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(TrainingDivergedError) as err:
            train_projector(
                cfg, ctx,
                TrainConfig(step_size=0.1, epochs=3,
                            objective=POPULATION_CLOSED_FORM, init=np.eye(3) * 1e200),
            )
    assert err.value.epoch == 0


# ------------------------------------------------------------------- traces


def test_trace_csv_round_trip(tmp_path):
    cfg, ctx, H0 = expansion_setup(tau=1.0)
    tr = train_projector(cfg, ctx, TrainConfig(step_size=0.05, epochs=4, seed=2), H0)
    path = tmp_path / "trace.csv"
    tr.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "loss", "t", "T"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "3", "4"]
    for k, row in enumerate(rows[1:]):
        assert float(row[1]) == tr.loss_per_epoch[k]
        assert float(row[2]) == tr.t_per_epoch[k]
        assert float(row[3]) == tr.T_per_epoch[k]


# -------------------------------------------------------------- diagnostics


def test_cumulative_alignment_scores():
    mu = np.array([3.0, 0.0, 0.0])
    mubar = mu / 3.0
    scores = cumulative_alignment_scores(np.outer(mubar, mubar), mu)
    assert scores[0] == pytest.approx(1.0, abs=1e-12)
    W = np.random.default_rng(5).standard_normal((4, 4))
    s = cumulative_alignment_scores(W, np.array([1.0, 2.0, 0.0, -1.0]))
    assert np.all(np.diff(s) >= -1e-15)
    assert s[-1] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        cumulative_alignment_scores(W, np.zeros(4))


def test_spectral_report_bundle():
    mu = np.array([2.0, 1.0, 0.0])
    v = np.array([0.0, 0.0, 1.0])
    W = np.random.default_rng(9).standard_normal((3, 3))
    rep = spectral_report(W, mu, v)
    assert len(rep.singular_values) == 3
    assert all(a >= b for a, b in zip(rep.singular_values, rep.singular_values[1:]))
    assert rep.mu_scores[-1] == pytest.approx(1.0, abs=1e-12)
    assert rep.v_aug_scores is not None
    from contraproj import expansion_measure

    assert rep.expansion == pytest.approx(expansion_measure(W, mu), rel=1e-14)
    assert spectral_report(W, mu).v_aug_scores is None
