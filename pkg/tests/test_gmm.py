"""Tests for the data model: config validation, sampling, derived geometry."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contraproj import (
    AugmentedPair,
    DomainError,
    GmmConfig,
    ShapeError,
    Spike,
    augment_views,
    derive_seed,
    effective_negative_diff_moments,
    sample_augmented_pair,
    sample_dataset,
    sample_feature_matrix,
)


def make_cfg(p=4, mu_norm=2.0, sigma_aug=0.5, spike=None):
    mu = np.zeros(p)
    mu[0] = mu_norm
    return GmmConfig(p=p, mu=mu, sigma_aug=sigma_aug, spike=spike)


# ---------------------------------------------------------------- validation


def test_config_rejects_bad_inputs():
    with pytest.raises(DomainError):
        GmmConfig(p=1, mu=np.zeros(1), sigma_aug=1.0)
    with pytest.raises(ShapeError):
        GmmConfig(p=3, mu=np.zeros(4), sigma_aug=1.0)
    with pytest.raises(DomainError):
        GmmConfig(p=3, mu=np.array([1.0, np.nan, 0.0]), sigma_aug=1.0)
    with pytest.raises(DomainError):
        GmmConfig(p=3, mu=np.zeros(3), sigma_aug=-0.1)


def test_spike_rejects_bad_inputs():
    with pytest.raises(DomainError):
        Spike(rho_aug=-1.0, v_aug=np.array([1.0, 0.0, 0.0]))
    with pytest.raises(DomainError):
        Spike(rho_aug=1.0, v_aug=np.array([1.0, 1.0, 0.0]))  # not unit
    # spike in p=2 is disallowed, and dimension mismatch is caught
    sp = Spike(rho_aug=1.0, v_aug=np.array([0.0, 0.0, 1.0]))
    with pytest.raises(DomainError):
        GmmConfig(p=2, mu=np.zeros(2), sigma_aug=1.0, spike=Spike(1.0, np.array([0.0, 1.0])))
    with pytest.raises(ShapeError):
        GmmConfig(p=4, mu=np.zeros(4), sigma_aug=1.0, spike=sp)


def test_labels_must_be_plus_minus_one():
    from contraproj import LabeledSample

    with pytest.raises(DomainError):
        LabeledSample(h0=np.zeros(3), y=0)


# ------------------------------------------------------------------ geometry


def test_derived_quantities():
    cfg = make_cfg(p=5, mu_norm=3.0)
    assert cfg.rho == 9.0
    assert np.allclose(cfg.mu_bar, [1, 0, 0, 0, 0])
    assert not cfg.has_spike
    assert cfg.rho_aug == 0.0
    with pytest.raises(DomainError):
        cfg.v_aug


def test_mu_bar_requires_nonzero_mu():
    cfg = GmmConfig(p=3, mu=np.zeros(3), sigma_aug=1.0)
    with pytest.raises(DomainError):
        cfg.mu_bar


def test_spike_geometry():
    # v_aug at a known angle to mu_bar
    r = 0.6
    v = np.array([r, np.sqrt(1 - r**2), 0.0, 0.0])
    cfg = make_cfg(p=4, mu_norm=2.0, sigma_aug=0.3, spike=Spike(rho_aug=5.0, v_aug=v))
    assert cfg.has_spike
    assert cfg.rho_aug == 5.0
    assert abs(cfg.r - 0.6) < 1e-15

    perp = cfg.mu_perp
    assert abs(np.linalg.norm(perp) - 1.0) < 1e-12
    assert abs(perp @ cfg.mu_bar) < 1e-12
    # orientation convention: r * <mu_perp, v_aug> >= 0
    assert cfg.r * (perp @ cfg.v_aug) >= 0.0

    # flipping the sign of v keeps mu_perp pointing "toward" the spike
    cfg2 = make_cfg(p=4, mu_norm=2.0, sigma_aug=0.3, spike=Spike(rho_aug=5.0, v_aug=-v))
    assert cfg2.r * (cfg2.mu_perp @ cfg2.v_aug) >= 0.0


def test_mu_perp_collinear_fails():
    v = np.array([1.0, 0.0, 0.0])
    cfg = GmmConfig(p=3, mu=2.0 * v, sigma_aug=1.0, spike=Spike(rho_aug=1.0, v_aug=v))
    with pytest.raises(DomainError):
        cfg.mu_perp


def test_aug_covariance_matrix():
    v = np.array([0.0, 1.0, 0.0])
    cfg = GmmConfig(
        p=3, mu=np.array([1.0, 0.0, 0.0]), sigma_aug=0.5,
        spike=Spike(rho_aug=4.0, v_aug=v),
    )
    want = 0.25 * (np.eye(3) + 4.0 * np.outer(v, v))
    assert np.allclose(cfg.aug_covariance(), want)
    # isotropic case
    assert np.allclose(make_cfg(p=3, sigma_aug=2.0).aug_covariance(), 4.0 * np.eye(3))


# ------------------------------------------------------------------ sampling


def test_sample_shapes_and_determinism():
    cfg = make_cfg()
    h0, y = sample_feature_matrix(cfg, 100, seed=7)
    assert h0.shape == (100, 4)
    assert y.shape == (100,)
    assert set(np.unique(y)) <= {-1, 1}

    h0b, yb = sample_feature_matrix(cfg, 100, seed=7)
    assert np.array_equal(h0, h0b) and np.array_equal(y, yb)
    h0c, _ = sample_feature_matrix(cfg, 100, seed=8)
    assert not np.array_equal(h0, h0c)

    with pytest.raises(DomainError):
        sample_feature_matrix(cfg, 0, seed=1)


def test_sample_dataset_matches_matrix_form():
    cfg = make_cfg(p=3)
    ds = sample_dataset(cfg, 10, seed=42)
    h0, y = sample_feature_matrix(cfg, 10, seed=42)
    assert len(ds) == 10
    for i, s in enumerate(ds):
        assert np.array_equal(s.h0, h0[i])
        assert s.y == y[i]


def test_feature_moments():
    # y*h0 should average to mu, and centered features to identity covariance
    cfg = make_cfg(p=3, mu_norm=2.0)
    h0, y = sample_feature_matrix(cfg, 200_000, seed=11)
    signed = y[:, None] * h0
    assert np.allclose(signed.mean(axis=0), cfg.mu, atol=0.02)
    resid = signed - cfg.mu
    assert np.allclose(resid.T @ resid / len(resid), np.eye(3), atol=0.02)


def test_augmented_pair():
    cfg = make_cfg(p=3, sigma_aug=0.7)
    parent = sample_dataset(cfg, 1, seed=0)[0]
    pair = sample_augmented_pair(cfg, parent, seed=5)
    assert isinstance(pair, AugmentedPair)
    assert pair.parent is parent
    assert pair.h_plus_a.shape == (3,)
    assert not np.array_equal(pair.h_plus_a, pair.h_plus_b)

    bad_parent = sample_dataset(make_cfg(p=4), 1, seed=0)[0]
    with pytest.raises(ShapeError):
        sample_augmented_pair(cfg, bad_parent, seed=5)


def test_augment_views_isotropic_moments():
    cfg = make_cfg(p=2, sigma_aug=0.8)
    h0 = np.zeros((150_000, 2))
    a, b = augment_views(cfg, h0, seed=3)
    # each view has covariance sigma^2 I; views are independent
    assert np.allclose(a.T @ a / len(a), 0.64 * np.eye(2), atol=0.01)
    assert np.allclose(b.T @ b / len(b), 0.64 * np.eye(2), atol=0.01)
    assert np.allclose(a.T @ b / len(a), np.zeros((2, 2)), atol=0.01)


def test_augment_views_spiked_moments():
    v = np.array([0.0, 0.0, 1.0])
    cfg = GmmConfig(
        p=3, mu=np.array([1.0, 0.0, 0.0]), sigma_aug=0.5,
        spike=Spike(rho_aug=3.0, v_aug=v),
    )
    a, _ = augment_views(cfg, np.zeros((200_000, 3)), seed=9)
    emp = a.T @ a / len(a)
    assert np.allclose(emp, cfg.aug_covariance(), atol=0.015)


def test_augment_views_shape_checks():
    cfg = make_cfg(p=4)
    a, b = augment_views(cfg, np.zeros(4), seed=0)  # 1-d input is promoted
    assert a.shape == b.shape == (1, 4)
    with pytest.raises(ShapeError):
        augment_views(cfg, np.zeros((5, 3)), seed=0)


# --------------------------------------------------------------- derive_seed


def test_derive_seed_is_stable_and_distinct():
    s = derive_seed(123, "data", 4)
    assert s == derive_seed(123, "data", 4)
    assert 0 <= s < 2**64
    # distinct tags / bases give distinct streams
    assert s != derive_seed(123, "train", 4)
    assert s != derive_seed(124, "data", 4)
    assert derive_seed(5, "a", 1) != derive_seed(5, "a", 1.0)  # repr-sensitive


@given(st.integers(min_value=0, max_value=2**64 - 1), st.text(max_size=8))
@settings(max_examples=50, deadline=None)
def test_derive_seed_range(base, tag):
    assert 0 <= derive_seed(base, tag) < 2**64


# ---------------------------------------------------- negative-pair mixture


def test_negative_diff_law_moments():
    cfg = make_cfg(p=3, mu_norm=2.0, sigma_aug=0.6)
    law = effective_negative_diff_moments(cfg)
    assert law.atom_weights == (0.5, 0.25, 0.25)
    assert np.allclose(law.atom_locations[1], 2.0 * cfg.mu)
    assert np.allclose(law.atom_locations[2], -2.0 * cfg.mu)
    assert np.allclose(law.gaussian_cov, 2.0 * (1 + 0.36) * np.eye(3))

    # second moment of the mixture = sum w_k a_k a_k^T + cov; compare with MC
    second = sum(
        w * np.outer(a, a) for w, a in zip(law.atom_weights, law.atom_locations)
    ) + law.gaussian_cov
    n = 200_000
    h0, y = sample_feature_matrix(cfg, 2 * n, seed=14)
    a1, _ = augment_views(cfg, h0[:n], seed=15)
    b1, _ = augment_views(cfg, h0[n:], seed=16)
    d = a1 - b1
    emp = d.T @ d / n
    assert np.allclose(emp, second, atol=0.1)
