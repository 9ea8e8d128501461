"""Proportional-regime scalar system: threshold, margin root, error limit.

Monte Carlo reference values were generated once (seeds noted inline) and
frozen; the closed forms must land inside the recorded confidence bands.
"""

import math
import warnings

import numpy as np
import pytest

from contraproj import (
    AsymptoticProblem,
    AsymptoticSolution,
    BoundaryWarning,
    DomainError,
    NON_SEPARABLE,
    RegimeError,
    SEPARABLE,
    delta_star,
    margin_potential,
    predicted_test_error,
    solve_asymptotics,
    solve_kappa_star,
    solve_u_star,
)


def test_problem_validation():
    with pytest.raises(DomainError):
        AsymptoticProblem(delta=0.0, rho=1.0, eta=0.0)
    with pytest.raises(DomainError):
        AsymptoticProblem(delta=0.5, rho=-1.0, eta=0.0)
    with pytest.raises(DomainError):
        AsymptoticProblem(delta=0.5, rho=1.0, eta=-1.0)
    prob = AsymptoticProblem(delta=0.5, rho=4.0, eta=1.0)
    assert prob.c == 0.25
    assert prob.mu_norm == 2.0


def test_from_c_round_trip():
    prob = AsymptoticProblem.from_c(delta=0.5, rho=2.0, c=0.25)
    assert prob.eta == pytest.approx(1.0, rel=1e-12)
    assert prob.c == pytest.approx(0.25, rel=1e-12)
    with pytest.raises(DomainError):
        AsymptoticProblem.from_c(delta=0.5, rho=2.0, c=0.0)


# ------------------------------------------------------------ the potential


def test_margin_potential_against_mc():
    # frozen oracle: 1e7-draw MC of E[(sqrt(2)G + 0.5*sqrt(1+c) - 2)_+^2] at
    # (u=1, kappa=0.5, delta=1, rho=4, eta=0), stream default_rng(20260825)
    # after no prior draws gave -0.81852621 +/- 2.54e-4
    prob = AsymptoticProblem(delta=1.0, rho=4.0, eta=0.0)
    got = margin_potential(1.0, 0.5, prob)
    assert got == pytest.approx(-0.81829187, abs=1e-8)
    assert abs(got - (-0.81852621)) < 3.0 * 2.54e-4


def test_margin_potential_domain():
    prob = AsymptoticProblem(delta=1.0, rho=1.0, eta=0.0)
    with pytest.raises(DomainError):
        margin_potential(-0.1, 1.0, prob)
    with pytest.raises(DomainError):
        margin_potential(1.0, -0.1, prob)
    # u = 0 is allowed (the boundary of the search range)
    assert math.isfinite(margin_potential(0.0, 1.0, prob))


def test_margin_potential_increasing_in_kappa():
    prob = AsymptoticProblem(delta=0.7, rho=2.0, eta=0.5)
    ks = np.linspace(0.0, 4.0, 25)
    vals = [margin_potential(0.8, float(k), prob) for k in ks]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


# -------------------------------------------------------- separability edge


def test_delta_star_at_zero_signal():
    # exact limit 2 (attained as u -> infinity); grid stops at u = 1e4
    assert abs(delta_star(0.0) - 2.0) < 1e-6


def test_delta_star_frozen_values():
    # brute-force dense-grid oracle (10^6 log-spaced u) gave 3.7000334556
    assert delta_star(1.0) == pytest.approx(3.7000334557, abs=1e-8)
    assert delta_star(3.0) == pytest.approx(11.812209, abs=1e-5)
    with pytest.raises(DomainError):
        delta_star(-0.5)


def test_delta_star_monotone_in_rho():
    vals = [delta_star(r) for r in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


# -------------------------------------------------------------- full system


def test_solution_at_reference_point():
    # independent dense-grid oracle bracketed kappa* in [1.7040, 1.7050]
    prob = AsymptoticProblem(delta=0.5, rho=3.0, eta=0.0)
    sol = solve_asymptotics(prob)
    assert sol.regime == SEPARABLE
    assert 1.7040 <= sol.kappa_star <= 1.7050
    assert sol.kappa_star == pytest.approx(1.70484699, abs=1e-6)
    assert sol.u_star == pytest.approx(1.16529048, abs=1e-6)
    assert sol.predicted_error == pytest.approx(0.12966618, abs=1e-6)
    assert sol.delta_star == pytest.approx(11.812209, abs=1e-5)


def test_kkt_residuals_at_solution():
    prob = AsymptoticProblem(delta=0.5, rho=3.0, eta=0.0)
    kappa = solve_kappa_star(prob)
    u = solve_u_star(prob, kappa_star=kappa)
    # the infimum over u vanishes at kappa*, and u* attains it
    assert abs(margin_potential(u, kappa, prob)) < 1e-6
    # central-difference stationarity in u
    h = 1e-5
    d = (margin_potential(u + h, kappa, prob) - margin_potential(u - h, kappa, prob)) / (2 * h)
    assert abs(d) < 1e-3


def test_error_and_ratio_decrease_with_eta():
    frozen = {
        0.0: (1.16529048, 0.12966618),
        1.0: (0.62788520, 0.07120591),
        2.0: (0.47596060, 0.05891555),
    }
    us, errs = [], []
    for eta, (u_want, e_want) in frozen.items():
        sol = solve_asymptotics(AsymptoticProblem(delta=0.5, rho=3.0, eta=eta))
        assert sol.u_star == pytest.approx(u_want, abs=1e-5)
        assert sol.predicted_error == pytest.approx(e_want, abs=1e-5)
        us.append(sol.u_star)
        errs.append(sol.predicted_error)
    assert us[0] > us[1] > us[2]
    assert errs[0] > errs[1] > errs[2]


def test_error_formula_consistency():
    prob = AsymptoticProblem(delta=0.5, rho=3.0, eta=1.0)
    u = solve_u_star(prob)
    want = float(
        0.5 * math.erfc(math.sqrt(prob.rho / (1.0 + u * u)) / math.sqrt(2.0))
    )
    assert predicted_test_error(prob, u_star=u) == pytest.approx(want, rel=1e-12)


# ------------------------------------------------------------ regime limits


def test_nonseparable_sentinel_bundle():
    # delta far above delta*(1) = 3.70: no margin, coin-flip error
    sol = solve_asymptotics(AsymptoticProblem(delta=10.0, rho=1.0, eta=0.0))
    assert sol.regime == NON_SEPARABLE
    assert sol.kappa_star == 0.0
    assert sol.u_star == math.inf
    assert sol.predicted_error == 0.5
    assert isinstance(sol, AsymptoticSolution)


def test_regime_error_and_boundary_warning():
    threshold = delta_star(1.0)
    with pytest.raises(RegimeError):
        solve_kappa_star(AsymptoticProblem(delta=threshold, rho=1.0, eta=0.0))
    with pytest.raises(RegimeError):
        solve_u_star(AsymptoticProblem(delta=1.5 * threshold, rho=1.0, eta=0.0))
    with pytest.warns(BoundaryWarning):
        solve_kappa_star(AsymptoticProblem(delta=0.995 * threshold, rho=1.0, eta=0.0))
    # comfortably inside the regime: no warning
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve_kappa_star(AsymptoticProblem(delta=0.5 * threshold, rho=1.0, eta=0.0))


def test_kappa_star_increases_with_rho():
    kappas = [
        solve_kappa_star(AsymptoticProblem(delta=0.5, rho=r, eta=0.0))
        for r in (1.0, 2.0, 4.0)
    ]
    assert kappas[0] < kappas[1] < kappas[2]
