import math

import numpy as np
import pytest
from scipy import optimize

from _draws import sample_params
from stablerun.equilibrium import (
    SolverError,
    _differential,
    lambda_investors,
    marginal_differential,
    payoff_differential,
    solve_equilibrium,
    solve_switching_threshold,
    solvency_gaps,
    solvency_threshold,
    threshold_slope,
)
from stablerun.model import REFERENCE, AssumptionError, posterior_mean
from stablerun.statics import d_theta_bar_d_xbar

# mpmath oracle at 40 digits: nested bisection on g(theta) and on G_a(x_bar)
ORACLE_THETA_BAR_1_AT_06 = 0.6  # exact: 0.2 + 0.8 * Phi(0) = 0.6
ORACLE_G0_AT_04 = 0.1726355375236781334753322
ORACLE_X_STAR = (0.8236983860516832927989959, 1.085194464554639703070324)
ORACLE_THETA_BAR = (0.7479955065372683900397583, 0.9833419771899291592839535)
ORACLE_X_STAR_ETA_0999 = (-0.007985531557800214392, 0.37229223578100052323)


def test_lambda_investors_examples():
    assert lambda_investors(0.3, 0.3, 0.05) == 0.5
    assert lambda_investors(0.3, 0.3 - 40 * 0.05, 0.05) <= 1e-15
    # mpmath ncdf(-1)
    assert lambda_investors(0.7, 0.65, 0.05) == pytest.approx(0.158655253931457051414767, rel=1e-13)


def test_theta_bar_symmetric_point():
    # at x_bar = theta_bar_0 half the investors sell, so theta_bar_0 = (1 - delta)/2
    assert solvency_threshold(0, 0.4, REFERENCE) == pytest.approx(0.4, abs=1e-15)


def test_theta_bar_limits():
    assert solvency_threshold(0, -2.0, REFERENCE) == pytest.approx(0.0, abs=1e-15)
    assert solvency_threshold(1, -2.0, REFERENCE) == pytest.approx(REFERENCE.delta, abs=1e-15)
    assert solvency_threshold(1, -math.inf, REFERENCE) == REFERENCE.delta
    assert solvency_threshold(0, math.inf, REFERENCE) == 1 - REFERENCE.delta


def test_theta_bar_oracle():
    value = solvency_threshold(1, 0.6, REFERENCE)
    assert value == pytest.approx(ORACLE_THETA_BAR_1_AT_06, abs=1e-14)
    assert REFERENCE.delta < value < 1.0


def test_theta_bar_residual_and_array_path():
    x = np.linspace(-1.0, 2.5, 3001)
    for a in (0, 1):
        theta = solvency_threshold(a, x, REFERENCE)
        g = theta - a * REFERENCE.delta - (1 - REFERENCE.delta) * lambda_investors(theta, x, REFERENCE.sigma_x)
        assert np.max(np.abs(g)) <= 1e-12
        scalar = [solvency_threshold(a, float(v), REFERENCE) for v in x[::100]]
        assert np.allclose(theta[::100], scalar, rtol=0, atol=1e-15)


def test_theta_bar_without_assumption():
    loose = REFERENCE.replace(sigma=0.1, sigma_x=0.5)
    theta = solvency_threshold(0, 0.3, loose)
    assert 0 < theta < 1 - loose.delta
    with pytest.raises(AssumptionError):
        marginal_differential(0, 0.3, loose)
    with pytest.raises(AssumptionError):
        solve_equilibrium(loose)


def test_state_validation():
    with pytest.raises(ValueError):
        solvency_threshold(2, 0.3, REFERENCE)


def test_marginal_differential_oracle():
    assert marginal_differential(0, 0.4, REFERENCE) == pytest.approx(ORACLE_G0_AT_04, rel=1e-12)
    assert payoff_differential(0, 0.4, REFERENCE) == pytest.approx(1.1 * ORACLE_G0_AT_04, rel=1e-12)


def test_marginal_differential_at_own_mean():
    level = REFERENCE.sell_level
    for a in (0, 1):
        x = optimize.brentq(
            lambda v: posterior_mean(REFERENCE, v) - solvency_threshold(a, v, REFERENCE), -2, 3, xtol=1e-15
        )
        assert marginal_differential(a, x, REFERENCE) == pytest.approx(0.5 - level, abs=1e-12)


def test_marginal_differential_limits():
    P = REFERENCE
    far = P.mu + 50 * P.sigma
    assert marginal_differential(0, far, P) == pytest.approx(-P.sell_level, abs=1e-12)
    assert marginal_differential(1, P.mu - 50 * P.sigma, P) == pytest.approx(1 / (1 + P.eta), abs=1e-12)


def test_switching_thresholds_oracle():
    eq = solve_equilibrium(REFERENCE)
    assert eq.x_star_0 == pytest.approx(ORACLE_X_STAR[0], abs=1e-13)
    assert eq.x_star_1 == pytest.approx(ORACLE_X_STAR[1], abs=1e-13)
    assert eq.theta_bar_0 == pytest.approx(ORACLE_THETA_BAR[0], abs=1e-13)
    assert eq.theta_bar_1 == pytest.approx(ORACLE_THETA_BAR[1], abs=1e-13)
    assert eq.x_star_0 < eq.x_star_1 and eq.theta_bar_0 < eq.theta_bar_1
    assert max(eq.residuals) <= 1e-11
    assert solve_switching_threshold(1, REFERENCE) == eq.x_star_1


def test_higher_holding_return_lowers_switching_signal():
    # oracle: x* falls as eta rises (a higher failure belief is needed before selling)
    eq = solve_equilibrium(REFERENCE.replace(eta=0.999))
    assert eq.x_star_0 == pytest.approx(ORACLE_X_STAR_ETA_0999[0], abs=1e-12)
    assert eq.x_star_1 == pytest.approx(ORACLE_X_STAR_ETA_0999[1], abs=1e-12)
    base = solve_equilibrium(REFERENCE)
    assert eq.x_star_0 < base.x_star_0 and eq.x_star_1 < base.x_star_1


def test_small_delta_continuity():
    eq = solve_equilibrium(REFERENCE.replace(delta=1e-12))
    assert abs(eq.x_star_1 - eq.x_star_0) <= 1e-6
    assert abs(eq.theta_bar_1 - eq.theta_bar_0) <= 1e-6


def test_solver_determinism():
    assert solve_equilibrium(REFERENCE) == solve_equilibrium(REFERENCE)


def test_solvency_gaps_match_direct_gaps():
    for a in (0, 1):
        for x in (0.3, 0.8, 1.2):
            theta = solvency_threshold(a, x, REFERENCE)
            lower, upper = solvency_gaps(a, x, REFERENCE)
            base = a * REFERENCE.delta
            assert math.exp(lower) == pytest.approx(theta - base, rel=1e-12)
            assert math.exp(upper) == pytest.approx(base + 1 - REFERENCE.delta - theta, rel=1e-12)


def test_solvency_gaps_resolve_saturated_threshold():
    # theta_bar_1 rounds to 1.0 but is strictly below it
    x = 3.0
    assert solvency_threshold(1, x, REFERENCE) == 1.0
    lower, upper = solvency_gaps(1, x, REFERENCE)
    assert math.isfinite(upper) and upper < -100


DRAWS = sample_params(101, 100)


@pytest.mark.parametrize("idx", range(0, 100, 5))
def test_differential_decreasing_on_draws(idx):
    P = DRAWS[idx]
    x = np.linspace(P.mu - 10 * P.sigma, P.mu + 10 * P.sigma, 1000)
    for a in (0, 1):
        g = marginal_differential(a, x, P)
        assert np.all(np.diff(g) <= 0)
        # strict wherever G has not saturated at its limits
        moving = (g[:-1] < 1 / (1 + P.eta) - 1e-15) & (g[1:] > -P.sell_level + 1e-15)
        assert np.all(np.diff(g)[moving] < 0)


def test_differential_decreasing_all_draws():
    for P in DRAWS:
        x = np.linspace(P.mu - 10 * P.sigma, P.mu + 10 * P.sigma, 1000)
        for a in (0, 1):
            assert np.all(np.diff(_differential(a, x, P)[0]) <= 0)


def test_threshold_slope_matches_fd():
    P = REFERENCE
    eq = solve_equilibrium(P)
    h = 1e-6
    for a in (0, 1):
        x = eq.x_star(a)
        fd = (solvency_threshold(a, x + h, P) - solvency_threshold(a, x - h, P)) / (2 * h)
        assert d_theta_bar_d_xbar(a, x, P) == pytest.approx(fd, rel=1e-6)


def test_threshold_slope_on_draws():
    rng = np.random.default_rng(3)
    for P in DRAWS:
        for a in (0, 1):
            x = P.mu + P.sigma * rng.uniform(-2, 2)
            slope = d_theta_bar_d_xbar(a, x, P)
            assert 0 <= slope < 1
            # curvature lives on the scale sigma_x, so the step follows it;
            # one Richardson stage removes the O(h^2) term
            h = 1e-3 * P.sigma_x
            d1 = (solvency_threshold(a, x + h, P) - solvency_threshold(a, x - h, P)) / (2 * h)
            d2 = (solvency_threshold(a, x + h / 2, P) - solvency_threshold(a, x - h / 2, P)) / h
            fd = (4 * d2 - d1) / 3
            assert slope == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_threshold_slope_examples():
    P = REFERENCE
    c = (1 - P.delta) / (P.sigma_x * math.sqrt(2 * math.pi))
    assert threshold_slope(0.5, 0.5, P) == pytest.approx(c / (1 + c), rel=1e-15)
    flat = P.replace(sigma_x=1e6)
    assert d_theta_bar_d_xbar(0, 0.3, flat) < 1e-6


def test_ordering_chain_on_draws():
    for P in DRAWS:
        eq = solve_equilibrium(P)
        assert eq.x_star_0 < eq.x_star_1
        # theta_bar_0 increases in x_bar, so its log gap to the upper end falls
        low_gap_00, up_gap_00 = solvency_gaps(0, eq.x_star_0, P)
        low_gap_01, up_gap_01 = solvency_gaps(0, eq.x_star_1, P)
        assert low_gap_00 < low_gap_01 or up_gap_00 > up_gap_01
        assert solvency_threshold(0, eq.x_star_1, P) < eq.theta_bar_1


def test_bracket_failure_is_reported(monkeypatch):
    import stablerun.equilibrium as eqm

    monkeypatch.setattr(eqm, "BRACKET_STEPS", 1)
    with pytest.raises(SolverError, match="bracket"):
        eqm.solve_switching_threshold(0, REFERENCE.replace(mu=-3.0, sigma=0.05, sigma_x=0.001))
