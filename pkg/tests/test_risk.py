import math

import numpy as np
import pytest

from _draws import sample_params
from stablerun.equilibrium import solve_equilibrium
from stablerun.model import REFERENCE, AssumptionError, GameParams
from stablerun.risk import (
    RegionLabel,
    Sign,
    classify_regions,
    printed_thresholds,
    region_thresholds,
    run_decomposition,
    share_curve,
)
from stablerun.statics import d_risk_d_taux, d_share_d_mu, risk_component_fd

# mpmath oracle (40 digits) at the reference calibration
ORACLE_R0 = 0.4378531361903604840579282
ORACLE_R1 = 0.2911651506223758809933608
ORACLE_S1 = 0.3993934800940977710351965


def test_reference_decomposition_oracle():
    rd = run_decomposition(REFERENCE)
    assert rd.r0 == pytest.approx(ORACLE_R0, rel=1e-12)
    assert rd.r1 == pytest.approx(ORACLE_R1, rel=1e-12)
    assert rd.s1 == pytest.approx(ORACLE_S1, rel=1e-12)
    assert rd.conditional_0 < rd.conditional_1
    assert rd.r_total == rd.r0 + rd.r1
    assert abs(rd.s0 + rd.s1 - 1) <= 1e-12


def test_degenerate_sale_probability():
    none = run_decomposition(REFERENCE.replace(p=0.0))
    assert none.r1 == 0.0 and none.s0 == 1.0
    always = run_decomposition(REFERENCE.replace(p=1.0))
    assert always.r0 == 0.0 and always.s1 == 1.0


def test_shares_undefined_when_risk_underflows():
    rd = run_decomposition(REFERENCE.replace(mu=50.0, sigma=0.5))
    assert rd.r_total == 0.0
    assert not rd.shares_defined and math.isnan(rd.s1)


def test_decomposition_invariants_on_draws():
    for P in sample_params(202, 100):
        rd = run_decomposition(P)
        assert rd.r_total == rd.r0 + rd.r1
        assert 0 <= rd.r0 <= 1 and 0 <= rd.r1 <= 1
        assert rd.r0 / (1 - P.p) <= rd.r1 / P.p
        if rd.r_total > 0:
            assert abs(rd.s0 + rd.s1 - 1) <= 1e-12


def _at_mu(params, mu_of_thresholds, tries=50):
    """Re-solve until mu sits where ``mu_of_thresholds`` puts it."""
    q = params
    for _ in range(tries):
        eq = solve_equilibrium(q)
        target = mu_of_thresholds(region_thresholds(q, eq))
        if target == q.mu:
            break
        q = q.replace(mu=target)
    return q


def test_classify_far_below():
    eq = solve_equilibrium(REFERENCE)
    P = REFERENCE.replace(mu=eq.theta_bar_0 - 1.0)
    rc = classify_regions(P)
    assert rc.region_label_tau is RegionLabel.BOTH_UP
    assert rc.region_label_taux is RegionLabel.BOTH_DOWN


def test_classify_far_above():
    eq = solve_equilibrium(REFERENCE)
    P = REFERENCE.replace(mu=eq.theta_bar_1 + 1.0)
    rc = classify_regions(P)
    assert rc.region_label_taux is RegionLabel.BOTH_UP
    assert rc.region_label_tau is RegionLabel.BOTH_DOWN


def test_classify_middle_band_is_mixed():
    # midway between the upper tau threshold for a = 0 and T_1
    P = _at_mu(REFERENCE, lambda th: 0.5 * (th.tau_upper[0] + th.tau_lower[1]))
    rc = classify_regions(P)
    assert rc.tau_sign_0 is Sign.DECREASES and rc.tau_sign_1 is Sign.INCREASES
    assert rc.region_label_tau is RegionLabel.MIXED


def test_ambiguity_band():
    P = _at_mu(REFERENCE, lambda th: 0.5 * (th.tau_lower[0] + th.tau_upper[0]))
    rc = classify_regions(P)
    assert rc.tau_sign_0 is Sign.AMBIGUOUS
    assert rc.region_label_tau is RegionLabel.AMBIGUOUS
    assert rc.taux_sign_0 is not Sign.AMBIGUOUS


def test_exact_tie_is_ambiguous():
    eq = solve_equilibrium(REFERENCE)
    # classify at a frozen equilibrium with mu placed exactly on the threshold
    th = region_thresholds(REFERENCE, eq)
    rc = classify_regions(REFERENCE.replace(mu=th.tau_x[0]), eq)
    assert rc.taux_sign_0 is Sign.AMBIGUOUS


def test_classify_requires_assumption():
    with pytest.raises(AssumptionError):
        classify_regions(REFERENCE.replace(sigma=0.1, sigma_x=0.5))


def test_printed_taux_threshold_disagrees_with_derivative():
    # The published tau_x threshold would call dR_0/dtau_x negative here;
    # the total derivative and its finite difference are both positive.
    P = REFERENCE.replace(mu=0.9)
    eq = solve_equilibrium(P)
    assert P.mu < printed_thresholds(P, eq).tau_x[0]
    assert P.mu > region_thresholds(P, eq).tau_x[0]
    analytic = d_risk_d_taux(P, eq)[0]
    fd = risk_component_fd(P, 0, "tau_x", eq=eq)
    assert analytic > 0 and fd > 0
    assert analytic == pytest.approx(fd, rel=1e-6)
    assert classify_regions(P, eq).taux_sign_0 is Sign.INCREASES


def test_classifier_matches_fd_sign_on_draws():
    for P in sample_params(303, 100):
        eq = solve_equilibrium(P)
        rc = classify_regions(P, eq)
        for a in (0, 1):
            sign = rc.tau_sign(a)
            if sign is Sign.AMBIGUOUS:
                continue
            fd = risk_component_fd(P, a, "tau", eq=eq)
            if fd == 0.0:
                continue  # below double resolution; covered by the acceptance protocol
            assert (fd > 0) == (sign is Sign.INCREASES)


def test_share_curve_examples():
    two = share_curve(REFERENCE, [0.6, 0.8])
    assert two[1].s1 > two[0].s1
    same = share_curve(REFERENCE, [0.7, 0.7])
    assert same[0].s1 == same[1].s1
    grid = np.linspace(0.3, 1.0, 12)
    s1 = [pt.s1 for pt in share_curve(REFERENCE, grid)]
    assert all(b > a for a, b in zip(s1, s1[1:]))
    assert [pt.mu for pt in share_curve(REFERENCE, grid)] == list(grid)


def test_share_curve_reports_bad_cells():
    out = share_curve(REFERENCE, [0.7, math.nan, 0.8])
    assert out[1].error is not None and math.isnan(out[1].s1)
    assert out[0].error is None and out[2].error is None


def test_equal_weights_favor_large_sale_share():
    for P in sample_params(404, 30):
        rd = run_decomposition(P.replace(p=0.5))
        if rd.shares_defined:
            assert rd.s1 >= rd.s0


# Re-solving the equilibrium as mu rises can pull the sale-state threshold down
# fast enough that S1 falls. Values from a 30-digit nested-bisection solver.
SHARE_DIP = GameParams(mu=0.8468, sigma=0.24051819064193708, sigma_x=0.15368603882698587,
                       delta=0.07265783063572202, eta=0.31887889355896504, p=0.9046866671390035)
SHARE_DIP_ORACLE = ((0.8468, 0.999118582233), (0.8802, 0.990007062586), (0.9135, 0.985774310175))


def test_resolved_share_can_fall_with_mu():
    got = []
    for mu, want in SHARE_DIP_ORACLE:
        Q = SHARE_DIP.replace(mu=mu)
        s1 = run_decomposition(Q, solve_equilibrium(Q)).s1
        assert s1 == pytest.approx(want, rel=1e-9)
        got.append(s1)
    assert got[0] > got[1] > got[2]
    # the frozen-threshold partial is still positive at the same point
    assert d_share_d_mu(SHARE_DIP, solve_equilibrium(SHARE_DIP)).value > 0
