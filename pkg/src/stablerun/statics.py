"""Analytic comparative statics of the run-risk components, with a central
finite-difference harness for cross-checking.

Notation at an equilibrium of sale state ``a``: ``x = x*_a``, ``T = theta_bar_a(x)``,
``u = (x - T)/sigma_x``, ``c = (1-delta) phi(u)/sigma_x``, ``w = sigma**2/(sigma**2+sigma_x**2)``.
All derivatives of ``R_a`` are total: they include both the response of
``x*_a`` and the direct dependence of ``theta_bar_a`` on the parameter at a
fixed switching signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

from scipy import special

from .equilibrium import (
    EquilibriumSolution,
    solve_equilibrium,
    solvency_gaps,
    solvency_threshold,
    threshold_slope,
)
from .model import AssumptionError, GameParams, ParameterError, posterior_weight, require_assumption
from .normal import Gaussian, std_cdf, std_pdf, std_quantile
from .risk import Sign, classify_regions, conditional_run_prob, run_decomposition

FD_STEPS = {"delta": 1e-6, "mu": 1e-6}
FD_RELATIVE_STEPS = {"tau": 1e-4, "tau_x": 1e-4}
STATICS_RTOL = 1e-4
STATICS_ATOL = 1e-8
SHARE_RTOL = 1e-5


class StepSizeError(ValueError):
    """A finite-difference shift left the parameter domain."""


class DegenerateShareError(ValueError):
    """Share derivatives need 0 < p < 1 and a positive run probability."""


def d_theta_bar_d_xbar(a, x_bar: float, params: GameParams) -> float:
    """Slope of the solvency threshold in the population switching signal; in (0, 1)."""
    theta = solvency_threshold(a, x_bar, params)
    return threshold_slope(theta, x_bar, params)


@dataclass(frozen=True)
class _Local:
    T: float
    x: float
    u: float
    c: float
    slope: float  # d theta_bar / d x_bar
    weight: float  # 1-p or p


def _local(params: GameParams, eq: EquilibriumSolution, a: int) -> _Local:
    T, x = eq.theta_bar(a), eq.x_star(a)
    u = (x - T) / params.sigma_x
    c = (1.0 - params.delta) * std_pdf(u) / params.sigma_x
    return _Local(T, x, u, c, c / (1.0 + c), params.p if a else 1.0 - params.p)


def _prior_density(params: GameParams, theta: float) -> float:
    return Gaussian(params.mu, params.sigma).pdf(theta)


def equilibrium_denominator(params: GameParams, eq: EquilibriumSolution, a) -> float:
    """``-1 + (tau+tau_x)/tau_x * dtheta_bar/dx_bar`` at ``x*_a``; negative under the uniqueness assumption."""
    loc = _local(params, eq, int(a))
    return -1.0 + loc.slope / posterior_weight(params)


def _threshold_delta(params, loc: _Local, a: int) -> float:
    """Total ``dT_a/d delta``."""
    w = posterior_weight(params)
    partial = (a - std_cdf(loc.u)) / (1.0 + loc.c)  # at fixed x_bar
    dx = -partial / (loc.slope - w)
    return loc.slope * dx + partial


def d_risk_d_delta(params: GameParams, eq: EquilibriumSolution | None = None) -> tuple:
    """``(dR0/d delta, dR1/d delta)``; negative and positive respectively."""
    require_assumption(params)
    if eq is None:
        eq = solve_equilibrium(params)
    out = []
    for a in (0, 1):
        loc = _local(params, eq, a)
        out.append(loc.weight * _prior_density(params, loc.T) * _threshold_delta(params, loc, a))
    return tuple(out)


def d_switch_d_tau(params: GameParams, eq: EquilibriumSolution, a) -> float:
    loc = _local(params, eq, int(a))
    tau, tau_x = params.tau, params.tau_x
    q = std_quantile(params.sell_level)
    num = (loc.T - params.mu) / tau_x - q / (2.0 * tau_x * math.sqrt(tau + tau_x))
    return -num / equilibrium_denominator(params, eq, a)


class Derivative(NamedTuple):
    value: float
    ambiguous: bool = False


def d_risk_d_tau(params: GameParams, eq: EquilibriumSolution | None = None) -> tuple:
    """``dR_a/d tau`` for ``a = 0, 1``.

    The value is always computed; ``ambiguous`` marks points where ``mu`` lies
    in the band where the sign is not pinned down analytically.
    """
    require_assumption(params)
    if eq is None:
        eq = solve_equilibrium(params)
    regions = classify_regions(params, eq)
    root_tau = math.sqrt(params.tau)
    out = []
    for a in (0, 1):
        loc = _local(params, eq, a)
        gap = loc.T - params.mu
        dens = std_pdf(root_tau * gap)
        direct = gap / (2.0 * root_tau) * dens
        via_switch = root_tau * dens * loc.slope * d_switch_d_tau(params, eq, a)
        out.append(
            Derivative(loc.weight * (direct + via_switch), regions.tau_sign(a) is Sign.AMBIGUOUS)
        )
    return tuple(out)


def _threshold_tau_x(params: GameParams, loc: _Local) -> float:
    """Total ``dT_a/d tau_x``."""
    tau, tau_x = params.tau, params.tau_x
    q = std_quantile(params.sell_level)
    # theta_bar moves with the signal precision even at a fixed switching signal
    partial = (1.0 - params.delta) * std_pdf(loc.u) * loc.u / (2.0 * tau_x) / (1.0 + loc.c)
    num = -loc.x + loc.T + (tau + tau_x) * partial - q / (2.0 * math.sqrt(tau + tau_x))
    den = -tau_x + (tau + tau_x) * loc.slope
    return loc.slope * (-num / den) + partial


def d_risk_d_taux(params: GameParams, eq: EquilibriumSolution | None = None) -> tuple:
    """``(dR0/d tau_x, dR1/d tau_x)``."""
    require_assumption(params)
    if eq is None:
        eq = solve_equilibrium(params)
    root_tau = math.sqrt(params.tau)
    out = []
    for a in (0, 1):
        loc = _local(params, eq, a)
        dens = std_pdf(root_tau * (loc.T - params.mu))
        out.append(loc.weight * root_tau * dens * _threshold_tau_x(params, loc))
    return tuple(out)


class SignedLog(NamedTuple):
    """A derivative stored as ``sign * exp(log_abs)``."""

    sign: int
    log_abs: float

    @property
    def value(self) -> float:
        return self.sign * math.exp(self.log_abs) if self.sign else 0.0


def _log_std_pdf(z: float) -> float:
    return -0.5 * z * z - 0.5 * math.log(2.0 * math.pi)


def d_risk_d_taux_signed(params: GameParams, eq: EquilibriumSolution | None = None) -> tuple:
    """``dR_a/d tau_x`` as sign and log-magnitude, for ``a = 0, 1``.

    Same chain as ``d_risk_d_taux`` with ``phi(u)`` and the prior density
    factored out in logs, so the sign survives where the value underflows:
    ``dT/dtau_x = phi(u)/(1+c) * [(1-delta)/sigma_x * (-num/den) + (1-delta) u/(2 tau_x)]``.
    """
    require_assumption(params)
    if eq is None:
        eq = solve_equilibrium(params)
    tau, tau_x = params.tau, params.tau_x
    root_tau = math.sqrt(tau)
    q = std_quantile(params.sell_level)
    mass = 1.0 - params.delta
    out = []
    for a in (0, 1):
        loc = _local(params, eq, a)
        partial = mass * std_pdf(loc.u) * loc.u / (2.0 * tau_x) / (1.0 + loc.c)
        num = -loc.x + loc.T + (tau + tau_x) * partial - q / (2.0 * math.sqrt(tau + tau_x))
        den = -tau_x + (tau + tau_x) * loc.slope
        bracket = mass / params.sigma_x * (-num / den) + mass * loc.u / (2.0 * tau_x)
        if bracket == 0.0 or loc.weight == 0.0:
            out.append(SignedLog(0, -math.inf))
            continue
        log_abs = (math.log(loc.weight) + math.log(root_tau) + _log_std_pdf(root_tau * (loc.T - params.mu))
                   + _log_std_pdf(loc.u) - math.log1p(loc.c) + math.log(abs(bracket)))
        out.append(SignedLog(int(math.copysign(1, bracket)), log_abs))
    return tuple(out)


@dataclass(frozen=True)
class ShareSlope:
    value: float
    reverse_hazard_0: float
    reverse_hazard_1: float


def d_share_d_mu(params: GameParams, eq: EquilibriumSolution | None = None) -> ShareSlope:
    """``dS1/d mu`` holding both run thresholds fixed.

    Positive because the prior's reverse hazard rate is higher at the lower
    threshold ``T_0`` than at ``T_1``; both rates are returned.
    """
    if not 0.0 < params.p < 1.0:
        raise DegenerateShareError(f"share derivative needs 0 < p < 1, got p={params.p}")
    if eq is None:
        eq = solve_equilibrium(params)
    prior = Gaussian(params.mu, params.sigma)
    f0, f1 = prior.pdf(eq.theta_bar_0), prior.pdf(eq.theta_bar_1)
    F0, F1 = prior.cdf(eq.theta_bar_0), prior.cdf(eq.theta_bar_1)
    total = (1.0 - params.p) * F0 + params.p * F1
    if not total > 0:
        raise DegenerateShareError("run probability underflows to zero")
    p = params.p
    # dF_a/dmu = -f_a with thresholds frozen
    value = p * (1.0 - p) * (F1 * f0 - F0 * f1) / total**2
    return ShareSlope(value, prior.reverse_hazard(eq.theta_bar_0), prior.reverse_hazard(eq.theta_bar_1))


# -- finite differences -------------------------------------------------------


def default_step(params: GameParams, which: str) -> float:
    if which in FD_RELATIVE_STEPS:
        return FD_RELATIVE_STEPS[which] * params.get(which)
    return FD_STEPS.get(which, 1e-6)


def finite_difference(f: Callable[[GameParams], float], at: GameParams, which: str, h: float | None = None) -> float:
    """Central difference ``(f(at + h) - f(at - h)) / 2h`` in the named parameter.

    ``which`` is a field name or ``tau`` / ``tau_x``. ``f`` typically re-solves
    the equilibrium at the shifted parameters.
    """
    if h is None:
        h = default_step(at, which)
    if not h > 0:
        raise StepSizeError(f"step must be positive, got {h}")
    base = at.get(which)
    try:
        up = at.replace(**{which: base + h})
        down = at.replace(**{which: base - h})
        return (f(up) - f(down)) / (2.0 * h)
    except (ParameterError, AssumptionError) as exc:
        raise StepSizeError(f"shift of {which} by ±{h:g} is invalid ({exc}); use a smaller step") from exc


def risk_component_fd(params: GameParams, a: int, which: str, h: float | None = None,
                      eq: EquilibriumSolution | None = None) -> float:
    """Finite difference of ``R_a`` in ``which``, re-solving at each shift.

    When ``F(T_a) > 1/2`` the difference is taken on the complement
    ``-weight * (1 - F)``, which has the same derivative and no cancellation.
    """
    if eq is None:
        eq = solve_equilibrium(params)
    upper = conditional_run_prob(params, eq, a) > 0.5

    def component(q: GameParams) -> float:
        weight = q.p if a else 1.0 - q.p
        sol = solve_equilibrium(q)
        if upper:
            return -weight * conditional_run_prob(q, sol, a, upper=True)
        return weight * conditional_run_prob(q, sol, a)

    if upper and which == "p":
        raise ValueError("complement form is not valid for derivatives in p")
    return finite_difference(component, params, which, h)


class SignEstimate(NamedTuple):
    sign: int
    route: str  # "risk" or "log_gap"


def risk_sign_fd(params: GameParams, a: int, which: str, h: float | None = None,
                 eq: EquilibriumSolution | None = None) -> SignEstimate:
    """Sign of ``dR_a/d which`` by finite differences, resolvable in deep tails.

    Uses the difference of ``R_a`` when it is nonzero. When the threshold sits
    so close to an end of its range that ``R_a`` does not move in double
    precision, the sign is read from the difference of the log distance of
    ``T_a`` to that end (``R_a`` is increasing in ``T_a``).
    """
    if eq is None:
        eq = solve_equilibrium(params)
    fd = risk_component_fd(params, a, which, h, eq)
    if fd != 0.0:
        return SignEstimate(int(math.copysign(1, fd)), "risk")
    near_upper = eq.x_star(a) > eq.theta_bar(a)

    def log_gap(q: GameParams) -> float:
        sol = solve_equilibrium(q)
        return solvency_gaps(a, sol.x_star(a), q)[1 if near_upper else 0]

    d = finite_difference(log_gap, params, which, h)
    if d == 0.0:
        return SignEstimate(0, "log_gap")
    return SignEstimate(int(math.copysign(1, -d if near_upper else d)), "log_gap")


def share_slope_fd(params: GameParams, frozen: EquilibriumSolution | None = None,
                   h: float = FD_STEPS["mu"]) -> float:
    """FD of ``S1`` in ``mu``; ``frozen`` fixes the run thresholds.

    Uses ``dS1 = S0 * S1 * d(log F1 - log F0)`` with each ``log F_a`` from
    ``log_ndtr`` and differenced separately, which stays resolvable when
    both conditional run probabilities are close to 0 or 1.
    """
    base = run_decomposition(params, frozen)

    def log_cdf(a: int) -> Callable[[GameParams], float]:
        def f(q: GameParams) -> float:
            sol = frozen if frozen is not None else solve_equilibrium(q)
            return float(special.log_ndtr((sol.theta_bar(a) - q.mu) / q.sigma))
        return f

    d_log_odds = finite_difference(log_cdf(1), params, "mu", h) - finite_difference(log_cdf(0), params, "mu", h)
    return base.s0 * base.s1 * d_log_odds


# -- report -------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    analytic: float
    fd_value: float
    rel_gap: float
    abs_gap: float
    ambiguous: bool = False
    rtol: float = STATICS_RTOL
    atol: float = STATICS_ATOL

    @property
    def ok(self) -> bool:
        if max(abs(self.analytic), abs(self.fd_value)) < 1e-6:
            return self.abs_gap <= self.atol
        return self.rel_gap <= self.rtol


def compare(analytic: float, fd: float, ambiguous: bool = False, rtol: float = STATICS_RTOL,
            atol: float = STATICS_ATOL) -> Check:
    scale = max(abs(analytic), abs(fd))
    gap = abs(analytic - fd)
    return Check(analytic, fd, gap / scale if scale > 0 else 0.0, gap, ambiguous, rtol, atol)


@dataclass(frozen=True)
class StaticsReport:
    d_r0_d_delta: Check
    d_r1_d_delta: Check
    d_r_d_tau: tuple
    d_r_d_taux: tuple
    d_s1_d_mu: Check
    d_s1_d_mu_total_fd: float
    reverse_hazards: tuple

    def checks(self) -> dict:
        return {
            "d_r0_d_delta": self.d_r0_d_delta,
            "d_r1_d_delta": self.d_r1_d_delta,
            "d_r0_d_tau": self.d_r_d_tau[0],
            "d_r1_d_tau": self.d_r_d_tau[1],
            "d_r0_d_taux": self.d_r_d_taux[0],
            "d_r1_d_taux": self.d_r_d_taux[1],
            "d_s1_d_mu": self.d_s1_d_mu,
        }

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks().values())


def statics_report(params: GameParams, eq: EquilibriumSolution | None = None) -> StaticsReport:
    """Every analytic derivative next to its central finite difference."""
    require_assumption(params)
    if eq is None:
        eq = solve_equilibrium(params)
    delta = d_risk_d_delta(params, eq)
    tau = d_risk_d_tau(params, eq)
    taux = d_risk_d_taux(params, eq)
    fd = {
        (which, a): risk_component_fd(params, a, which, eq=eq)
        for which in ("delta", "tau", "tau_x")
        for a in (0, 1)
    }
    if 0.0 < params.p < 1.0:
        share = d_share_d_mu(params, eq)
        share_check = compare(share.value, share_slope_fd(params, eq, FD_STEPS["mu"]), rtol=SHARE_RTOL)
        total = share_slope_fd(params, None, FD_STEPS["mu"])
        hazards = (share.reverse_hazard_0, share.reverse_hazard_1)
    else:
        share_check = compare(math.nan, math.nan)
        total = math.nan
        hazards = (math.nan, math.nan)
    return StaticsReport(
        d_r0_d_delta=compare(delta[0], fd["delta", 0]),
        d_r1_d_delta=compare(delta[1], fd["delta", 1]),
        d_r_d_tau=tuple(compare(tau[a].value, fd["tau", a], tau[a].ambiguous) for a in (0, 1)),
        d_r_d_taux=tuple(compare(taux[a], fd["tau_x", a]) for a in (0, 1)),
        d_s1_d_mu=share_check,
        d_s1_d_mu_total_fd=total,
        reverse_hazards=hazards,
    )
