"""Run probability, its collateral / large-sale decomposition, and sign regions.

Sign-region thresholds come from the total derivatives of the run thresholds
``T_a = theta_bar_a(x*_a)`` (see ``statics``). With ``q = Phi^-1(eta/(1+eta)) < 0``
and ``s = sqrt(tau + tau_x)``:

* ``dR_a/dtau > 0`` when ``mu < T_a``; ``dR_a/dtau < 0`` when ``mu > T_a - q/(2 s)``;
  the band between is left undetermined.
* ``dR_a/dtau_x > 0`` iff ``mu > T_a - q/s``.

``printed_thresholds`` returns the published closed forms for comparison;
they differ from the above by a factor ``tau_x`` in the tau band and by
the omitted ``sigma_x`` dependence of ``theta_bar`` in the tau_x threshold.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .equilibrium import EquilibriumSolution, SolverError, solve_equilibrium
from .model import AssumptionError, GameParams, ParameterError, require_assumption
from scipy import special

from .normal import std_cdf, std_quantile, std_sf


@dataclass(frozen=True)
class RiskDecomposition:
    r0: float
    r1: float
    r_total: float
    s0: float
    s1: float
    conditional_0: float
    conditional_1: float

    @property
    def shares_defined(self) -> bool:
        return not math.isnan(self.s0)


def conditional_run_prob(params: GameParams, eq: EquilibriumSolution, a, upper: bool = False) -> float:
    """``F_{mu,sigma}(T_a)``, or its complement when ``upper`` is set."""
    z = (eq.theta_bar(a) - params.mu) / params.sigma
    return std_sf(z) if upper else std_cdf(z)


def run_decomposition(params: GameParams, eq: EquilibriumSolution | None = None) -> RiskDecomposition:
    """Collateral risk ``R0``, large-sale risk ``R1``, total ``R`` and shares.

    Shares are NaN when both components underflow to zero.
    """
    if eq is None:
        eq = solve_equilibrium(params)
    f0 = conditional_run_prob(params, eq, 0)
    f1 = conditional_run_prob(params, eq, 1)
    r0 = (1.0 - params.p) * f0
    r1 = params.p * f1
    total = r0 + r1
    if total > 0:
        s0, s1 = r0 / total, r1 / total
    else:
        s0 = s1 = math.nan
    return RiskDecomposition(r0, r1, total, s0, s1, f0, f1)


def share_log_odds(params: GameParams, eq: EquilibriumSolution | None = None) -> float:
    """``log(R1/R0)``, computed from log-CDFs so it stays finite and ordered
    where ``S1 = 1/(1 + R0/R1)`` itself rounds to 0 or 1. Needs ``0 < p < 1``."""
    if not 0.0 < params.p < 1.0:
        raise ValueError(f"share odds need 0 < p < 1, got p={params.p}")
    if eq is None:
        eq = solve_equilibrium(params)
    z0 = (eq.theta_bar_0 - params.mu) / params.sigma
    z1 = (eq.theta_bar_1 - params.mu) / params.sigma
    return (math.log(params.p) - math.log1p(-params.p)
            + float(special.log_ndtr(z1)) - float(special.log_ndtr(z0)))


class Sign(enum.Enum):
    INCREASES = "increases"
    DECREASES = "decreases"
    AMBIGUOUS = "ambiguous"


class RegionLabel(enum.Enum):
    BOTH_UP = "both_up"
    BOTH_DOWN = "both_down"
    MIXED = "mixed"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class RegionThresholds:
    tau_lower: tuple  # below: dR_a/dtau > 0
    tau_upper: tuple  # above: dR_a/dtau < 0
    tau_x: tuple  # above: dR_a/dtau_x > 0, below: < 0


def _q(params: GameParams) -> float:
    return std_quantile(params.sell_level)


def region_thresholds(params: GameParams, eq: EquilibriumSolution) -> RegionThresholds:
    q = _q(params)
    s = math.sqrt(params.tau + params.tau_x)
    t = (eq.theta_bar_0, eq.theta_bar_1)
    return RegionThresholds(
        tau_lower=t,
        tau_upper=tuple(ti - q / (2.0 * s) for ti in t),
        tau_x=tuple(ti - q / s for ti in t),
    )


def printed_thresholds(params: GameParams, eq: EquilibriumSolution) -> RegionThresholds:
    """Thresholds as published; kept for comparison, not used for classification."""
    q = _q(params)
    tau, tau_x = params.tau, params.tau_x
    s = math.sqrt(tau + tau_x)
    t = (eq.theta_bar_0, eq.theta_bar_1)
    return RegionThresholds(
        tau_lower=t,
        tau_upper=tuple(ti - q / (2.0 * tau_x * s) for ti in t),
        tau_x=tuple(ti - (2.0 * tau + tau_x) * q / (2.0 * tau * s) for ti in t),
    )


@dataclass(frozen=True)
class RegionClassification:
    tau_sign_0: Sign
    tau_sign_1: Sign
    taux_sign_0: Sign
    taux_sign_1: Sign
    region_label_tau: RegionLabel
    region_label_taux: RegionLabel
    thresholds: RegionThresholds

    def tau_sign(self, a) -> Sign:
        return self.tau_sign_1 if a else self.tau_sign_0

    def taux_sign(self, a) -> Sign:
        return self.taux_sign_1 if a else self.taux_sign_0


def _label(s0: Sign, s1: Sign) -> RegionLabel:
    if Sign.AMBIGUOUS in (s0, s1):
        return RegionLabel.AMBIGUOUS
    if s0 is s1:
        return RegionLabel.BOTH_UP if s0 is Sign.INCREASES else RegionLabel.BOTH_DOWN
    return RegionLabel.MIXED


def classify_regions(params: GameParams, eq: EquilibriumSolution | None = None) -> RegionClassification:
    """Sign of ``dR_a/dtau`` and ``dR_a/dtau_x`` implied by the position of ``mu``.

    Thresholds are evaluated at the current parameter point. Exact ties are
    reported as AMBIGUOUS.
    """
    require_assumption(params)
    if eq is None:
        eq = solve_equilibrium(params)
    th = region_thresholds(params, eq)
    mu = params.mu
    tau_signs, taux_signs = [], []
    for a in (0, 1):
        if mu < th.tau_lower[a]:
            tau_signs.append(Sign.INCREASES)
        elif mu > th.tau_upper[a]:
            tau_signs.append(Sign.DECREASES)
        else:
            tau_signs.append(Sign.AMBIGUOUS)
        if mu > th.tau_x[a]:
            taux_signs.append(Sign.INCREASES)
        elif mu < th.tau_x[a]:
            taux_signs.append(Sign.DECREASES)
        else:
            taux_signs.append(Sign.AMBIGUOUS)
    return RegionClassification(
        tau_sign_0=tau_signs[0],
        tau_sign_1=tau_signs[1],
        taux_sign_0=taux_signs[0],
        taux_sign_1=taux_signs[1],
        region_label_tau=_label(*tau_signs),
        region_label_taux=_label(*taux_signs),
        thresholds=th,
    )


@dataclass(frozen=True)
class SharePoint:
    mu: float
    s1: float
    error: str | None = None


def share_curve(params: GameParams, mu_grid) -> list[SharePoint]:
    """Large-sale share ``S1`` after re-solving the equilibrium at each ``mu``.

    Failures are reported per cell (``s1`` NaN, ``error`` set); the sweep
    continues. Output order follows ``mu_grid``.
    """
    out = []
    for mu in mu_grid:
        try:
            point = params.replace(mu=float(mu))
            s1 = run_decomposition(point).s1
            out.append(SharePoint(float(mu), s1))
        except (ParameterError, AssumptionError, SolverError) as exc:
            out.append(SharePoint(float(mu), math.nan, str(exc)))
    return out
