"""Game primitives, parameter checks, Bayesian posterior and the
complete-information equilibrium table.

Conventions used throughout the package:

* signals are ``x_i = theta + eps_i`` with ``eps_i ~ N(0, sigma_x**2)``;
* the posterior scale is a standard deviation,
  ``sqrt(sigma**2 * sigma_x**2 / (sigma**2 + sigma_x**2))``;
* sale state ``a = 0`` means no large sale, ``a = 1`` means the large seller
  dumped its mass ``delta``.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

from .normal import SQRT_2PI, Gaussian


class ParameterError(ValueError):
    """A game primitive is outside its domain."""

    def __init__(self, field: str, value, requirement: str):
        self.field = field
        self.value = value
        super().__init__(f"{field}={value!r} violates {requirement}")


class AssumptionError(ValueError):
    """The uniqueness assumption fails, so switching-threshold uniqueness is not guaranteed."""


PARAM_NAMES = ("mu", "sigma", "sigma_x", "delta", "eta", "p")


@dataclass(frozen=True)
class GameParams:
    mu: float
    sigma: float
    sigma_x: float
    delta: float
    eta: float
    p: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParameterError(name, value, "a real number")
            if not math.isfinite(value):
                raise ParameterError(name, value, "finiteness")
            object.__setattr__(self, name, float(value))
        if not self.sigma > 0:
            raise ParameterError("sigma", self.sigma, "sigma > 0")
        if not self.sigma_x > 0:
            raise ParameterError("sigma_x", self.sigma_x, "sigma_x > 0")
        if not 0 < self.delta < 1:
            raise ParameterError("delta", self.delta, "0 < delta < 1")
        if not self.eta > 0:
            raise ParameterError("eta", self.eta, "eta > 0")
        if not 0 <= self.p <= 1:
            raise ParameterError("p", self.p, "0 <= p <= 1")

    @property
    def tau(self) -> float:
        """Prior precision ``sigma**-2``."""
        return self.sigma**-2

    @property
    def tau_x(self) -> float:
        """Signal precision ``sigma_x**-2``."""
        return self.sigma_x**-2

    @property
    def sell_level(self) -> float:
        """Posterior insolvency probability at which an investor is indifferent."""
        return self.eta / (1.0 + self.eta)

    @property
    def prior(self) -> Gaussian:
        return Gaussian(self.mu, self.sigma)

    def replace(self, **changes) -> "GameParams":
        """Copy with fields changed. ``tau``/``tau_x`` are accepted and mapped to sds."""
        if "tau" in changes:
            changes["sigma"] = _precision_to_sd("tau", changes.pop("tau"))
        if "tau_x" in changes:
            changes["sigma_x"] = _precision_to_sd("tau_x", changes.pop("tau_x"))
        return dataclasses.replace(self, **changes)

    def get(self, name: str) -> float:
        if name == "tau":
            return self.tau
        if name == "tau_x":
            return self.tau_x
        if name not in PARAM_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}


def _precision_to_sd(name, value):
    if not value > 0:
        raise ParameterError(name, value, f"{name} > 0")
    return value**-0.5


# Calibration used in examples, docs and acceptance checks.
REFERENCE = GameParams(mu=0.7, sigma=0.15, sigma_x=0.05, delta=0.2, eta=0.1, p=0.3)

ASSUMPTION_TEXT = "(1−δ)σₓ ≥ √(2π)σ²"


@dataclass(frozen=True)
class AssumptionReport:
    holds: bool
    slack: float
    eta_ok: bool
    dispersion_ok: bool

    def reasons(self) -> list[str]:
        out = []
        if not self.eta_ok:
            out.append("η ≥ 1")
        if not self.dispersion_ok:
            out.append(ASSUMPTION_TEXT)
        return out


def validate(params: GameParams) -> AssumptionReport:
    """Check the uniqueness assumption: ``eta < 1`` and ``(1-delta) sigma_x < sqrt(2 pi) sigma**2``.

    ``slack`` is the margin of the dispersion inequality (positive when it holds).
    """
    slack = SQRT_2PI * params.sigma**2 - (1.0 - params.delta) * params.sigma_x
    eta_ok = params.eta < 1.0
    dispersion_ok = slack > 0.0
    return AssumptionReport(eta_ok and dispersion_ok, slack, eta_ok, dispersion_ok)


def require_assumption(params: GameParams) -> None:
    report = validate(params)
    if not report.holds:
        raise AssumptionError(
            "uniqueness assumption violated: " + "; ".join(report.reasons())
        )


@dataclass(frozen=True)
class Posterior:
    mean: float
    sd: float


def posterior_weight(params: GameParams) -> float:
    """Weight on the signal in the posterior mean, ``sigma**2 / (sigma**2 + sigma_x**2)``."""
    s2, sx2 = params.sigma**2, params.sigma_x**2
    return s2 / (s2 + sx2)


def posterior_sd(params: GameParams) -> float:
    s2, sx2 = params.sigma**2, params.sigma_x**2
    return math.sqrt(s2 * sx2 / (s2 + sx2))


def posterior_mean(params: GameParams, x):
    """Posterior mean of theta given signal(s) ``x``; works on arrays."""
    s2, sx2 = params.sigma**2, params.sigma_x**2
    return (s2 * x + sx2 * params.mu) / (s2 + sx2)


def posterior(params: GameParams, x_i: float) -> Posterior:
    return Posterior(float(posterior_mean(params, float(x_i))), posterior_sd(params))


class Regime(enum.Enum):
    ALL_SELL_UNIQUE = "all_sell_unique"
    MULTIPLE = "multiple"
    ALL_HOLD_UNIQUE = "all_hold_unique"


_REGIME_SETS = {
    Regime.ALL_SELL_UNIQUE: frozenset({1}),
    Regime.MULTIPLE: frozenset({0, 1}),
    Regime.ALL_HOLD_UNIQUE: frozenset({0}),
}


@dataclass(frozen=True)
class CompleteInfoOutcome:
    sale_occurred: bool
    regime: Regime

    @property
    def equilibrium_set(self) -> frozenset:
        """Admissible equilibrium proportions of selling investors."""
        return _REGIME_SETS[self.regime]


def classify_complete_info(theta: float, delta: float, sale_occurred: bool) -> CompleteInfoOutcome:
    """Equilibrium investor selling proportions when theta is common knowledge.

    Intervals are left-open and right-closed, so ties go to the lower cell.
    Without a sale every theta <= 1 - delta admits both equilibria (the table
    as published, including theta <= 0).
    """
    if not 0 < delta < 1:
        raise ParameterError("delta", delta, "0 < delta < 1")
    if sale_occurred:
        if theta <= delta:
            regime = Regime.ALL_SELL_UNIQUE
        elif theta <= 1.0:
            regime = Regime.MULTIPLE
        else:
            regime = Regime.ALL_HOLD_UNIQUE
    else:
        regime = Regime.MULTIPLE if theta <= 1.0 - delta else Regime.ALL_HOLD_UNIQUE
    return CompleteInfoOutcome(bool(sale_occurred), regime)
