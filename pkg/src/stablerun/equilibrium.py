"""Solvency thresholds and equilibrium switching signals.

For a population that sells iff its signal is at most ``x_bar``, the mass of
selling investors at fundamentals ``theta`` is ``Phi((x_bar - theta)/sigma_x)``
and the issuer fails iff ``theta <= a*delta + (1-delta)*that mass``. The
solvency threshold ``theta_bar_a(x_bar)`` is the unique root of

    g(theta) = theta - a*delta - (1-delta) * Phi((x_bar - theta)/sigma_x)

and the switching signal ``x*_a`` is the unique root of the marginal investor's
differential ``G_a(x_bar) = Phi((theta_bar_a(x_bar) - mu_p(x_bar))/sd_p) - eta/(1+eta)``.
"""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass

import numpy as np
from scipy import special

from .model import (
    GameParams,
    posterior_mean,
    posterior_sd,
    posterior_weight,
    require_assumption,
)
from .normal import INV_SQRT_2PI, std_cdf, std_pdf

EPS = sys.float_info.epsilon
MAX_ITER = 200
BRACKET_STEPS = 100


class SolverError(RuntimeError):
    """A root could not be bracketed or did not converge."""


class SaleState(enum.IntEnum):
    NO_SALE = 0
    SALE = 1


def _state(a) -> int:
    a = int(a)
    if a not in (0, 1):
        raise ValueError(f"sale state must be 0 or 1, got {a}")
    return a


def lambda_investors(theta, x_bar, sigma_x: float):
    """Fraction of investors whose signal is at most ``x_bar`` when fundamentals are ``theta``."""
    return std_cdf((x_bar - theta) / sigma_x)


# -- solvency threshold -----------------------------------------------------


def _theta_bar_scalar(a: int, x: float, delta: float, sigma_x: float):
    base = a * delta
    mass = 1.0 - delta
    lo, hi = base, base + mass
    if x == -math.inf:
        return base, 0.0, 0
    if x == math.inf:
        return hi, 0.0, 0
    theta = base + mass * std_cdf((x - (lo + hi) / 2) / sigma_x)
    step = step_old = hi - lo
    gval = 0.0
    for it in range(1, MAX_ITER + 1):
        u = (x - theta) / sigma_x
        gval = theta - base - mass * std_cdf(u)
        if gval == 0.0:
            return theta, 0.0, it
        if gval > 0.0:
            hi = theta
        else:
            lo = theta
        if abs(gval) <= 1e-16 or hi - lo <= 4 * EPS * max(1.0, abs(theta)):
            return theta, abs(gval), it
        slope = 1.0 + mass * INV_SQRT_2PI * math.exp(-0.5 * u * u) / sigma_x
        nxt = theta - gval / slope
        # Newton only while it lands inside the bracket and at least halves the step
        if not lo < nxt < hi or abs(2.0 * gval) > abs(step_old * slope):
            nxt = 0.5 * (lo + hi)
        step_old, step = step, abs(nxt - theta)
        if step <= EPS * max(1.0, abs(theta)):
            return theta, abs(gval), it
        theta = nxt
    raise SolverError(f"solvency threshold did not converge (a={a}, x_bar={x!r}, |g|={abs(gval):.3e})")


def _theta_bar_array(a: int, x: np.ndarray, delta: float, sigma_x: float):
    base = a * delta
    mass = 1.0 - delta
    lo = np.full(x.shape, base)
    hi = np.full(x.shape, base + mass)
    theta = base + mass * std_cdf((x - (base + mass / 2)) / sigma_x)
    theta = np.where(np.isneginf(x), base, np.where(np.isposinf(x), base + mass, theta))
    step = np.full(x.shape, mass)
    step_old = step.copy()
    active = np.isfinite(x)
    gval = np.zeros(x.shape)
    for _ in range(MAX_ITER):
        if not active.any():
            break
        u = (x - theta) / sigma_x
        g_now = theta - base - mass * std_cdf(u)
        gval = np.where(active, g_now, gval)
        hi = np.where(active & (g_now > 0), theta, hi)
        lo = np.where(active & (g_now < 0), theta, lo)
        done = (np.abs(g_now) <= 1e-16) | (hi - lo <= 4 * EPS * np.maximum(1.0, np.abs(theta)))
        slope = 1.0 + mass * std_pdf(u) / sigma_x
        nxt = theta - g_now / slope
        bad = ~((nxt > lo) & (nxt < hi)) | (np.abs(2.0 * g_now) > np.abs(step_old * slope))
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        step_old, step = step, np.abs(nxt - theta)
        done |= step <= EPS * np.maximum(1.0, np.abs(theta))
        active &= ~done
        theta = np.where(active, nxt, theta)
    else:
        if active.any():
            raise SolverError("solvency threshold did not converge on part of the grid")
    return theta, np.abs(gval)


def solvency_threshold(a, x_bar, params: GameParams):
    """``theta_bar_a(x_bar)``: fundamentals at which selling mass equals reserves.

    Accepts a scalar or an array of ``x_bar``. The root lies in
    ``[a*delta, a*delta + 1 - delta]``; ``x_bar = -inf`` maps to ``a*delta``.
    Does not require the uniqueness assumption.
    """
    a = _state(a)
    if np.ndim(x_bar) == 0:
        return _theta_bar_scalar(a, float(x_bar), params.delta, params.sigma_x)[0]
    x = np.asarray(x_bar, dtype=float)
    return _theta_bar_array(a, x, params.delta, params.sigma_x)[0]


def solvency_gaps(a, x_bar: float, params: GameParams) -> tuple:
    """Log distances of ``theta_bar_a(x_bar)`` from both ends of its range.

    Returns ``(log(theta_bar - a*delta), log(a*delta + 1 - delta - theta_bar))``,
    computed as ``log(1-delta) + log Phi(±u)`` with ``u = (x_bar - theta_bar)/sigma_x``.
    Both are finite whenever ``x_bar`` is, so the strict bounds on the
    threshold can be verified even where the threshold itself rounds to an end.
    """
    a = _state(a)
    theta = solvency_threshold(a, x_bar, params)
    u = (float(x_bar) - theta) / params.sigma_x
    log_mass = math.log1p(-params.delta)
    return log_mass + float(special.log_ndtr(u)), log_mass + float(special.log_ndtr(-u))


def threshold_slope(theta_bar, x_bar, params: GameParams):
    """``d theta_bar / d x_bar = c/(1+c)`` with ``c = (1-delta)/sigma_x * phi((theta_bar - x_bar)/sigma_x)``."""
    c = (1.0 - params.delta) / params.sigma_x * std_pdf((theta_bar - x_bar) / params.sigma_x)
    return c / (1.0 + c)


# -- marginal investor --------------------------------------------------------


def _differential(a: int, x, params: GameParams):
    """Unchecked ``G_a(x)`` together with the threshold and posterior z-score."""
    theta = solvency_threshold(a, x, params)
    z = (theta - posterior_mean(params, x)) / posterior_sd(params)
    return std_cdf(z) - params.sell_level, theta, z


def _differential_slope(theta, z, x, params: GameParams):
    return std_pdf(z) / posterior_sd(params) * (
        threshold_slope(theta, x, params) - posterior_weight(params)
    )


def marginal_differential(a, x_bar, params: GameParams):
    """``G_a(x_bar) = F_{mu_p(x_bar), sd_p}(theta_bar_a(x_bar)) - eta/(1+eta)``.

    Strictly decreasing from ``1/(1+eta)`` to ``-eta/(1+eta)`` under
    the uniqueness assumption, which is enforced.
    """
    require_assumption(params)
    return _differential(_state(a), x_bar, params)[0]


def payoff_differential(a, x_bar, params: GameParams):
    """Sell-minus-hold expected payoff of the marginal investor, ``(1+eta) * G_a``."""
    return (1.0 + params.eta) * marginal_differential(a, x_bar, params)


@dataclass(frozen=True)
class RootInfo:
    x: float
    residual: float
    iterations: int


def _bracket(a: int, params: GameParams):
    """Expand around ``mu`` until ``G`` changes sign; widths ``sigma * 2**k``."""
    mu = params.mu
    g_mid = _differential(a, mu, params)[0]
    if g_mid == 0.0:
        return mu, mu
    left, right = (mu, None) if g_mid > 0 else (None, mu)
    for k in range(BRACKET_STEPS):
        width = params.sigma * 2.0**k
        lo, hi = mu - width, mu + width
        if left is None:
            if _differential(a, lo, params)[0] > 0:
                left = lo
        elif _differential(a, hi, params)[0] < 0:
            right = hi
        if left is not None and right is not None:
            return left, right
        # keep the inner points as tight as possible
        if left is None:
            right = lo
        else:
            left = hi
    raise SolverError(
        f"could not bracket x*_{a} within mu ± sigma*2**{BRACKET_STEPS - 1}"
    )


def _solve_root(a: int, params: GameParams) -> RootInfo:
    lo, hi = _bracket(a, params)
    if lo == hi:
        return RootInfo(lo, 0.0, 0)
    x = 0.5 * (lo + hi)
    step = step_old = hi - lo
    best = (math.inf, x)
    for it in range(1, MAX_ITER + 1):
        gval, theta, z = _differential(a, x, params)
        if abs(gval) < best[0]:
            best = (abs(gval), x)
        if gval == 0.0 or abs(gval) <= 1e-16:
            return RootInfo(x, abs(gval), it)
        if gval > 0:
            lo = x
        else:
            hi = x
        if hi - lo <= 2 * EPS * max(1.0, abs(x)):
            break
        slope = _differential_slope(theta, z, x, params)
        nxt = x - gval / slope if slope < 0 else 0.5 * (lo + hi)
        if not lo < nxt < hi or abs(2.0 * gval) > abs(step_old * slope):
            nxt = 0.5 * (lo + hi)
        step_old, step = step, abs(nxt - x)
        if step <= EPS * max(1.0, abs(x)):
            break
        x = nxt
    else:
        if best[0] > 1e-11:
            raise SolverError(f"x*_{a} did not converge (|G|={best[0]:.3e})")
    return RootInfo(best[1], best[0], it)


def solve_switching_threshold(a, params: GameParams) -> float:
    """Equilibrium switching signal ``x*_a``: investors sell iff their signal is at most it."""
    require_assumption(params)
    return _solve_root(_state(a), params).x


@dataclass(frozen=True)
class EquilibriumSolution:
    x_star_0: float
    x_star_1: float
    theta_bar_0: float
    theta_bar_1: float
    residuals: tuple
    iterations: tuple

    def x_star(self, a) -> float:
        return self.x_star_1 if _state(a) else self.x_star_0

    def theta_bar(self, a) -> float:
        """Run threshold ``theta_bar_a(x*_a)`` in sale state ``a``."""
        return self.theta_bar_1 if _state(a) else self.theta_bar_0


def solve_equilibrium(params: GameParams) -> EquilibriumSolution:
    require_assumption(params)
    roots = [_solve_root(a, params) for a in (0, 1)]
    thetas = [solvency_threshold(a, roots[a].x, params) for a in (0, 1)]
    return EquilibriumSolution(
        x_star_0=roots[0].x,
        x_star_1=roots[1].x,
        theta_bar_0=thetas[0],
        theta_bar_1=thetas[1],
        residuals=(roots[0].residual, roots[1].residual),
        iterations=(roots[0].iterations, roots[1].iterations),
    )
