"""Discrete-investor Monte Carlo of the run game and best-response iteration.

Each trial draws, in order, fundamentals ``theta ~ N(mu, sigma**2)``, the sale
indicator (``U < p``), then ``N`` signal noises. Investor ``i`` sells iff
``theta + sigma_x * eps_i <= x_bar_a``; the selling mass is
``lambda = a*delta + (1-delta) * sellers/N`` and the issuer fails iff
``lambda >= theta``.

Every trial gets its own Philox stream keyed by ``(seed, trial_index)``, so a
trial's outcome does not depend on which other trials ran or in what order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibrium import EquilibriumSolution, solvency_threshold
from .model import GameParams, posterior_sd, posterior_weight, require_assumption
from .normal import std_quantile

UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class SimConfig:
    n_investors: int
    n_trials: int
    seed: int
    thresholds: tuple  # (x_bar_0, x_bar_1)

    def __post_init__(self):
        for name in ("n_investors", "n_trials", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValueError(f"{name} must be an integer, got {value!r}")
        if self.n_investors < 1:
            raise ValueError(f"n_investors must be >= 1, got {self.n_investors}")
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if not 0 <= self.seed <= UINT64_MAX:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if len(self.thresholds) != 2:
            raise ValueError("thresholds must be a pair (x_bar_0, x_bar_1)")
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    @classmethod
    def at_equilibrium(cls, eq: EquilibriumSolution, n_investors: int, n_trials: int, seed: int):
        return cls(n_investors, n_trials, seed, (eq.x_star_0, eq.x_star_1))


@dataclass(frozen=True)
class TrialOutcome:
    ran: bool
    sale: bool
    theta: float
    lam: float


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Independent generator for one trial: Philox with a 128-bit key ``(seed, index)``."""
    key = np.array([seed, trial_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def simulate_once(params: GameParams, cfg: SimConfig, trial_index: int) -> TrialOutcome:
    rng = trial_rng(cfg.seed, trial_index)
    theta = params.mu + params.sigma * rng.standard_normal()
    sale = bool(rng.random() < params.p)
    a = int(sale)
    eps = rng.standard_normal(cfg.n_investors)
    # x_i <= x_bar  <=>  eps_i <= (x_bar - theta)/sigma_x
    cut = (cfg.thresholds[a] - theta) / params.sigma_x
    sellers = int(np.count_nonzero(eps <= cut))
    lam = a * params.delta + (1.0 - params.delta) * sellers / cfg.n_investors
    return TrialOutcome(lam >= theta, sale, float(theta), float(lam))


@dataclass(frozen=True)
class SimulationReport:
    empirical_run_prob: float
    empirical_r0: float
    empirical_r1: float
    std_error: float
    trials: int
    sale_trials: int

    @property
    def no_sale_trials(self) -> int:
        return self.trials - self.sale_trials


def _report(runs_0: int, runs_1: int, n: int, sale_trials: int) -> SimulationReport:
    r0, r1 = runs_0 / n, runs_1 / n
    # add the counts, not the rates, so that r0 + r1 == total exactly
    total = (runs_0 + runs_1) / n
    return SimulationReport(total, r0, r1, math.sqrt(total * (1.0 - total) / n), n, sale_trials)


def estimate_run_prob(params: GameParams, cfg: SimConfig) -> SimulationReport:
    """Average of ``simulate_once`` over ``cfg.n_trials`` trials.

    ``empirical_r0``/``empirical_r1`` are run frequencies without/with the sale
    over all trials, so they estimate ``R0``/``R1`` directly.
    """
    runs = [0, 0]
    sale_trials = 0
    for k in range(cfg.n_trials):
        out = simulate_once(params, cfg, k)
        sale_trials += out.sale
        runs[out.sale] += out.ran
    return _report(runs[0], runs[1], cfg.n_trials, sale_trials)


def continuum_disagreement(params: GameParams, cfg: SimConfig) -> float:
    """Share of trials where the discrete outcome differs from the continuum one.

    The continuum population with switching signal ``x_bar_a`` fails iff
    ``theta <= theta_bar_a(x_bar_a)``. Both rules are applied to the same draws,
    so the result isolates the finite-population error from sampling noise.
    """
    cuts = [solvency_threshold(a, cfg.thresholds[a], params) for a in (0, 1)]
    differ = 0
    for k in range(cfg.n_trials):
        out = simulate_once(params, cfg, k)
        differ += out.ran != (out.theta <= cuts[out.sale])
    return differ / cfg.n_trials


# -- best response ------------------------------------------------------------


def best_response(x_bar_pair, params: GameParams) -> tuple:
    """Indifference signals against populations switching at ``x_bar_pair``.

    For each sale state the posterior probability of ``theta <= theta_bar_a(x_bar_a)``
    is ``Phi((T - mu_p(x))/sd_p)``; setting it to ``eta/(1+eta)`` and inverting the
    posterior mean gives ``x = mu + (T - q*sd_p - mu)/w`` in closed form.
    """
    require_assumption(params)
    q = std_quantile(params.sell_level)
    w = posterior_weight(params)
    sd = posterior_sd(params)
    out = []
    for a, x_bar in enumerate(x_bar_pair):
        target = solvency_threshold(a, float(x_bar), params) - q * sd
        out.append(params.mu + (target - params.mu) / w)
    return tuple(out)


@dataclass(frozen=True)
class IterationResult:
    pair: tuple
    iterations: int
    converged: bool
    error: float


def iterate_best_response(params: GameParams, start=None, tol: float = 1e-8, max_iter: int = 200,
                          target=None) -> IterationResult:
    """Fixed-point iteration of ``best_response`` from ``start`` (default ``(mu, mu)``).

    Stops when the largest componentwise distance to ``target`` is within
    ``tol``, or, without a target, when one step moves less than ``tol``.
    The map contracts at rate ``dtheta_bar/dx_bar / w`` near the fixed point,
    which approaches 1 when signals are much more precise than the prior.
    """
    pair = (params.mu, params.mu) if start is None else tuple(float(s) for s in start)
    err = math.inf
    for it in range(1, max_iter + 1):
        nxt = best_response(pair, params)
        ref = pair if target is None else target
        err = max(abs(n - r) for n, r in zip(nxt, ref))
        pair = nxt
        if err <= tol:
            return IterationResult(pair, it, True, err)
    return IterationResult(pair, max_iter, False, err)
