"""Stablecoin run game with a large seller: equilibrium, run-risk decomposition,
comparative statics and a discrete-investor Monte Carlo check."""

from .equilibrium import (
    EquilibriumSolution,
    SolverError,
    marginal_differential,
    payoff_differential,
    solve_equilibrium,
    solve_switching_threshold,
    solvency_gaps,
    solvency_threshold,
)
from .model import (
    REFERENCE,
    AssumptionError,
    GameParams,
    ParameterError,
    classify_complete_info,
    posterior,
    validate,
)
from .normal import Gaussian
from .risk import RiskDecomposition, classify_regions, run_decomposition, share_curve
from .simulate import SimConfig, best_response, estimate_run_prob, iterate_best_response, simulate_once
from .statics import (
    d_risk_d_delta,
    d_risk_d_tau,
    d_risk_d_taux,
    d_risk_d_taux_signed,
    d_share_d_mu,
    d_theta_bar_d_xbar,
    finite_difference,
    statics_report,
)

__version__ = "0.1.0"
