"""Finite-volume simulator and analysis tools for nucleation-driven
growth/dissolution of aggregate size distributions."""

from .asymptotics import (
    beta_one_limit,
    conjectured_exponents,
    fit_power_law,
    invariant_product,
)
from .config import (
    InitialCondition,
    RunConfig,
    config_from_dict,
    config_from_preset,
    load_config,
    serialize_config,
)
from .diagnostics import (
    LyapunovChoice,
    TimeSeries,
    dissipation_D,
    lyapunov_H,
    moment_balance_residual,
    normalized_profile,
    tail_distribution,
)
from .errors import (
    ConfigError,
    ConstantPhiError,
    FitError,
    HypothesisError,
    LsnucError,
    MonomerUnderflowError,
    NegativeDensityError,
    NotApplicableError,
    OracleError,
    SolverError,
)
from .kinetics import (
    RateModel,
    antiderivative_A,
    antiderivative_Psi,
    eval_a,
    eval_b,
    eval_nucleation,
    eval_phi,
    eval_phi_inverse,
    inverse_A,
    validate_hypotheses,
)
from .oracle import (
    OracleSolution,
    characteristic_X,
    compare_with_fv,
    density_at,
    limit_density,
    solve_history,
)
from .solver import RunResult, SolverConfig, cfl_dt, run, step, upwind_fluxes
from .state import Grid, SimState, mass_concentration, moment, monomer, weighted_moment

__version__ = "0.1.0"

__all__ = [
    "Grid", "SimState", "RateModel", "SolverConfig", "RunResult",
    "RunConfig", "InitialCondition", "LyapunovChoice", "TimeSeries",
    "OracleSolution",
    "run", "step", "upwind_fluxes", "cfl_dt",
    "eval_a", "eval_b", "eval_phi", "eval_phi_inverse", "eval_nucleation",
    "antiderivative_A", "inverse_A", "antiderivative_Psi",
    "validate_hypotheses",
    "moment", "weighted_moment", "monomer", "mass_concentration",
    "lyapunov_H", "dissipation_D", "tail_distribution", "normalized_profile",
    "moment_balance_residual",
    "conjectured_exponents", "fit_power_law", "invariant_product",
    "beta_one_limit",
    "solve_history", "density_at", "characteristic_X", "limit_density",
    "compare_with_fv",
    "load_config", "config_from_dict", "config_from_preset",
    "serialize_config",
    "LsnucError", "ConfigError", "SolverError", "ConstantPhiError",
    "HypothesisError", "NegativeDensityError", "MonomerUnderflowError",
    "OracleError", "FitError", "NotApplicableError",
]
