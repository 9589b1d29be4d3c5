"""Randomized sensor selection for steady-state Kalman filtering."""

__version__ = "0.1.0"

from .bounds import BoundSet, analytic_lower_bound, bound_pair, bounds_for_epsilon
from .concentration import (
    ConcentrationParams,
    aw_empirical_coverage,
    epsilon,
    feasible_rho_interval,
    required_samples,
    rho_min,
)
from .linalg import psd_leq
from .model import (
    CandidateSensor,
    SamplingDistribution,
    Selection,
    SensorPool,
    SystemModel,
    expected_information,
    generate_synthetic_pool,
    load_problem,
    save_problem,
    selection_information,
    sensor_information_matrix,
)
from .optimizer import build_sdp, optimize_for_rho, search_rho, solve_sdp, verify_solution
from .policies import greedy_with_replacement, monte_carlo, sample_selection, uniform_distribution
from .riccati import (
    RecursionOptions,
    information_step,
    is_detectable,
    is_stabilizable,
    monotone_recursion_triple,
    steady_state,
    steady_state_scalar_oracle,
)

__all__ = [
    "BoundSet",
    "CandidateSensor",
    "ConcentrationParams",
    "RecursionOptions",
    "SamplingDistribution",
    "Selection",
    "SensorPool",
    "SystemModel",
    "analytic_lower_bound",
    "aw_empirical_coverage",
    "bound_pair",
    "bounds_for_epsilon",
    "build_sdp",
    "epsilon",
    "expected_information",
    "feasible_rho_interval",
    "generate_synthetic_pool",
    "greedy_with_replacement",
    "information_step",
    "is_detectable",
    "is_stabilizable",
    "load_problem",
    "monotone_recursion_triple",
    "monte_carlo",
    "optimize_for_rho",
    "psd_leq",
    "required_samples",
    "rho_min",
    "sample_selection",
    "save_problem",
    "search_rho",
    "selection_information",
    "sensor_information_matrix",
    "solve_sdp",
    "steady_state",
    "steady_state_scalar_oracle",
    "uniform_distribution",
    "verify_solution",
]
