"""Steady-state covariance bounds for a sampling distribution.

With eps the deviation level, the upper and lower bounds are the steady
states driven by (1 - eps) n_s E[Z] and (1 + eps) n_s E[Z]; the analytic
lower bound on E[P_S] is the steady state driven by n_s E[Z] (the eps = 0
limit of both). Whenever the sampled information lands inside its
concentration band, P_L <= P_S <= P_U.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .concentration import ConcentrationParams, feasible_rho_interval, rho_min
from .errors import EpsilonInfeasible, RhoInfeasible, Undetectable, ValidationError
from .linalg import lambda_max, psd_leq
from .model import SamplingDistribution, SensorPool, SystemModel, expected_information
from .riccati import DEFAULT_OPTIONS, RecursionOptions, SteadyStateResult, information_detectable, steady_state

__all__ = ["BoundSet", "analytic_lower_bound", "bound_pair", "bounds_for_epsilon", "psd_leq"]

RHO_SLACK = 1e-8


@dataclass(frozen=True)
class BoundSet:
    eps: float
    P_U: np.ndarray
    P_L: np.ndarray
    L: np.ndarray
    params: ConcentrationParams | None
    upper: SteadyStateResult
    lower: SteadyStateResult
    mean_lower: SteadyStateResult

    @property
    def P_I(self) -> np.ndarray:
        return self.L

    @property
    def lambda_max_PU(self) -> float:
        return lambda_max(self.P_U)

    @property
    def lambda_max_PL(self) -> float:
        return lambda_max(self.P_L)

    def contains(self, P: np.ndarray) -> bool:
        return psd_leq(self.P_L, P) and psd_leq(P, self.P_U)

    def to_dict(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "params": None if self.params is None else self.params.to_dict(),
            "P_U": self.P_U.tolist(),
            "P_L": self.P_L.tolist(),
            "L": self.L.tolist(),
            "lambda_max_PU": self.lambda_max_PU,
            "lambda_max_PL": self.lambda_max_PL,
            "lambda_max_L": lambda_max(self.L),
            "iterations": {
                "P_U": self.upper.iterations,
                "P_L": self.lower.iterations,
                "L": self.mean_lower.iterations,
            },
        }


def _check_detectable(model: SystemModel, EZ: np.ndarray) -> None:
    if not information_detectable(model.A, EZ):
        raise Undetectable("(A, E[Z]^{1/2}) is not detectable")


def bounds_for_epsilon(
    model: SystemModel,
    EZ: np.ndarray,
    n_s: int,
    eps: float,
    opts: RecursionOptions = DEFAULT_OPTIONS,
    params: ConcentrationParams | None = None,
) -> BoundSet:
    """Bound matrices for an explicit deviation level eps in [0, 1).

    No concentration hypotheses are checked here; eps = 0 is allowed and
    collapses both bounds onto the analytic lower bound.
    """
    if n_s < 1:
        raise ValidationError(f"n_s must be >= 1, got {n_s}")
    if not 0.0 <= eps < 1.0:
        raise EpsilonInfeasible(f"eps must lie in [0, 1), got {eps}")
    _check_detectable(model, EZ)
    upper = steady_state(model, (1.0 - eps) * n_s * EZ, opts)
    lower = steady_state(model, (1.0 + eps) * n_s * EZ, opts)
    mean_lower = steady_state(model, n_s * EZ, opts)
    return BoundSet(eps, upper.P, lower.P, mean_lower.P, params, upper, lower, mean_lower)


def bound_pair(
    model: SystemModel,
    pool: SensorPool,
    p: SamplingDistribution,
    n_s: int,
    delta: float,
    rho: float,
    opts: RecursionOptions = DEFAULT_OPTIONS,
) -> BoundSet:
    """Probabilistic bounds P_L <= P_S <= P_U holding with probability >= 1 - delta.

    Each failed hypothesis raises its own error: EpsilonInfeasible (rho outside
    the eps < 1 interval), RhoInfeasible (Z_j <= rho E[Z] fails for some j),
    Undetectable, or the steady-state solver's NonConvergent/Diverging.
    """
    interval = feasible_rho_interval(n_s, pool.m, delta)
    if rho not in interval:
        raise EpsilonInfeasible(f"rho={rho} outside the feasible interval [{interval.lo}, {interval.hi:.6g})")
    params = ConcentrationParams.make(rho, n_s, pool.m, delta)
    needed = rho_min(pool, p)
    if needed > rho * (1.0 + RHO_SLACK):
        raise RhoInfeasible(f"distribution needs rho >= {needed:.6g} but rho={rho}")
    EZ = expected_information(pool, p)
    return bounds_for_epsilon(model, EZ, n_s, params.epsilon, opts, params)


def analytic_lower_bound(
    model: SystemModel,
    pool: SensorPool,
    p: SamplingDistribution,
    n_s: int,
    opts: RecursionOptions = DEFAULT_OPTIONS,
) -> np.ndarray:
    """Steady state driven by n_s E[Z]; a Loewner lower bound on E[P_S]."""
    if n_s < 1:
        raise ValidationError(f"n_s must be >= 1, got {n_s}")
    EZ = expected_information(pool, p)
    _check_detectable(model, EZ)
    return steady_state(model, n_s * EZ, opts).P
