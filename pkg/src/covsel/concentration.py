"""Deviation level, dominance constant and sample-count arithmetic.

For n_s i.i.d. draws of Z with Z <= rho E[Z] almost surely, the sum
sum_j Z_j lies in the band [(1 - eps) n_s E[Z], (1 + eps) n_s E[Z]] with
probability at least 1 - 2m exp(-eps^2 n_s / (4 rho)). Setting that failure
probability to delta gives

    eps = sqrt(4 rho / n_s * ln(2m / delta)),

which must be < 1 for the band to mean anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EpsilonInfeasible, RhoInfeasible, ValidationError
from .io import substream
from .linalg import psd_leq, sym
from .model import SamplingDistribution, SensorPool, expected_information

RANGE_RTOL = 1e-10


def _check_common(n_s: int, m: int, delta: float) -> None:
    if n_s < 1:
        raise ValidationError(f"n_s must be >= 1, got {n_s}")
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")


def _log_term(m: int, delta: float) -> float:
    return math.log(2.0 * m / delta)


def epsilon_value(rho: float, n_s: int, m: int, delta: float) -> float:
    """The deviation formula without the eps < 1 check."""
    _check_common(n_s, m, delta)
    if not rho >= 1.0:
        raise ValidationError(f"rho must be >= 1, got {rho}")
    return math.sqrt(4.0 * rho / n_s * _log_term(m, delta))


def epsilon(rho: float, n_s: int, m: int, delta: float) -> float:
    """Deviation level for (rho, n_s, m, delta); raises EpsilonInfeasible if it is >= 1."""
    eps = epsilon_value(rho, n_s, m, delta)
    if eps >= 1.0:
        raise EpsilonInfeasible(
            f"eps = {eps:.6g} >= 1 for rho={rho}, n_s={n_s}, m={m}, delta={delta}: too few samples"
        )
    return eps


def required_samples(rho: float, eps: float, m: int, delta: float) -> int:
    """Smallest n_s with n_s >= 4 rho / eps^2 * ln(2m / delta)."""
    if not 0.0 < eps < 1.0:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    if not rho >= 1.0:
        raise ValidationError(f"rho must be >= 1, got {rho}")
    _check_common(1, m, delta)
    bound = 4.0 * rho / eps**2 * _log_term(m, delta)
    n = math.ceil(bound)
    # guard against ceil landing one short/over because of rounding in `bound`
    while n > 1 and epsilon_value(rho, n - 1, m, delta) <= eps:
        n -= 1
    while epsilon_value(rho, n, m, delta) > eps:
        n += 1
    return max(n, 1)


@dataclass(frozen=True)
class RhoInterval:
    """Half-open interval [lo, hi) of admissible dominance constants."""

    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return not self.hi > self.lo

    def __contains__(self, rho: float) -> bool:
        return self.lo <= rho < self.hi


def feasible_rho_interval(n_s: int, m: int, delta: float) -> RhoInterval:
    """[1, n_s / (4 ln(2m/delta))): the rho values with eps < 1."""
    _check_common(n_s, m, delta)
    return RhoInterval(1.0, n_s / (4.0 * _log_term(m, delta)))


@dataclass(frozen=True)
class ConcentrationParams:
    n_s: int
    m: int
    delta: float
    rho: float
    epsilon: float

    @classmethod
    def make(cls, rho: float, n_s: int, m: int, delta: float) -> ConcentrationParams:
        return cls(n_s=n_s, m=m, delta=delta, rho=float(rho), epsilon=epsilon(rho, n_s, m, delta))

    def to_dict(self) -> dict:
        return {"n_s": self.n_s, "m": self.m, "delta": self.delta, "rho": self.rho, "epsilon": self.epsilon}


def _dominance_ratio(info: np.ndarray, EZ: np.ndarray) -> float:
    """max_j lambda_max(E^{-1/2} Z_j E^{-1/2}) on the range of E, or inf on a range violation."""
    w, V = np.linalg.eigh(sym(EZ))
    top = w[-1]
    if top <= 0.0:
        return 1.0 if not np.any(info) else math.inf
    keep = w > RANGE_RTOL * top
    Vr, Vp = V[:, keep], V[:, ~keep]
    traces = np.einsum("jii->j", info)
    if Vp.shape[1]:
        outside = np.einsum("ia,jik,ka->j", Vp, info, Vp)
        if np.any(outside > RANGE_RTOL * np.maximum(traces, 1e-300)):
            return math.inf
    W = Vr / np.sqrt(w[keep])
    M = sym(np.einsum("ia,jik,kb->jab", W, info, W))
    return max(1.0, float(np.linalg.eigvalsh(M)[:, -1].max()))


def rho_min(pool: SensorPool, p: SamplingDistribution) -> float:
    """Smallest rho >= 1 with Z_j <= rho E[Z] for every candidate j (not just the supported ones).

    Raises RhoInfeasible when some Z_j has a component outside range(E[Z]).
    """
    EZ = expected_information(pool, p)
    r = _dominance_ratio(pool.information, EZ)
    if math.isinf(r):
        raise RhoInfeasible("some sensor's information lies outside the range of E[Z]; no finite rho exists")
    return r


def aw_empirical_coverage(
    pool: SensorPool,
    p: SamplingDistribution,
    n_s: int,
    eps: float,
    trials: int,
    seed: int,
) -> float:
    """Fraction of sampled selections whose information sum lies in the (1 +- eps) n_s E[Z] band."""
    from .policies import sample_selection

    if not 0.0 < eps < 1.0:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    EZ = n_s * expected_information(pool, p)
    lo, hi = (1.0 - eps) * EZ, (1.0 + eps) * EZ
    hits = 0
    for t in range(trials):
        sel = sample_selection(p, n_s, substream(seed, t))
        S = sym(np.tensordot(sel.counts(pool.n_c).astype(float), pool.information, axes=1))
        hits += psd_leq(lo, S) and psd_leq(S, hi)
    return hits / trials
