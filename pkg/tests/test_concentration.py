import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covsel.concentration import (
    ConcentrationParams,
    aw_empirical_coverage,
    epsilon,
    epsilon_value,
    feasible_rho_interval,
    required_samples,
    rho_min,
)
from covsel.errors import EpsilonInfeasible, RhoInfeasible, ValidationError
from covsel.model import SamplingDistribution, SensorPool, expected_information
from covsel.policies import uniform_distribution


def test_epsilon_frozen_values():
    # sqrt(0.04 ln 60)
    assert epsilon(1.0, 100, 3, 0.1) == pytest.approx(0.4046897360804744, rel=1e-14)
    # 4 ln(60) / 16 > 1 -> eps > 1
    assert epsilon_value(1.0, 16, 3, 0.1) == pytest.approx(math.sqrt(1.023586140555525), rel=1e-14)
    with pytest.raises(EpsilonInfeasible):
        epsilon(1.0, 16, 3, 0.1)


def test_feasible_interval_frozen():
    iv = feasible_rho_interval(100, 3, 0.1)
    assert iv.lo == 1.0
    assert iv.hi == pytest.approx(6.105983416899307, rel=1e-14)
    assert 6.1 in iv and iv.hi not in iv
    assert feasible_rho_interval(10, 3, 0.1).empty


@settings(max_examples=100)
@given(st.floats(1, 50), st.integers(1, 10**6), st.integers(1, 20), st.floats(1e-4, 0.99))
def test_epsilon_round_trip_and_monotonicity(rho, n_s, m, delta):
    eps = epsilon_value(rho, n_s, m, delta)
    assert epsilon_value(rho, n_s + 1, m, delta) < eps
    assert epsilon_value(rho * 1.5, n_s, m, delta) > eps
    assert epsilon_value(rho, n_s, m, delta / 2) > eps
    if eps < 1:
        assert required_samples(rho, eps, m, delta) <= n_s
        assert rho < feasible_rho_interval(n_s, m, delta).hi


def test_required_samples_examples():
    assert required_samples(1.0, 0.4046897360804744, 3, 0.1) == 100
    n = required_samples(2.0, 0.5, 3, 0.1)
    assert epsilon_value(2.0, n, 3, 0.1) <= 0.5 < epsilon_value(2.0, n - 1, 3, 0.1)
    with pytest.raises(ValidationError):
        required_samples(2.0, 1.0, 3, 0.1)


def test_params_validation():
    with pytest.raises(ValidationError):
        epsilon(0.5, 100, 3, 0.1)
    with pytest.raises(ValidationError):
        epsilon(1.0, 100, 3, 1.0)
    with pytest.raises(ValidationError):
        epsilon(1.0, 0, 3, 0.1)
    p = ConcentrationParams.make(2.0, 200, 3, 0.1)
    assert p.to_dict()["epsilon"] == epsilon(2.0, 200, 3, 0.1)


def rho_min_bisection(pool, p, hi=1e6):
    """Oracle: bisection on the smallest rho with Z_j <= rho E[Z] for all j."""
    EZ = expected_information(pool, p)

    def ok(r):
        return all(np.linalg.eigvalsh(r * EZ - Z)[0] >= -1e-12 * r for Z in pool.information)

    lo = 1.0
    if ok(lo):
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def test_rho_min_examples(basis_pool):
    assert rho_min(basis_pool, SamplingDistribution([0.5, 0.5])) == pytest.approx(2.0)
    assert rho_min(basis_pool, SamplingDistribution([0.25, 0.75])) == pytest.approx(4.0)
    twins = SensorPool.from_arrays([[1.0, 1.0], [1.0, 1.0]], 1.0)
    assert rho_min(twins, SamplingDistribution([0.3, 0.7])) == pytest.approx(1.0)
    with pytest.raises(RhoInfeasible):
        rho_min(basis_pool, SamplingDistribution([1.0, 0.0]))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(3, 12), st.integers(0, 2**32 - 1))
def test_rho_min_matches_bisection(m, n_c, seed):
    rng = np.random.default_rng(seed)
    pool = SensorPool.from_arrays(rng.normal(size=(n_c, m)), rng.uniform(0.2, 2.0, n_c))
    w = rng.dirichlet(np.ones(n_c))
    p = SamplingDistribution(w / w.sum())
    assert rho_min(pool, p) == pytest.approx(rho_min_bisection(pool, p), rel=1e-7)


def test_rho_min_at_least_dimension_for_full_rank():
    # trace argument: sum_j p_j tr(E^-1 Z_j) = m, so some Z_j needs rho >= m
    rng = np.random.default_rng(4)
    pool = SensorPool.from_arrays(rng.uniform(size=(40, 3)), 0.5)
    assert rho_min(pool, uniform_distribution(40)) >= 3 - 1e-12


def test_aw_coverage_degenerate_and_deterministic(basis_pool):
    single = SensorPool.from_arrays([[1.0, 2.0]], 0.5)
    assert aw_empirical_coverage(single, SamplingDistribution([1.0]), 10, 0.01, 20, seed=0) == 1.0
    a = aw_empirical_coverage(basis_pool, SamplingDistribution([0.5, 0.5]), 50, 0.3, 100, seed=7)
    b = aw_empirical_coverage(basis_pool, SamplingDistribution([0.5, 0.5]), 50, 0.3, 100, seed=7)
    assert a == b and 0.0 <= a <= 1.0
    # binomial(50, 1/2) within [17.5, 32.5] -> P = sum_{18..32}, about 0.97
    assert a > 0.85
