import numpy as np
import pytest

from covsel.bounds import bound_pair
from covsel.concentration import rho_min
from covsel.errors import ValidationError
from covsel.io import substream
from covsel.model import SamplingDistribution, SensorPool, SystemModel, expected_information
from covsel.policies import (
    Within,
    greedy_with_replacement,
    monte_carlo,
    sample_selection,
    trial_records_csv,
    uniform_distribution,
)
from covsel.riccati import steady_state


def test_uniform_distribution():
    assert uniform_distribution(4).weights.tolist() == [0.25] * 4
    assert uniform_distribution(1).weights.tolist() == [1.0]
    assert np.allclose(uniform_distribution(200).weights, 0.005)
    with pytest.raises(ValidationError):
        uniform_distribution(0)


def test_sampling_degenerate_cases():
    rng = np.random.default_rng(0)
    assert set(sample_selection(SamplingDistribution([1.0]), 50, rng).indices) == {0}
    assert set(sample_selection(SamplingDistribution([0.0, 1.0]), 50, rng).indices) == {1}
    assert set(sample_selection(SamplingDistribution([0.5, 0.0, 0.5]), 500, rng).indices) == {0, 2}


def test_sampling_frequencies_within_binomial_band():
    p = SamplingDistribution([0.1, 0.2, 0.3, 0.4])
    n = 10**5
    counts = np.bincount(sample_selection(p, n, substream(3, 0)).indices, minlength=4)
    sd = np.sqrt(p.weights * (1 - p.weights) / n)
    assert np.all(np.abs(counts / n - p.weights) <= 3 * sd)


def test_sampling_deterministic_per_substream():
    p = uniform_distribution(7)
    a = sample_selection(p, 30, substream(11, 4))
    b = sample_selection(p, 30, substream(11, 4))
    c = sample_selection(p, 30, substream(11, 5))
    assert a.indices == b.indices and a.indices != c.indices


def test_greedy_single_and_dominant_sensor():
    model = SystemModel([[0.9, 0.2], [0.0, 1.1]], np.eye(2))
    one = SensorPool.from_arrays([[1.0, 1.0]], 0.5)
    assert greedy_with_replacement(model, one, 5).selection.indices == (0,) * 5
    # Z_2 = 0.5 Z_1: same direction, half the information
    pool = SensorPool.from_arrays([[1.0, 1.0], [1.0, 1.0]], [0.5, 1.0])
    assert greedy_with_replacement(model, pool, 6).selection.indices == (0,) * 6


def test_greedy_tie_break_lowest_index(basis_pool):
    model = SystemModel(0.5 * np.eye(2), np.eye(2))
    res = greedy_with_replacement(model, basis_pool, 4)
    # symmetric pool: first step ties, so index 0 wins; then alternation balances the axes
    assert res.selection.indices == (0, 1, 0, 1)


def test_greedy_fallback_on_undetectable_start():
    # unstable in both axes: no single sensor makes the pair detectable
    model = SystemModel(np.diag([1.5, 1.2]), np.eye(2))
    pool = SensorPool.from_arrays(np.eye(2), 1.0)
    res = greedy_with_replacement(model, pool, 3)
    assert res.fallback_steps == [0]
    assert sorted(res.selection.indices[:2]) == [0, 1]
    assert all(b <= a + 1e-12 for a, b in zip(res.trace, res.trace[1:]))


def test_greedy_matches_direct_scoring(small_instance):
    model, pool = small_instance
    res = greedy_with_replacement(model, pool, 5)
    Y = np.zeros((2, 2))
    for k, j in enumerate(res.selection.indices):
        scores = [steady_state(model, Y + Z).lambda_max for Z in pool.information]
        assert j == int(np.argmin(scores))
        assert res.trace[k] == pytest.approx(min(scores), rel=1e-9)
        Y = Y + pool.information[j]
    assert all(b <= a * (1 + 1e-10) for a, b in zip(res.trace, res.trace[1:]))


def test_monte_carlo_single_sensor_full_coverage():
    model = SystemModel([[0.9, 0.2], [0.0, 0.5]], np.eye(2))
    pool = SensorPool.from_arrays([[1.0, 0.5]], 0.5)
    p = SamplingDistribution([1.0])
    b = bound_pair(model, pool, p, 200, 0.1, 1.0)
    stats, records = monte_carlo(model, pool, p, 200, 10, seed=0, bounds=b)
    assert stats.coverage == 1.0 and stats.std_lambda_max == pytest.approx(0.0, abs=1e-15)
    assert all(r.within_bounds is Within.YES for r in records)
    lines = trial_records_csv(records).splitlines()
    assert lines[0] == "trial,lambda_max,within_bounds,detectable"
    assert lines[1].startswith("0,") and lines[1].endswith(",yes,true")


def test_monte_carlo_reproducible_and_law_of_large_numbers(small_instance):
    model, pool = small_instance
    p = uniform_distribution(pool.n_c)
    n_s, trials = 40, 400
    s1, r1 = monte_carlo(model, pool, p, n_s, trials, seed=9)
    s2, r2 = monte_carlo(model, pool, p, n_s, trials, seed=9)
    assert [r.selection.indices for r in r1] == [r.selection.indices for r in r2]
    assert s1.mean_lambda_max == s2.mean_lambda_max and s1.coverage is None
    target = n_s * expected_information(pool, p)
    assert np.linalg.norm(s1.mean_information - target) <= 5 / np.sqrt(trials) * np.linalg.norm(target)
    assert np.allclose(s1.mean_P, s1.mean_P.T) and s1.std_lambda_max >= 0


def test_monte_carlo_records_undetectable_trials():
    model = SystemModel(np.diag([1.5, 0.5]), np.eye(2))
    pool = SensorPool.from_arrays(np.eye(2), 1.0)
    stats, records = monte_carlo(model, pool, SamplingDistribution([0.05, 0.95]), 3, 200, seed=1)
    missing = [r for r in records if r.P_S is None]
    assert stats.undetectable_count == len(missing) > 0
    assert all(0 not in r.selection.indices for r in missing)
    assert all(r.lambda_max is None for r in missing)


def test_coverage_seeds_agree_within_binomial_band(small_instance):
    model, pool = small_instance
    p = uniform_distribution(pool.n_c)
    n_s = 400
    b = bound_pair(model, pool, p, n_s, 0.1, rho_min(pool, p))
    trials = 200
    covs = [monte_carlo(model, pool, p, n_s, trials, seed=s, bounds=b)[0].coverage for s in (1, 2)]
    pbar = np.mean(covs)
    assert abs(covs[0] - covs[1]) <= 3 * np.sqrt(2 * max(pbar * (1 - pbar), 1e-4) / trials) + 1e-12
