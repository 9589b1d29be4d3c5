import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from covsel.errors import ValidationError
from covsel.model import (
    CandidateSensor,
    SamplingDistribution,
    Selection,
    SensorPool,
    SystemModel,
    expected_information,
    generate_synthetic_pool,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    save_problem,
    selection_information,
    sensor_information_matrix,
)


def test_information_matrix_examples():
    np.testing.assert_allclose(sensor_information_matrix(CandidateSensor([1, 0], 0.5)), [[2, 0], [0, 0]], atol=1e-15)
    np.testing.assert_array_equal(sensor_information_matrix(CandidateSensor([0, 0], 1.0)), np.zeros((2, 2)))
    np.testing.assert_allclose(sensor_information_matrix(CandidateSensor([1, 1], 2.0)), [[0.5, 0.5], [0.5, 0.5]])


finite = st.floats(-10, 10, allow_nan=False)


@given(arrays(float, 4, elements=finite), st.floats(1e-3, 10))
def test_information_matrix_rank_and_trace(c, sigma2):
    Z = sensor_information_matrix(CandidateSensor(c, sigma2))
    assert np.array_equal(Z, Z.T)
    assert np.linalg.matrix_rank(Z) <= 1
    assert np.trace(Z) == pytest.approx(c @ c / sigma2, rel=1e-12, abs=1e-12)


def test_expected_information_examples(basis_pool):
    single = SensorPool.from_arrays([[1.0, 2.0]], 0.5)
    np.testing.assert_allclose(
        expected_information(single, SamplingDistribution([1.0])), single.information[0]
    )
    twins = SensorPool.from_arrays([[1.0, 2.0], [1.0, 2.0]], 0.5)
    np.testing.assert_allclose(
        expected_information(twins, SamplingDistribution([0.5, 0.5])), twins.information[0]
    )
    np.testing.assert_allclose(
        expected_information(basis_pool, SamplingDistribution([0.25, 0.75])), np.diag([0.25, 0.75])
    )


def test_expected_information_dimension_mismatch(basis_pool):
    with pytest.raises(ValidationError):
        expected_information(basis_pool, SamplingDistribution([1.0]))


def test_selection_information_examples(basis_pool):
    np.testing.assert_allclose(selection_information(basis_pool, Selection((0, 0))), 2 * basis_pool.information[0])
    np.testing.assert_allclose(selection_information(basis_pool, Selection((1,))), basis_pool.information[1])
    np.testing.assert_allclose(selection_information(basis_pool, Selection((0, 1, 1))), np.diag([1.0, 2.0]))
    with pytest.raises(ValidationError):
        selection_information(basis_pool, Selection((2,)))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_expectation_matches_enumeration(n_c, seed):
    rng = np.random.default_rng(seed)
    pool = SensorPool.from_arrays(rng.normal(size=(n_c, 3)), rng.uniform(0.1, 2, n_c))
    w = rng.dirichlet(np.ones(n_c))
    p = SamplingDistribution(w / w.sum())
    # single draws
    enum1 = sum(p.weights[j] * selection_information(pool, Selection((j,))) for j in range(n_c))
    np.testing.assert_allclose(expected_information(pool, p), enum1, atol=1e-12)
    # all ordered pairs of draws: E[Z_1 + Z_2] = 2 E[Z]
    enum2 = sum(
        p.weights[i] * p.weights[j] * selection_information(pool, Selection((i, j)))
        for i, j in itertools.product(range(n_c), repeat=2)
    )
    np.testing.assert_allclose(enum2, 2 * expected_information(pool, p), atol=1e-12)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=12), st.randoms(use_true_random=False))
def test_selection_information_permutation_invariant(indices, rnd):
    pool = SensorPool.from_arrays(np.arange(15.0).reshape(5, 3) / 7, 0.3)
    shuffled = list(indices)
    rnd.shuffle(shuffled)
    np.testing.assert_allclose(
        selection_information(pool, Selection(tuple(indices))),
        selection_information(pool, Selection(tuple(shuffled))),
        rtol=1e-13,
    )


def test_system_model_validation():
    with pytest.raises(ValidationError, match="positive definite"):
        SystemModel(np.eye(2), np.diag([1.0, 0.0]))
    with pytest.raises(ValidationError, match="symmetric"):
        SystemModel(np.eye(2), [[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValidationError, match="share order"):
        SystemModel(np.eye(2), np.eye(3))
    model = SystemModel([[1.0]], [[2.0]])
    assert model.m == 1
    with pytest.raises(ValueError):
        model.A[0, 0] = 3.0  # read-only


def test_other_type_invariants():
    with pytest.raises(ValidationError, match="sigma2"):
        CandidateSensor([1.0], 0.0)
    with pytest.raises(ValidationError, match="n_c >= 1"):
        SensorPool(())
    with pytest.raises(ValidationError, match="share"):
        SensorPool((CandidateSensor([1.0], 1.0), CandidateSensor([1.0, 2.0], 1.0)))
    with pytest.raises(ValidationError, match="sum to 1"):
        SamplingDistribution([0.5, 0.4])
    with pytest.raises(ValidationError, match=">= 0"):
        SamplingDistribution([1.5, -0.5])
    with pytest.raises(ValidationError, match="n_s >= 1"):
        Selection(())
    p = SamplingDistribution.from_raw([0.5, -1e-12, 0.5])
    assert p.weights[1] == 0.0 and p.weights.sum() == pytest.approx(1.0, abs=1e-15)


def test_synthetic_pool():
    model, pool = generate_synthetic_pool(3, 200, 0.5, 0.5, seed=11)
    assert (model.m, pool.n_c) == (3, 200)
    np.testing.assert_array_equal(model.Q, 0.5 * np.eye(3))
    assert np.all(pool.sigma2 == 0.5)
    assert 0 <= pool.C.min() and pool.C.max() <= 1 and 0 <= model.A.min() and model.A.max() <= 1
    model2, pool2 = generate_synthetic_pool(3, 200, 0.5, 0.5, seed=11)
    assert np.array_equal(model.A, model2.A) and np.array_equal(pool.C, pool2.C)
    scalar, one = generate_synthetic_pool(1, 1, 1.0, 1.0, seed=0)
    assert scalar.m == 1 and one.n_c == 1
    with pytest.raises(ValidationError):
        generate_synthetic_pool(0, 5)


def test_json_round_trip(tmp_path, small_instance):
    model, pool = small_instance
    path = tmp_path / "pool.json"
    save_problem(path, model, pool)
    model2, pool2 = load_problem(path)
    assert np.array_equal(model.A, model2.A) and np.array_equal(model.Q, model2.Q)
    assert np.array_equal(pool.C, pool2.C) and np.array_equal(pool.sigma2, pool2.sigma2)
    assert json.loads(path.read_text())["m"] == 2


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d.pop("Q"), "missing required key 'Q'"),
        (lambda d: d.update(m=0), "integer >= 1"),
        (lambda d: d.update(A=[[1.0]]), "'A' must be 2x2"),
        (lambda d: d.update(Q=[[1.0, 0.0], [0.0, -1.0]]), "positive definite"),
        (lambda d: d["sensors"][1].update(sigma2=-1.0), "sensor 1: .*sigma2"),
        (lambda d: d["sensors"][0].update(c=[1.0]), "sensor 0: 'c' must have length m=2"),
        (lambda d: d.update(sensors=[]), "n_c >= 1"),
    ],
)
def test_loader_names_violated_invariant(small_instance, mutate, message):
    doc = problem_to_dict(*small_instance)
    mutate(doc)
    with pytest.raises(ValidationError, match=message):
        problem_from_dict(doc)
