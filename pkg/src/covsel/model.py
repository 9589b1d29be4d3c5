"""Plant, candidate sensors, sampling distributions and information matrices.

Sensors emit scalar measurements. A sensor ``(c, sigma2)`` contributes the
rank-one information matrix ``Z = c c^T / sigma2``; a selection of sensors
contributes the sum of its members' matrices (with multiplicity).

Sensor and selection indices are zero-based throughout.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .linalg import sym


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemModel:
    """LTI plant ``x_{t+1} = A x_t + w_t`` with ``w_t ~ N(0, Q)``, Q positive definite."""

    A: np.ndarray
    Q: np.ndarray

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ValidationError(f"A must be a square matrix of order m >= 1, got shape {A.shape}")
        if Q.shape != A.shape:
            raise ValidationError(f"A and Q must share order m; got {A.shape} and {Q.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(Q))):
            raise ValidationError("A and Q must be finite")
        qn = np.linalg.norm(Q)
        if np.linalg.norm(Q - Q.T) > 1e-12 * max(qn, 1e-300):
            raise ValidationError("Q must be symmetric (relative Frobenius tolerance 1e-12)")
        Q = sym(Q)
        if np.linalg.eigvalsh(Q)[0] <= 0.0:
            raise ValidationError("Q must be positive definite (lambda_min(Q) > 0)")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "Q", _frozen(Q))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @cached_property
    def Q_inv(self) -> np.ndarray:
        return _frozen(sym(np.linalg.inv(self.Q)))


@dataclass(frozen=True, eq=False)
class CandidateSensor:
    c: np.ndarray
    sigma2: float

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if c.size < 1 or not np.all(np.isfinite(c)):
            raise ValidationError("sensor output weights c must be a finite non-empty vector")
        sigma2 = float(self.sigma2)
        if not (sigma2 > 0.0 and np.isfinite(sigma2)):
            raise ValidationError(f"sensor variance sigma2 must be positive, got {self.sigma2!r}")
        object.__setattr__(self, "c", _frozen(c))
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def m(self) -> int:
        return self.c.size


@dataclass(frozen=True, eq=False)
class SensorPool:
    sensors: tuple[CandidateSensor, ...]

    def __post_init__(self) -> None:
        sensors = tuple(self.sensors)
        if not sensors:
            raise ValidationError("sensor pool must contain at least one sensor (n_c >= 1)")
        m = sensors[0].m
        if any(s.m != m for s in sensors):
            raise ValidationError("all sensors in a pool must share the state dimension m")
        object.__setattr__(self, "sensors", sensors)

    @classmethod
    def from_arrays(cls, C: np.ndarray, sigma2: float | Sequence[float]) -> SensorPool:
        """Build a pool from an (n_c, m) matrix of output rows and variances."""
        C = np.atleast_2d(np.asarray(C, dtype=float))
        s2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (C.shape[0],))
        return cls(tuple(CandidateSensor(c, v) for c, v in zip(C, s2)))

    def __len__(self) -> int:
        return len(self.sensors)

    @property
    def n_c(self) -> int:
        return len(self.sensors)

    @property
    def m(self) -> int:
        return self.sensors[0].m

    @cached_property
    def C(self) -> np.ndarray:
        return _frozen(np.stack([s.c for s in self.sensors]))

    @cached_property
    def sigma2(self) -> np.ndarray:
        return _frozen([s.sigma2 for s in self.sensors])

    @cached_property
    def information(self) -> np.ndarray:
        """Stack of per-sensor information matrices, shape (n_c, m, m)."""
        return _frozen(np.stack([sensor_information_matrix(s) for s in self.sensors]))


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size < 1:
            raise ValidationError("sampling distribution must have at least one entry")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise ValidationError("sampling distribution entries must be finite and >= 0")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError(f"sampling distribution must sum to 1 (got {w.sum()!r})")
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def from_raw(cls, w: Iterable[float]) -> SamplingDistribution:
        """Project solver output onto the simplex: clip negatives, renormalize."""
        w = np.clip(np.asarray(list(w), dtype=float), 0.0, None)
        total = w.sum()
        if not total > 0.0:
            raise ValidationError("cannot normalize an all-zero weight vector")
        return cls(w / total)

    def __len__(self) -> int:
        return self.weights.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0.0)


@dataclass(frozen=True, eq=False)
class Selection:
    indices: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValidationError("a selection must contain at least one index (n_s >= 1)")
        if min(idx) < 0:
            raise ValidationError("selection indices must be non-negative")
        object.__setattr__(self, "indices", idx)

    @property
    def n_s(self) -> int:
        return len(self.indices)

    def counts(self, n_c: int) -> np.ndarray:
        return np.bincount(np.asarray(self.indices), minlength=n_c)


def sensor_information_matrix(sensor: CandidateSensor) -> np.ndarray:
    u = sensor.c / np.sqrt(sensor.sigma2)
    return sym(np.outer(u, u))


def _check_distribution(pool: SensorPool, p: SamplingDistribution) -> None:
    if len(p) != pool.n_c:
        raise ValidationError(f"distribution has {len(p)} entries but pool has n_c={pool.n_c}")


def expected_information(pool: SensorPool, p: SamplingDistribution) -> np.ndarray:
    """E[Z] = sum_j p_j Z_j."""
    _check_distribution(pool, p)
    return sym(np.tensordot(p.weights, pool.information, axes=1))


def selection_information(pool: SensorPool, sel: Selection) -> np.ndarray:
    """C_S^T R_S^{-1} C_S, i.e. the sum of the selected Z_j with multiplicity."""
    if max(sel.indices) >= pool.n_c:
        raise ValidationError(f"selection index {max(sel.indices)} out of range for n_c={pool.n_c}")
    counts = sel.counts(pool.n_c).astype(float)
    return sym(np.tensordot(counts, pool.information, axes=1))


def generate_synthetic_pool(
    m: int,
    n_c: int,
    sigma2: float = 0.5,
    q_scale: float = 0.5,
    seed: int | np.random.SeedSequence | None = 0,
) -> tuple[SystemModel, SensorPool]:
    """Random instance: A and every c_j have i.i.d. U[0, 1] entries, Q = q_scale * I."""
    if m < 1 or n_c < 1:
        raise ValidationError(f"need m >= 1 and n_c >= 1, got m={m}, n_c={n_c}")
    if not (sigma2 > 0 and q_scale > 0):
        raise ValidationError("sigma2 and q_scale must be positive")
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.0, 1.0, size=(m, m))
    C = rng.uniform(0.0, 1.0, size=(n_c, m))
    model = SystemModel(A, q_scale * np.eye(m))
    return model, SensorPool.from_arrays(C, sigma2)


# -- JSON interchange -------------------------------------------------------


def problem_to_dict(model: SystemModel, pool: SensorPool) -> dict[str, Any]:
    if model.m != pool.m:
        raise ValidationError(f"model has m={model.m} but pool sensors have m={pool.m}")
    return {
        "m": model.m,
        "A": model.A.tolist(),
        "Q": model.Q.tolist(),
        "sensors": [{"c": s.c.tolist(), "sigma2": s.sigma2} for s in pool.sensors],
    }


def problem_from_dict(doc: Any) -> tuple[SystemModel, SensorPool]:
    """Parse and validate a model/pool document; raise ValidationError naming the violation."""
    if not isinstance(doc, dict):
        raise ValidationError("problem document must be a JSON object")
    for key in ("m", "A", "Q", "sensors"):
        if key not in doc:
            raise ValidationError(f"problem document missing required key {key!r}")
    m = doc["m"]
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise ValidationError(f"'m' must be an integer >= 1, got {m!r}")
    try:
        A = np.array(doc["A"], dtype=float)
        Q = np.array(doc["Q"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"'A' and 'Q' must be numeric matrices: {exc}") from None
    if A.shape != (m, m):
        raise ValidationError(f"'A' must be {m}x{m}, got shape {A.shape}")
    if Q.shape != (m, m):
        raise ValidationError(f"'Q' must be {m}x{m}, got shape {Q.shape}")
    model = SystemModel(A, Q)
    sensors = doc["sensors"]
    if not isinstance(sensors, list) or not sensors:
        raise ValidationError("'sensors' must be a non-empty list (n_c >= 1)")
    out = []
    for j, s in enumerate(sensors):
        if not isinstance(s, dict) or "c" not in s or "sigma2" not in s:
            raise ValidationError(f"sensor {j} must be an object with keys 'c' and 'sigma2'")
        try:
            c = np.array(s["c"], dtype=float)
            sigma2 = float(s["sigma2"])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"sensor {j}: non-numeric entry: {exc}") from None
        if c.shape != (m,):
            raise ValidationError(f"sensor {j}: 'c' must have length m={m}, got shape {c.shape}")
        try:
            out.append(CandidateSensor(c, sigma2))
        except ValidationError as exc:
            raise ValidationError(f"sensor {j}: {exc}") from None
    return model, SensorPool(tuple(out))


def save_problem(path: str | os.PathLike[str], model: SystemModel, pool: SensorPool) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, json.dumps(problem_to_dict(model, pool), indent=1) + "\n")


def load_problem(path: str | os.PathLike[str]) -> tuple[SystemModel, SensorPool]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON: {exc}") from None
    return problem_from_dict(doc)
