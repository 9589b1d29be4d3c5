"""Selection policies and the Monte Carlo engine.

Policies: the uniform distribution, i.i.d. sampling from any distribution,
and a deterministic greedy baseline that appends, one at a time, the
candidate whose addition gives the smallest lambda_max of the steady-state
covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from .bounds import BoundSet
from .errors import NoFeasibleCandidate, ValidationError
from .io import csv_text, substream
from .linalg import psd_sqrt, sym
from .model import SamplingDistribution, Selection, SensorPool, SystemModel, selection_information
from .riccati import (
    DEFAULT_OPTIONS,
    RecursionOptions,
    SteadyStateResult,
    information_detectable,
    information_step,
    is_detectable,
    steady_state_many,
)

FALLBACK_STEPS = 50


def uniform_distribution(n_c: int) -> SamplingDistribution:
    if n_c < 1:
        raise ValidationError(f"n_c must be >= 1, got {n_c}")
    return SamplingDistribution(np.full(n_c, 1.0 / n_c))


def sample_selection(p: SamplingDistribution, n_s: int, rng: np.random.Generator) -> Selection:
    """n_s i.i.d. categorical draws from p by inverse CDF."""
    if n_s < 1:
        raise ValidationError(f"n_s must be >= 1, got {n_s}")
    cdf = np.cumsum(p.weights)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n_s), side="right")
    return Selection(tuple(np.minimum(idx, len(cdf) - 1).tolist()))


# -- greedy -------------------------------------------------------------------


@dataclass(frozen=True)
class GreedyResult:
    selection: Selection
    trace: list[float]  # lambda_max after each appended sensor
    fallback_steps: list[int]  # steps at which finite-horizon scoring was used


def _fallback_scores(model: SystemModel, Ys: np.ndarray) -> np.ndarray:
    P = np.broadcast_to(model.Q, Ys.shape).copy()
    for _ in range(FALLBACK_STEPS):
        P = information_step(model, P, Ys)
    return np.linalg.eigvalsh(P)[:, -1]


def greedy_with_replacement(
    model: SystemModel,
    pool: SensorPool,
    n_s: int,
    opts: RecursionOptions = DEFAULT_OPTIONS,
) -> GreedyResult:
    """Greedy selection with replacement.

    At each step every candidate is scored by lambda_max of the steady state
    for the accumulated information plus its own; the lowest score wins and
    ties go to the lowest index. When the augmented pair is undetectable the
    score is lambda_max after 50 recursion steps started from Q instead.
    """
    if n_s < 1:
        raise ValidationError(f"n_s must be >= 1, got {n_s}")
    info = pool.information
    Y_acc = np.zeros((model.m, model.m))
    chosen: list[int] = []
    trace: list[float] = []
    fallback_steps: list[int] = []
    for step in range(n_s):
        Ys = Y_acc + info
        if information_detectable(model.A, Y_acc):
            detectable = np.ones(pool.n_c, dtype=bool)
        else:
            detectable = np.array([is_detectable(model.A, psd_sqrt(Y)) for Y in Ys])
        scores = np.full(pool.n_c, math.inf)
        if detectable.any():
            idx = np.flatnonzero(detectable)
            batch = steady_state_many(model, Ys[idx], opts)
            lm = np.linalg.eigvalsh(batch.P)[:, -1]
            scores[idx[batch.ok]] = lm[batch.ok]
        missing = ~np.isfinite(scores)
        if missing.any():
            fb = _fallback_scores(model, Ys[missing])
            scores[missing] = np.where(np.isfinite(fb), fb, math.inf)
        if not np.isfinite(scores).any():
            raise NoFeasibleCandidate(f"no candidate could be scored at step {step + 1}")
        j = int(np.argmin(scores))  # argmin returns the first minimizer
        if missing[j]:
            fallback_steps.append(step)
        chosen.append(j)
        trace.append(float(scores[j]))
        Y_acc = sym(Y_acc + info[j])
    return GreedyResult(Selection(tuple(chosen)), trace, fallback_steps)


# -- Monte Carlo --------------------------------------------------------------


class Within(str, Enum):
    YES = "yes"
    NO = "no"
    UNDETECTABLE = "undetectable"


@dataclass(frozen=True, eq=False)
class TrialRecord:
    selection: Selection
    P_S: SteadyStateResult | None
    detectable: bool
    within_bounds: Within | None = None

    @property
    def lambda_max(self) -> float | None:
        return None if self.P_S is None else self.P_S.lambda_max


@dataclass(frozen=True, eq=False)
class TrialStats:
    trials: int
    coverage: float | None
    mean_lambda_max: float
    std_lambda_max: float
    mean_P: np.ndarray
    undetectable_count: int
    mean_information: np.ndarray

    def to_dict(self) -> dict[str, Any]:
        return {
            "trials": self.trials,
            "coverage": self.coverage,
            "mean_lambda_max": self.mean_lambda_max,
            "std_lambda_max": self.std_lambda_max,
            "mean_P": self.mean_P.tolist(),
            "undetectable_count": self.undetectable_count,
        }


def monte_carlo(
    model: SystemModel,
    pool: SensorPool,
    p: SamplingDistribution,
    n_s: int,
    trials: int,
    seed: int,
    bounds: BoundSet | None = None,
    opts: RecursionOptions = DEFAULT_OPTIONS,
) -> tuple[TrialStats, list[TrialRecord]]:
    """Sample ``trials`` selections from p and solve each steady state.

    Trial t draws from its own substream of ``seed``, so the records do not
    depend on how the work is scheduled. Undetectable selections (or ones
    whose recursion fails to settle) are counted separately and left out of
    every statistic, coverage included.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    sels = [sample_selection(p, n_s, substream(seed, t)) for t in range(trials)]
    Ys = np.stack([selection_information(pool, s) for s in sels])
    detectable = np.array([information_detectable(model.A, Y) for Y in Ys])
    results: list[SteadyStateResult | None] = [None] * trials
    idx = np.flatnonzero(detectable)
    if idx.size:
        batch = steady_state_many(model, Ys[idx], opts)
        for k, t in enumerate(idx):
            results[t] = batch.result(k)

    records = []
    for t in range(trials):
        res = results[t]
        within = None
        if bounds is not None:
            if res is None:
                within = Within.UNDETECTABLE
            else:
                within = Within.YES if bounds.contains(res.P) else Within.NO
        records.append(TrialRecord(sels[t], res, bool(detectable[t] and res is not None), within))

    solved = [r.P_S for r in records if r.P_S is not None]
    m = model.m
    if solved:
        lm = np.array([s.lambda_max for s in solved])
        mean_P = sym(np.mean([s.P for s in solved], axis=0))
        mean_lm, std_lm = float(lm.mean()), float(lm.std())
    else:
        mean_P, mean_lm, std_lm = np.full((m, m), math.nan), math.nan, math.nan
    coverage = None
    if bounds is not None:
        judged = [r.within_bounds for r in records if r.within_bounds is not Within.UNDETECTABLE]
        coverage = sum(w is Within.YES for w in judged) / len(judged) if judged else math.nan
    stats = TrialStats(
        trials=trials,
        coverage=coverage,
        mean_lambda_max=mean_lm,
        std_lambda_max=std_lm,
        mean_P=mean_P,
        undetectable_count=trials - len(solved),
        mean_information=Ys.mean(axis=0),
    )
    return stats, records


def trial_records_csv(records: list[TrialRecord]) -> str:
    """Per-trial CSV: trial,lambda_max,within_bounds,detectable (blank when not applicable)."""
    rows = [
        [t, r.lambda_max, "" if r.within_bounds is None else r.within_bounds.value, r.detectable]
        for t, r in enumerate(records)
    ]
    return csv_text(["trial", "lambda_max", "within_bounds", "detectable"], rows)
