"""Information-form covariance recursion and its steady state.

The filtered error covariance evolves as

    P_t^{-1} = (A P_{t-1} A^T + Q)^{-1} + Y

where Y is the accumulated measurement information (C^T R^{-1} C for a fixed
sensor set). The steady state is reached by plain fixed-point iteration of
this map; convergence is linear whenever (A, Y^{1/2}) is detectable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Diverging, NoSolution, NonConvergent, PreconditionViolated, ValidationError
from .linalg import psd_leq, psd_sqrt, sym
from .model import SystemModel

DIVERGENCE_NORM = 1e12


@dataclass(frozen=True)
class RecursionOptions:
    tol: float = 1e-11
    max_iters: int = 200_000
    P_init: np.ndarray | None = None  # None means the zero matrix

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if self.P_init is not None:
            P0 = np.asarray(self.P_init, dtype=float)
            if P0.ndim != 2 or P0.shape[0] != P0.shape[1]:
                raise ValidationError("P_init must be a square matrix")
            if np.linalg.eigvalsh(sym(P0))[0] < -1e-12 * (1 + np.linalg.norm(P0)):
                raise ValidationError("P_init must be positive semidefinite")

    def initial(self, m: int) -> np.ndarray:
        if self.P_init is None:
            return np.zeros((m, m))
        P0 = sym(np.asarray(self.P_init, dtype=float))
        if P0.shape != (m, m):
            raise ValidationError(f"P_init has shape {P0.shape}, expected {(m, m)}")
        return P0


DEFAULT_OPTIONS = RecursionOptions()


@dataclass(frozen=True)
class SteadyStateResult:
    P: np.ndarray
    iterations: int
    residual: float

    @property
    def lambda_max(self) -> float:
        return float(np.linalg.eigvalsh(self.P)[-1])


def _check_Y(model: SystemModel, Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.shape[-2:] != (model.m, model.m):
        raise ValidationError(f"information matrix has shape {Y.shape}, expected (..., {model.m}, {model.m})")
    Y = sym(Y)
    lo = np.linalg.eigvalsh(Y)[..., 0]
    if np.any(lo < -1e-10 * (1.0 + np.linalg.norm(Y, axis=(-2, -1)))):
        raise ValidationError("information matrix must be positive semidefinite")
    return Y


def information_step(model: SystemModel, P_prev: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """One step of the recursion; works on single matrices or stacks of shape (k, m, m)."""
    A, Q = model.A, model.Q
    P_pred = A @ P_prev @ A.T + Q
    try:
        info = np.linalg.inv(sym(P_pred)) + Y
        return sym(np.linalg.inv(sym(info)))
    except np.linalg.LinAlgError as exc:
        raise NonConvergent(f"information step is numerically singular: {exc}") from None


_ROUNDING_FLOOR = 1e-15


def _converged(res, prev, scale, tol):
    """Vectorizable stopping rule shared by the single and batched solvers.

    ``res`` is the relative step and ``scale`` = max(1, ||P||_F), so
    res * scale / (1 - rate) estimates the absolute distance to the fixed point.
    """
    rate = np.clip(np.divide(res, prev, out=np.ones_like(res, dtype=float), where=prev > 0), 0.0, 0.999)
    rate = np.where(np.isfinite(prev), rate, 0.999)
    return (res <= tol) & ((res * scale <= tol * (1.0 - rate)) | (res <= _ROUNDING_FLOOR))


def steady_state(
    model: SystemModel, Y: np.ndarray, opts: RecursionOptions = DEFAULT_OPTIONS
) -> SteadyStateResult:
    """Iterate the recursion from ``opts.P_init`` to its fixed point.

    The step size r_t = ||P_t - P_{t-1}||_F / max(1, ||P_t||_F) must reach
    ``tol``; because convergence is linear, the loop goes on until the
    estimated absolute remaining error r_t max(1, ||P_t||_F) / (1 - r_t / r_{t-1})
    is below ``tol`` as well (or r_t hits the rounding floor). Raises
    :class:`Diverging` once the iterate norm exceeds 1e12 (the signature of an
    undetectable pair) and :class:`NonConvergent` at the iteration cap.
    """
    Y = _check_Y(model, Y)
    P = opts.initial(model.m)
    res = math.inf
    for it in range(1, opts.max_iters + 1):
        P_new = information_step(model, P, Y)
        nrm = np.linalg.norm(P_new)
        if not np.isfinite(nrm) or nrm > DIVERGENCE_NORM:
            raise Diverging(f"iterate norm {nrm:.3g} exceeded {DIVERGENCE_NORM:g} at step {it}")
        prev, res = res, float(np.linalg.norm(P_new - P) / max(1.0, nrm))
        P = P_new
        if _converged(res, prev, max(1.0, nrm), opts.tol):
            return SteadyStateResult(P, it, res)
    raise NonConvergent(f"no convergence after {opts.max_iters} iterations (last step {res:.3g})")


# status codes for steady_state_many
CONVERGED, DIVERGED, CAPPED = 0, 1, 2


@dataclass(frozen=True)
class BatchSteadyState:
    P: np.ndarray  # (k, m, m); undefined where status != CONVERGED
    iterations: np.ndarray
    residual: np.ndarray
    status: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.status == CONVERGED

    def result(self, i: int) -> SteadyStateResult | None:
        if self.status[i] != CONVERGED:
            return None
        return SteadyStateResult(self.P[i], int(self.iterations[i]), float(self.residual[i]))


def steady_state_many(
    model: SystemModel, Ys: np.ndarray, opts: RecursionOptions = DEFAULT_OPTIONS
) -> BatchSteadyState:
    """Vectorized :func:`steady_state` over a stack of information matrices.

    Each item follows exactly the single-matrix iteration and stopping rule;
    failures are reported through ``status`` instead of raised.
    """
    Ys = _check_Y(model, Ys)
    k, m = Ys.shape[0], model.m
    P = np.broadcast_to(opts.initial(m), (k, m, m)).copy()
    iters = np.zeros(k, dtype=int)
    resid = np.full(k, np.inf)
    status = np.full(k, CAPPED, dtype=int)
    active = np.arange(k)
    for it in range(1, opts.max_iters + 1):
        if active.size == 0:
            break
        P_new = information_step(model, P[active], Ys[active])
        nrm = np.linalg.norm(P_new, axis=(1, 2))
        diff = np.linalg.norm(P_new - P[active], axis=(1, 2)) / np.maximum(1.0, nrm)
        prev = resid[active]
        P[active] = P_new
        iters[active] = it
        resid[active] = diff
        bad = ~np.isfinite(nrm) | (nrm > DIVERGENCE_NORM)
        done = ~bad & _converged(diff, prev, np.maximum(1.0, nrm), opts.tol)
        status[active[bad]] = DIVERGED
        status[active[done]] = CONVERGED
        active = active[~(bad | done)]
    return BatchSteadyState(P, iters, resid, status)


def steady_state_scalar_oracle(a: float, q: float, y: float) -> float:
    """Closed-form positive root of the scalar fixed-point equation.

    Clearing denominators in p = 1 / (1/(a^2 p + q) + y) gives
    y a^2 p^2 + (1 + y q - a^2) p - q = 0.
    """
    if not q > 0 or y < 0:
        raise ValidationError("need q > 0 and y >= 0")
    if abs(a) >= 1 and y == 0:
        raise NoSolution(f"|a| = {abs(a)} >= 1 with no measurement information")
    a2 = a * a
    b = 1.0 + y * q - a2
    c2 = y * a2
    if c2 == 0.0:
        return q / b
    disc = math.sqrt(b * b + 4.0 * c2 * q)
    if b >= 0:
        return 2.0 * q / (b + disc)
    return (disc - b) / (2.0 * c2)


def _pbh_full_rank(A: np.ndarray, C: np.ndarray, stable_ok: bool = True) -> bool:
    m = A.shape[0]
    eps = np.finfo(float).eps
    for lam in np.linalg.eigvals(A):
        if stable_ok and abs(lam) < 1.0:
            continue
        M = np.vstack([A - lam * np.eye(m), C])
        s = np.linalg.svd(M, compute_uv=False)
        if s.size < m or s[-1] <= m * eps * s[0]:
            return False
    return True


def is_detectable(A: np.ndarray, C: np.ndarray) -> bool:
    """PBH test: [A - lam I; C] has full column rank for every |lam| >= 1.

    ``C`` may be a single row vector or an empty (0, m) matrix.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m = A.shape[0]
    C = np.asarray(C, dtype=float).reshape(-1, m)
    return _pbh_full_rank(A, C)


def is_observable(A: np.ndarray, C: np.ndarray) -> bool:
    """PBH observability: the detectability test applied to every eigenvalue."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m = A.shape[0]
    return _pbh_full_rank(A, np.asarray(C, dtype=float).reshape(-1, m), stable_ok=False)


def is_stabilizable(A: np.ndarray, B: np.ndarray) -> bool:
    """Dual PBH test: [A - lam I, B] has full row rank for every |lam| >= 1."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(m, -1)
    return _pbh_full_rank(A.T, B.T)


def information_detectable(A: np.ndarray, Y: np.ndarray) -> bool:
    """Detectability of (A, Y^{1/2}) using the symmetric square root."""
    return is_detectable(A, psd_sqrt(Y))


@dataclass(frozen=True)
class MonotoneTrace:
    """Lockstep iterates; index 0 holds the initial covariances."""

    P1: np.ndarray
    P2: np.ndarray
    P3: np.ndarray

    @property
    def steps(self) -> int:
        return self.P1.shape[0] - 1

    def ordered(self) -> bool:
        return all(
            psd_leq(self.P1[t], self.P2[t]) and psd_leq(self.P2[t], self.P3[t])
            for t in range(self.P1.shape[0])
        )


def monotone_recursion_triple(
    model: SystemModel,
    Y1: np.ndarray,
    Y2: np.ndarray,
    Y3: np.ndarray,
    P1_init: np.ndarray,
    P2_init: np.ndarray,
    P3_init: np.ndarray,
    steps: int,
) -> MonotoneTrace:
    """Run three recursions side by side.

    With 0 <= Y1 <= Y2 <= Y3 the covariance driven by the *largest*
    information is the smallest, so the sequences are returned ordered as
    P1 (driven by Y3) <= P2 (by Y2) <= P3 (by Y1); the initial covariances
    must satisfy 0 <= P1_init <= P2_init <= P3_init.
    """
    m = model.m
    Y1, Y2, Y3 = (_check_Y(model, Y) for Y in (Y1, Y2, Y3))
    inits = [sym(np.asarray(P, dtype=float)) for P in (P1_init, P2_init, P3_init)]
    zero = np.zeros((m, m))
    for name, lo, hi in (
        ("0 <= Y1", zero, Y1),
        ("Y1 <= Y2", Y1, Y2),
        ("Y2 <= Y3", Y2, Y3),
        ("0 <= P1_init", zero, inits[0]),
        ("P1_init <= P2_init", inits[0], inits[1]),
        ("P2_init <= P3_init", inits[1], inits[2]),
    ):
        if not psd_leq(lo, hi):
            raise PreconditionViolated(f"ordering {name} does not hold")
    if steps < 0:
        raise ValidationError("steps must be >= 0")
    Ys = np.stack([Y3, Y2, Y1])
    P = np.stack(inits)
    out = np.empty((steps + 1, 3, m, m))
    out[0] = P
    for t in range(1, steps + 1):
        P = information_step(model, P, Ys)
        out[t] = P
    return MonotoneTrace(out[:, 0], out[:, 1], out[:, 2])
