"""Sampling distribution minimizing lambda_max(P_U), via an SDP per rho.

For fixed rho (hence fixed eps) the decision variables are (lam, X, p) with
X standing for P_U^{-1}. Writing Y(p) = (1 - eps) n_s sum_j p_j Z_j and

    f_p(X) = Q^{-1} + Y(p) - Q^{-1} A (X + A^T Q^{-1} A)^{-1} A^T Q^{-1}

(the recursion for P^{-1}, rewritten with the matrix inversion lemma), the
program maximizes lam subject to

    X - eta I >= 0
    [[X + A^T Q^{-1} A, A^T Q^{-1}], [Q^{-1} A, Q^{-1} + Y(p) - lam I]] >= 0   (lam I <= f_p(X))
    [[X + A^T Q^{-1} A, A^T Q^{-1}], [Q^{-1} A, Q^{-1} + Y(p) - X]]     >= 0   (X <= f_p(X))
    rho sum_j p_j Z_j - Z_i >= 0   for every candidate i
    p >= 0, sum(p) = 1, lam >= lam_floor

The third block ties X to the Riccati fixed point: f_p is Loewner monotone,
so X <= f_p(X) forces X <= P_U(p)^{-1}, and the optimum is therefore
lam* = max_p lambda_min(P_U(p)^{-1}). Without it X is unbounded above and
lam* only bounds lambda_min(Q^{-1} + Y(p)). ``couple_fixed_point=False``
drops the block for comparison.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Protocol

import numpy as np

from .bounds import BoundSet, bounds_for_epsilon
from .concentration import epsilon, feasible_rho_interval, rho_min
from .errors import (
    AllInfeasible,
    EpsilonInfeasible,
    InfeasibilityError,
    NumericalError,
    NumericalTrouble,
    RhoInfeasible,
    ValidationError,
)
from .linalg import lambda_max, sym
from .model import SamplingDistribution, SensorPool, SystemModel, expected_information
from .riccati import DEFAULT_OPTIONS, RecursionOptions

DEFAULT_ETA = 1e-6
LAMBDA_FLOOR = 1e-12
EPS_CEILING = 1.0 - 1e-9
SOLVER_TOL = 1e-10  # at 1e-8 Clarabel leaves block slacks near -1e-6


class SdpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_TROUBLE = "numerical_trouble"


@dataclass(frozen=True, eq=False)
class SdpInstance:
    """Problem data for one rho; ``blocks`` maps a candidate point to every PSD block."""

    A: np.ndarray
    Q_inv: np.ndarray
    info: np.ndarray
    n_s: int
    delta: float
    rho: float
    eps: float
    eta: float = DEFAULT_ETA
    lambda_floor: float = LAMBDA_FLOOR
    couple_fixed_point: bool = True

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n_c(self) -> int:
        return self.info.shape[0]

    @property
    def block_names(self) -> list[str]:
        names = ["X_eta", "schur"]
        if self.couple_fixed_point:
            names.append("fixed_point")
        names += [f"dominance[{i}]" for i in range(self.n_c)]
        return names + ["lambda_floor"]

    def blocks(self, lam, X, EZ, bmat: Callable = np.block, eye: Callable = np.eye) -> dict[str, Any]:
        """Affine PSD blocks at (lam, X, E[Z]).

        Written with operators only, so it evaluates both numpy arrays and
        modeling-language expressions (pass the matching ``bmat``).
        """
        m = self.m
        I = eye(m)
        AtQi = self.A.T @ self.Q_inv
        top_left = X + AtQi @ self.A
        info_term = self.Q_inv + (1.0 - self.eps) * self.n_s * EZ
        out = {
            "X_eta": X - self.eta * I,
            "schur": bmat([[top_left, AtQi], [AtQi.T, info_term - lam * I]]),
        }
        if self.couple_fixed_point:
            out["fixed_point"] = bmat([[top_left, AtQi], [AtQi.T, info_term - X]])
        for i in range(self.n_c):
            out[f"dominance[{i}]"] = self.rho * EZ - self.info[i]
        out["lambda_floor"] = lam - self.lambda_floor
        return out

    def expected(self, p: np.ndarray) -> np.ndarray:
        return sym(np.tensordot(np.asarray(p, dtype=float), self.info, axes=1))

    def slacks(self, lam: float, X: np.ndarray, p: np.ndarray) -> dict[str, float]:
        """Minimum eigenvalue of every block at a numeric point (>= 0 means satisfied)."""
        out = {}
        for name, M in self.blocks(lam, X, self.expected(p)).items():
            M = np.atleast_2d(M)
            out[name] = float(np.linalg.eigvalsh(sym(M))[0])
        return out


def build_sdp(
    model: SystemModel,
    pool: SensorPool,
    n_s: int,
    delta: float,
    rho: float,
    eta: float = DEFAULT_ETA,
    couple_fixed_point: bool = True,
) -> SdpInstance:
    if not eta > 0:
        raise ValidationError(f"eta must be positive, got {eta}")
    if model.m != pool.m:
        raise ValidationError(f"model has m={model.m} but pool sensors have m={pool.m}")
    eps = epsilon(rho, n_s, model.m, delta)
    if eps > EPS_CEILING:
        raise EpsilonInfeasible(f"eps = {eps!r} too close to 1")
    return SdpInstance(
        A=model.A,
        Q_inv=model.Q_inv,
        info=pool.information,
        n_s=n_s,
        delta=delta,
        rho=float(rho),
        eps=eps,
        eta=eta,
        couple_fixed_point=couple_fixed_point,
    )


@dataclass(frozen=True, eq=False)
class SdpSolution:
    status: SdpStatus
    lambda_star: float = math.nan
    X_star: np.ndarray | None = None
    p_star: SamplingDistribution | None = None
    p_raw: np.ndarray | None = None
    residuals: dict[str, float] = field(default_factory=dict)
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is SdpStatus.OPTIMAL

    @property
    def min_residual(self) -> float:
        return min(self.residuals.values()) if self.residuals else math.nan

    def to_dict(self) -> dict[str, Any]:
        return {
            "status": self.status.value,
            "lambda_star": self.lambda_star,
            "X_star": None if self.X_star is None else self.X_star.tolist(),
            "p_star": None if self.p_star is None else self.p_star.weights.tolist(),
            "min_residual": self.min_residual,
            "message": self.message,
        }


class SdpSolver(Protocol):
    def solve(self, instance: SdpInstance) -> SdpSolution: ...


class CvxpySdpSolver:
    """Solver port backed by cvxpy with an interior-point conic solver (Clarabel by default)."""

    def __init__(self, solver: str = "CLARABEL", tol: float = SOLVER_TOL, **options: Any):
        self.solver = solver
        self.tol = tol
        self.options = options

    def _solver_options(self) -> dict[str, Any]:
        if self.solver == "CLARABEL":
            opts = {"tol_gap_abs": self.tol, "tol_gap_rel": self.tol, "tol_feas": self.tol}
        elif self.solver == "SCS":
            opts = {"eps": self.tol}
        else:
            opts = {}
        opts.update(self.options)
        return opts

    def solve(self, instance: SdpInstance) -> SdpSolution:
        import cvxpy as cp

        m, n_c = instance.m, instance.n_c
        lam = cp.Variable()
        X = cp.Variable((m, m), symmetric=True)
        p = cp.Variable(n_c)
        # E[Z] as its own variable keeps every dominance block sparse (6 unknowns, not n_c)
        EZ = cp.Variable((m, m), symmetric=True)
        flat = instance.info.reshape(n_c, m * m)
        blocks = instance.blocks(lam, X, EZ, bmat=cp.bmat, eye=np.eye)
        cons = [
            p >= 0,
            cp.sum(p) == 1,
            cp.vec(EZ, order="C") == flat.T @ p,
            blocks.pop("lambda_floor") >= 0,
        ]
        for M in blocks.values():
            cons.append(0.5 * (M + M.T) >> 0)
        prob = cp.Problem(cp.Maximize(lam), cons)
        try:
            prob.solve(solver=self.solver, **self._solver_options())
        except cp.error.SolverError as exc:
            return SdpSolution(SdpStatus.NUMERICAL_TROUBLE, message=f"solver error: {exc}")
        status = prob.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return SdpSolution(SdpStatus.INFEASIBLE, message=status)
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or p.value is None:
            return SdpSolution(SdpStatus.NUMERICAL_TROUBLE, message=str(status))
        p_raw = np.asarray(p.value, dtype=float)
        try:
            p_star = SamplingDistribution.from_raw(p_raw)
        except ValidationError as exc:
            return SdpSolution(SdpStatus.NUMERICAL_TROUBLE, message=str(exc))
        X_star = sym(np.asarray(X.value, dtype=float))
        lam_star = float(lam.value)
        residuals = instance.slacks(lam_star, X_star, p_star.weights)
        ok = status == cp.OPTIMAL or min(residuals.values()) >= -1e-6
        return SdpSolution(
            SdpStatus.OPTIMAL if ok else SdpStatus.NUMERICAL_TROUBLE,
            lambda_star=lam_star,
            X_star=X_star,
            p_star=p_star,
            p_raw=p_raw,
            residuals=residuals,
            message=str(status),
        )


DEFAULT_SOLVER: SdpSolver = CvxpySdpSolver()


def solve_sdp(instance: SdpInstance, solver: SdpSolver | None = None) -> SdpSolution:
    return (solver or DEFAULT_SOLVER).solve(instance)


@dataclass(frozen=True, eq=False)
class RhoEvaluation:
    rho: float
    solution: SdpSolution
    bounds: BoundSet
    lambda_max_PU: float

    @property
    def gap(self) -> float:
        """|1 / lam* - lambda_max(P_U(p*))|."""
        return abs(1.0 / self.solution.lambda_star - self.lambda_max_PU)


def optimize_for_rho(
    model: SystemModel,
    pool: SensorPool,
    n_s: int,
    delta: float,
    rho: float,
    eta: float = DEFAULT_ETA,
    solver: SdpSolver | None = None,
    opts: RecursionOptions = DEFAULT_OPTIONS,
) -> RhoEvaluation:
    """Solve the SDP at ``rho`` and evaluate P_U at the returned distribution.

    Raises RhoInfeasible if the SDP is infeasible and NumericalTrouble if the
    solver fails.
    """
    inst = build_sdp(model, pool, n_s, delta, rho, eta)
    sol = solve_sdp(inst, solver)
    if sol.status is SdpStatus.INFEASIBLE:
        raise RhoInfeasible(f"no sampling distribution satisfies the dominance constraints at rho={rho}")
    if not sol.optimal:
        raise NumericalTrouble(f"SDP solve failed at rho={rho}: {sol.message}")
    bounds = bounds_for_epsilon(model, expected_information(pool, sol.p_star), n_s, inst.eps, opts)
    return RhoEvaluation(float(rho), sol, bounds, bounds.lambda_max_PU)


def min_achievable_rho(pool: SensorPool, solver: str = "CLARABEL", tol: float = 1e-8) -> float:
    """min over distributions p of rho_min(pool, p).

    With q = rho p the dominance constraints Z_i <= sum_j q_j Z_j are linear
    in q, so the minimum is the SDP  min sum(q)  s.t. those constraints, q >= 0.
    """
    import cvxpy as cp

    n_c, m = pool.n_c, pool.m
    q = cp.Variable(n_c, nonneg=True)
    S = cp.reshape(pool.information.reshape(n_c, m * m).T @ q, (m, m), order="C")
    S = 0.5 * (S + S.T)
    cons = [S - pool.information[i] >> 0 for i in range(n_c)]
    prob = cp.Problem(cp.Minimize(cp.sum(q)), cons)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # inaccurate status is checked below
        prob.solve(solver=solver, **CvxpySdpSolver(solver, tol)._solver_options())
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise RhoInfeasible(f"no distribution gives a finite rho ({prob.status})")
    return max(1.0, float(prob.value))


@dataclass(frozen=True)
class TracePoint:
    rho: float
    lambda_max_PU: float  # nan when status != "optimal"
    status: str


@dataclass(frozen=True, eq=False)
class RhoSearchResult:
    rho_star: float
    p_star: SamplingDistribution
    lambda_max_PU: float
    trace: list[TracePoint]
    best: RhoEvaluation
    interval: tuple[float, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "rho_star": self.rho_star,
            "p_star": self.p_star.weights.tolist(),
            "lambda_max_PU": self.lambda_max_PU,
            "lambda_star": self.best.solution.lambda_star,
            "epsilon": self.best.bounds.eps,
            "interval": list(self.interval),
            "trace": [[t.rho, t.lambda_max_PU, t.status] for t in self.trace],
        }


def _evaluate(model, pool, n_s, delta, rho, eta, solver, opts) -> tuple[TracePoint, RhoEvaluation | None]:
    try:
        ev = optimize_for_rho(model, pool, n_s, delta, rho, eta, solver, opts)
    except InfeasibilityError:
        return TracePoint(rho, math.nan, "infeasible"), None
    except NumericalError:
        return TracePoint(rho, math.nan, "numerical_trouble"), None
    return TracePoint(rho, ev.lambda_max_PU, "optimal"), ev


INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def search_rho(
    model: SystemModel,
    pool: SensorPool,
    n_s: int,
    delta: float,
    eta: float = DEFAULT_ETA,
    gamma: float = 1e-2,
    grid_points: int = 16,
    solver: SdpSolver | None = None,
    opts: RecursionOptions = DEFAULT_OPTIONS,
) -> RhoSearchResult:
    """Coarse grid over the feasible rho range, then golden-section refinement.

    The grid covers [max(1, rho_lo), rho_max) where rho_lo is the smallest rho
    any distribution can satisfy and rho_max is the eps < 1 boundary. The
    golden-section phase brackets the grid minimizer by its neighbours and
    shrinks until the bracket is at most ``gamma`` wide.
    """
    if not gamma > 0:
        raise ValidationError("gamma must be positive")
    if grid_points < 1:
        raise ValidationError("grid_points must be >= 1")
    interval = feasible_rho_interval(n_s, model.m, delta)
    if interval.empty:
        raise AllInfeasible(f"eps >= 1 for every rho >= 1 at n_s={n_s} (rho_max={interval.hi:.6g})")
    try:
        lo = max(1.0, min_achievable_rho(pool))
    except RhoInfeasible as exc:
        raise AllInfeasible(str(exc)) from None
    hi = interval.hi
    if lo >= hi:
        raise AllInfeasible(f"smallest achievable rho {lo:.6g} is not below rho_max {hi:.6g}")
    lo = min(lo * (1.0 + 1e-6), lo + 0.5 * (hi - lo))  # stay off the exact boundary
    grid = [lo + (hi - lo) * k / grid_points for k in range(grid_points)]

    trace: list[TracePoint] = []
    evals: dict[float, RhoEvaluation] = {}

    def f(rho: float) -> float:
        point, ev = _evaluate(model, pool, n_s, delta, rho, eta, solver, opts)
        trace.append(point)
        if ev is None:
            return math.inf
        evals[rho] = ev
        return ev.lambda_max_PU

    values = [f(r) for r in grid]
    if not evals:
        raise AllInfeasible(f"no grid point in [{lo:.6g}, {hi:.6g}) gave a feasible SDP")
    k = int(np.argmin(values))
    a = grid[k - 1] if k > 0 else grid[0]
    b = grid[k + 1] if k + 1 < len(grid) else hi
    c, d = b - INV_PHI * (b - a), a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > gamma:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)

    rho_star = min(evals, key=lambda r: (evals[r].lambda_max_PU, r))
    best = evals[rho_star]
    return RhoSearchResult(rho_star, best.solution.p_star, best.lambda_max_PU, trace, best, (lo, hi))


@dataclass(frozen=True)
class VerificationReport:
    slacks: dict[str, float]
    min_slack: float
    simplex_residual: float
    lambda_star: float
    lambda_max_PU: float
    gap: float
    relative_gap: float
    rho: float
    rho_min: float
    rho_ok: bool

    def to_dict(self) -> dict[str, Any]:
        worst = sorted(self.slacks.items(), key=lambda kv: kv[1])[:5]
        return {
            "min_slack": self.min_slack,
            "worst_slacks": dict(worst),
            "simplex_residual": self.simplex_residual,
            "lambda_star": self.lambda_star,
            "inverse_lambda_star": 1.0 / self.lambda_star,
            "lambda_max_PU": self.lambda_max_PU,
            "gap": self.gap,
            "relative_gap": self.relative_gap,
            "rho": self.rho,
            "rho_min": self.rho_min,
            "rho_ok": self.rho_ok,
        }


def verify_solution(
    model: SystemModel,
    pool: SensorPool,
    n_s: int,
    delta: float,
    rho: float,
    sol: SdpSolution,
    eta: float = DEFAULT_ETA,
    opts: RecursionOptions = DEFAULT_OPTIONS,
) -> VerificationReport:
    """Audit an optimal SDP point against the constraints and the Riccati ground truth."""
    if not sol.optimal:
        raise ValidationError(f"can only verify an optimal solution, got {sol.status.value}")
    inst = build_sdp(model, pool, n_s, delta, rho, eta)
    p = sol.p_star.weights
    slacks = inst.slacks(sol.lambda_star, sol.X_star, p)
    raw = sol.p_raw if sol.p_raw is not None else p
    simplex = max(abs(float(raw.sum()) - 1.0), float(np.clip(-raw, 0.0, None).max()))
    P_U = bounds_for_epsilon(model, expected_information(pool, sol.p_star), n_s, inst.eps, opts).P_U
    lmax = lambda_max(P_U)
    gap = abs(1.0 / sol.lambda_star - lmax)
    try:
        needed = rho_min(pool, sol.p_star)
    except RhoInfeasible:
        needed = math.inf
    return VerificationReport(
        slacks=slacks,
        min_slack=min(slacks.values()),
        simplex_residual=simplex,
        lambda_star=sol.lambda_star,
        lambda_max_PU=lmax,
        gap=gap,
        relative_gap=gap / lmax,
        rho=float(rho),
        rho_min=needed,
        rho_ok=needed <= rho + 1e-8,
    )
