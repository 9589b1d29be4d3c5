"""Batch experiment driver.

    covsel gen|sweep-rho|optimize|sweep-ns|compare --config FILE
           [--seed N] [--out DIR] [--trials N] [--reproducible]

The config is a single JSON object; see README.md for the keys. Exit codes:
0 success, 2 config/validation error, 3 infeasibility, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bounds import bound_pair
from .concentration import feasible_rho_interval, rho_min
from .errors import AllInfeasible, CovselError, InfeasibilityError, NumericalError, ValidationError
from .io import atomic_write_text, csv_text
from .linalg import psd_sqrt
from .model import (
    SensorPool,
    SystemModel,
    generate_synthetic_pool,
    load_problem,
    problem_from_dict,
    problem_to_dict,
)
from .optimizer import DEFAULT_ETA, optimize_for_rho, search_rho, verify_solution
from .policies import greedy_with_replacement, monte_carlo, uniform_distribution
from .riccati import is_observable, is_stabilizable

log = logging.getLogger("covsel")

POLICIES = ("uniform", "optimal", "greedy")


@dataclass
class ExperimentConfig:
    system: dict[str, Any]
    delta: float = 0.1
    n_s: list[int] = field(default_factory=lambda: [100])
    rho: Any = "search"
    gamma: float = 1e-2
    grid_points: int = 16
    eta: float = DEFAULT_ETA
    trials: int = 100
    seed: int = 0
    policy: str = "optimal"
    out: Path = Path(".")
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, doc: Any, base_dir: Path = Path(".")) -> ExperimentConfig:
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        if "system" not in doc or not isinstance(doc["system"], dict):
            raise ValidationError("config needs a 'system' object (path, synthetic, or inline problem)")
        unknown = set(doc) - {"system", "delta", "n_s", "rho", "gamma", "grid_points", "eta", "trials", "seed", "policy", "out"}
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(system=doc["system"], base_dir=base_dir)
        cfg.delta = float(doc.get("delta", cfg.delta))
        if not 0.0 < cfg.delta < 1.0:
            raise ValidationError(f"delta must lie in (0, 1), got {cfg.delta}")
        n_s = doc.get("n_s", cfg.n_s)
        n_s = n_s if isinstance(n_s, list) else [n_s]
        if not n_s or not all(isinstance(n, int) and not isinstance(n, bool) and n >= 1 for n in n_s):
            raise ValidationError("n_s must be a positive integer or a non-empty list of them")
        cfg.n_s = n_s
        cfg.rho = _parse_rho(doc.get("rho", "search"))
        if isinstance(doc.get("rho"), dict) and "gamma" in doc["rho"]:
            cfg.gamma = float(doc["rho"]["gamma"])
        cfg.gamma = float(doc.get("gamma", cfg.gamma))
        cfg.grid_points = int(doc.get("grid_points", cfg.grid_points))
        cfg.eta = float(doc.get("eta", cfg.eta))
        cfg.trials = int(doc.get("trials", cfg.trials))
        cfg.seed = int(doc.get("seed", cfg.seed))
        cfg.policy = str(doc.get("policy", cfg.policy))
        if "out" in doc:
            cfg.out = base_dir / doc["out"]
        if cfg.policy not in POLICIES:
            raise ValidationError(f"policy must be one of {POLICIES}, got {cfg.policy!r}")
        if not cfg.gamma > 0 or not cfg.eta > 0 or cfg.trials < 1 or cfg.grid_points < 1:
            raise ValidationError("gamma and eta must be positive; trials and grid_points >= 1")
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"config file {path} does not exist")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: malformed JSON: {exc}") from None
        return cls.from_dict(doc, path.parent)

    def synthetic_spec(self) -> dict[str, Any] | None:
        return self.system.get("synthetic")

    def problem(self) -> tuple[SystemModel, SensorPool]:
        sysdoc = self.system
        if "path" in sysdoc:
            path = self.base_dir / sysdoc["path"]
            if not path.is_file():
                raise ValidationError(f"system file {path} does not exist")
            return load_problem(path)
        if "synthetic" in sysdoc:
            return _generate(sysdoc["synthetic"], self.seed)
        return problem_from_dict(sysdoc)

    def rho_grid(self) -> list[float] | None:
        return None if self.rho == "search" else list(self.rho)


def _parse_rho(value: Any) -> Any:
    if value == "search":
        return "search"
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    if isinstance(value, list) and value and all(isinstance(v, (int, float)) for v in value):
        return [float(v) for v in value]
    if isinstance(value, dict):
        if value.get("search"):
            return "search"
        if "grid" in value:
            g = value["grid"]
            try:
                num = int(g["num"])
                start, stop = float(g["start"]), float(g["stop"])
            except (KeyError, TypeError, ValueError):
                raise ValidationError("rho grid needs numeric 'start', 'stop', 'num'") from None
            if num < 1:
                raise ValidationError("rho grid must be non-empty")
            return np.linspace(start, stop, num).tolist()
    raise ValidationError(f"rho must be a number, a non-empty list, 'search' or a grid object; got {value!r}")


def _generate(spec: Any, default_seed: int) -> tuple[SystemModel, SensorPool]:
    if not isinstance(spec, dict):
        raise ValidationError("synthetic spec must be an object")
    try:
        m = int(spec.get("m", 3))
        n_c = int(spec.get("n_c", 200))
        sigma2 = float(spec.get("sigma2", 0.5))
        q_scale = float(spec.get("q_scale", 0.5))
        seed = int(spec.get("seed", default_seed))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"synthetic spec: {exc}") from None
    return generate_synthetic_pool(m, n_c, sigma2, q_scale, seed)


@dataclass
class RunContext:
    config: ExperimentConfig
    reproducible: bool
    command: str

    def preamble(self) -> str | None:
        if self.reproducible:
            return None
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return f"covsel {__version__} {self.command} {stamp}"

    def write_csv(self, name: str, header: Sequence[str], rows: list[Sequence[Any]]) -> Path:
        path = self.config.out / name
        atomic_write_text(path, csv_text(header, rows, self.preamble()))
        log.info("wrote %s", path)
        return path

    def write_json(self, name: str, doc: dict[str, Any]) -> Path:
        path = self.config.out / name
        atomic_write_text(path, json.dumps(_jsonable(doc), indent=1, allow_nan=True) + "\n")
        log.info("wrote %s", path)
        return path


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


# -- commands -----------------------------------------------------------------


def detectability_audit(model: SystemModel, pool: SensorPool) -> dict[str, Any]:
    observable = [is_observable(model.A, s.c) for s in pool.sensors]
    return {
        "n_c": pool.n_c,
        "observable_pairs": int(sum(observable)),
        "all_observable": all(observable),
        "stabilizable": is_stabilizable(model.A, psd_sqrt(model.Q)),
        "spectral_radius": float(np.abs(np.linalg.eigvals(model.A)).max()),
    }


def cmd_gen(ctx: RunContext) -> int:
    spec = ctx.config.synthetic_spec()
    if spec is None:
        raise ValidationError("gen needs a 'system.synthetic' spec")
    model, pool = _generate(spec, ctx.config.seed)
    ctx.write_json("pool.json", problem_to_dict(model, pool))
    audit = detectability_audit(model, pool)
    print(
        f"(A, c_j) observable for {audit['observable_pairs']}/{audit['n_c']} sensors; "
        f"(A, Q^1/2) stabilizable: {audit['stabilizable']}; spectral radius {audit['spectral_radius']:.6g}"
    )
    return 0


def _uniform_sweep_point(model, pool, n_s, delta, rho) -> tuple[float, str]:
    try:
        b = bound_pair(model, pool, uniform_distribution(pool.n_c), n_s, delta, rho)
    except InfeasibilityError:
        return math.nan, "infeasible"
    except NumericalError:
        return math.nan, "numerical_trouble"
    return b.lambda_max_PU, "feasible"


def cmd_sweep_rho(ctx: RunContext) -> int:
    cfg = ctx.config
    model, pool = cfg.problem()
    n_s = cfg.n_s[0]
    grid = cfg.rho_grid()
    interval = feasible_rho_interval(n_s, model.m, cfg.delta)
    if grid is None:
        grid = [interval.lo + (interval.hi - interval.lo) * k / cfg.grid_points for k in range(cfg.grid_points)]
    rows: list[list[Any]] = []
    for rho in grid:
        if cfg.policy == "uniform":
            lm, status = _uniform_sweep_point(model, pool, n_s, cfg.delta, rho)
        else:
            try:
                lm, status = optimize_for_rho(model, pool, n_s, cfg.delta, rho, cfg.eta).lambda_max_PU, "feasible"
            except InfeasibilityError:
                lm, status = math.nan, "infeasible"
            except NumericalError:
                lm, status = math.nan, "numerical_trouble"
        rows.append([rho, lm, status])
        log.info("rho=%s lambda_max_PU=%s %s", rho, lm, status)
    if all(r[2] != "feasible" for r in rows):
        ctx.write_csv("sweep_rho.csv", ["rho", "lambda_max_PU", "status"], rows)
        raise AllInfeasible(f"every rho on the grid is infeasible at n_s={n_s}")
    if cfg.policy != "uniform":
        best = search_rho(model, pool, n_s, cfg.delta, cfg.eta, cfg.gamma, cfg.grid_points)
        rows.append([best.rho_star, best.lambda_max_PU, "optimal"])
    ctx.write_csv("sweep_rho.csv", ["rho", "lambda_max_PU", "status"], rows)
    return 0


def cmd_optimize(ctx: RunContext) -> int:
    cfg = ctx.config
    model, pool = cfg.problem()
    n_s = cfg.n_s[0]
    if cfg.rho == "search":
        res = search_rho(model, pool, n_s, cfg.delta, cfg.eta, cfg.gamma, cfg.grid_points)
        rho_star, ev = res.rho_star, res.best
        trace = res.to_dict()["trace"]
    else:
        best = None
        for rho in cfg.rho:
            try:
                ev = optimize_for_rho(model, pool, n_s, cfg.delta, rho, cfg.eta)
            except InfeasibilityError:
                continue
            if best is None or ev.lambda_max_PU < best.lambda_max_PU:
                best = ev
        if best is None:
            raise AllInfeasible("no configured rho value is feasible")
        rho_star, ev, trace = best.rho, best, None
    report = verify_solution(model, pool, n_s, cfg.delta, rho_star, ev.solution, cfg.eta)
    p = ev.solution.p_star.weights
    support = np.flatnonzero(p > 1e-6)
    doc = {
        "n_s": n_s,
        "delta": cfg.delta,
        "rho_star": rho_star,
        "epsilon": ev.bounds.eps,
        "lambda_max_PU": ev.lambda_max_PU,
        "lambda_max_PL": ev.bounds.lambda_max_PL,
        "lambda_star": ev.solution.lambda_star,
        "p_star": p,
        "support": {"count": int(support.size), "indices": support, "threshold": 1e-6},
        "verification": report.to_dict(),
        "trace": trace,
    }
    ctx.write_json("optimize.json", doc)
    ctx.write_csv("p_star.csv", ["sensor_index", "weight"], [[j, float(w)] for j, w in enumerate(p)])
    print(
        f"rho* = {rho_star:.6g}, lambda_max(P_U) = {ev.lambda_max_PU:.6g}, "
        f"{support.size} sensors carry weight > 1e-6, relative gap {report.relative_gap:.3g}"
    )
    return 0


def cmd_sweep_ns(ctx: RunContext) -> int:
    cfg = ctx.config
    model, pool = cfg.problem()
    uniform = uniform_distribution(pool.n_c)
    try:
        rho_u = rho_min(pool, uniform)
    except InfeasibilityError:
        rho_u = math.inf
    rows: list[list[Any]] = []
    for n_s in cfg.n_s:
        interval = feasible_rho_interval(n_s, model.m, cfg.delta)
        if rho_u in interval:
            lm, status = _uniform_sweep_point(model, pool, n_s, cfg.delta, rho_u)
        else:
            lm, status = math.nan, "infeasible"
        rows.append([n_s, "uniform", lm, status == "feasible", rho_u])
        try:
            res = search_rho(model, pool, n_s, cfg.delta, cfg.eta, cfg.gamma, cfg.grid_points)
            rows.append([n_s, "optimal", res.lambda_max_PU, True, res.rho_star])
        except (InfeasibilityError, NumericalError):
            rows.append([n_s, "optimal", math.nan, False, math.nan])
        log.info("n_s=%d done", n_s)
    ctx.write_csv("sweep_ns.csv", ["n_s", "policy", "lambda_max_PU", "feasible", "rho"], rows)
    return 0


def cmd_compare(ctx: RunContext) -> int:
    cfg = ctx.config
    model, pool = cfg.problem()
    greedy = greedy_with_replacement(model, pool, max(cfg.n_s))
    rows: list[list[Any]] = []
    for n_s in cfg.n_s:
        g = greedy.trace[n_s - 1]
        try:
            res = search_rho(model, pool, n_s, cfg.delta, cfg.eta, cfg.gamma, cfg.grid_points)
        except (InfeasibilityError, NumericalError):
            rows.append([n_s, math.nan, math.nan, math.nan, math.nan, g, math.nan])
            continue
        b = bound_pair(model, pool, res.p_star, n_s, cfg.delta, res.rho_star)
        stats, _ = monte_carlo(model, pool, res.p_star, n_s, cfg.trials, cfg.seed, b)
        rows.append(
            [n_s, b.lambda_max_PU, b.lambda_max_PL, stats.mean_lambda_max, stats.std_lambda_max, g, stats.coverage]
        )
        log.info("n_s=%d done", n_s)
    header = [
        "n_s",
        "lambda_max_PU",
        "lambda_max_PL",
        "mean_lambda_max_PS",
        "std_lambda_max_PS",
        "greedy_lambda_max",
        "coverage",
    ]
    ctx.write_csv("compare.csv", header, rows)
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "sweep-rho": cmd_sweep_rho,
    "optimize": cmd_optimize,
    "sweep-ns": cmd_sweep_ns,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covsel", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"covsel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="experiment config JSON")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--out", help="output directory (overrides config 'out')")
        sp.add_argument("--trials", type=int, help="override the Monte Carlo trial count")
        sp.add_argument("--reproducible", action="store_true", help="omit the timestamp line from CSV output")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = Path(args.out)
        if args.trials is not None:
            if args.trials < 1:
                raise ValidationError("--trials must be >= 1")
            cfg.trials = args.trials
        return COMMANDS[args.command](RunContext(cfg, args.reproducible, args.command))
    except CovselError as exc:
        print(f"covsel {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
