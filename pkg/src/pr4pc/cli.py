"""Batch experiment runner.

    pr4pc run config.json [--out DIR] [--threads N] [--budget N] [--seed N]
    pr4pc demo fig2a --out DIR
    pr4pc schema

Exit codes: 0 ok, 2 config error, 3 grid budget exceeded, 4 requested
feasibility unmet (constrained solve infeasible, or no multiplier found).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from .analysis import (
    attainability_halfspaces,
    check_theorem1,
    monotonicity_scan,
    multiplier_interval,
    multiplier_region_feasible,
    sensitivity_curve,
    trace_conformance,
)
from .artifacts import ArtifactWriter, dumps
from .config import (
    AttainabilityConfig,
    DemoConfig,
    MonotonicityConfig,
    Pr4pcConfig,
    SensitivityConfig,
    SolvePCConfig,
    SolvePRConfig,
    Theorem1Config,
    config_schema,
    parse_config,
)
from .core import ContractViolation, regularized_values
from .demos import run_demo
from .instances import InstanceParamError, InstanceSpec, UnknownInstanceError, make_instance
from .search import InvalidBracket, LambdaStrategy, log_space, pr4pc
from .solvers import BudgetExceeded, grid_table, make_solver, solve_pc_grid, solve_pr_grid

log = logging.getLogger("pr4pc")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_INFEASIBLE = 4

HALFSPACE_JSON_LIMIT = 2000


class ConfigError(ValueError):
    pass


@dataclass
class RunArtifact:
    output_dir: Path | None
    exit_code: int
    files: dict[str, str] = field(default_factory=dict)
    result: dict[str, Any] | None = None
    diagnostic: dict[str, Any] | None = None


def _diagnostic(kind: str, message: str, code: int, **extra: Any) -> dict[str, Any]:
    return {"error": kind, "message": message, "exit_code": code, **extra}


def _strategy(cfg: Any) -> LambdaStrategy:
    if cfg.kind == "explicit_list":
        return LambdaStrategy.explicit(cfg.lambdas)
    if cfg.kind == "log_grid":
        return LambdaStrategy.log_grid(cfg.lo, cfg.hi, cfg.count)
    if cfg.kind == "binary_search":
        return LambdaStrategy.binary(cfg.lo, cfg.hi, cfg.tol, cfg.max_probes)
    return LambdaStrategy.dual(cfg.lambda0, cfg.eta, cfg.iters)


def _log_grid(rng_cfg: Any, m: int) -> np.ndarray:
    axis = log_space(rng_cfg.lo, rng_cfg.hi, rng_cfg.count)
    mesh = np.meshgrid(*([axis] * m), indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def _execute(cfg: Any, writer: ArtifactWriter, threads: int, budget: int | None) -> tuple[dict[str, Any], int]:
    problem = make_instance(InstanceSpec(cfg.instance.name, cfg.instance.params))
    grid = cfg.grid.build(budget)
    descent = cfg.descent.build(cfg.seed)
    head = {"command": cfg.command, "instance": problem.name, "params": problem.params}

    if isinstance(cfg, SolvePRConfig):
        res = make_solver(cfg.solver, grid, descent)(problem, cfg.lambda_)
        if problem.dim == 1 and problem.space.kind == "box" and cfg.solver == "grid":
            table = grid_table(problem, grid)
            values = regularized_values(table.loss, table.violation, res.lam)
            writer.curve("objective", table.points[:, 0], values)
        return {**head, "solution": res.to_dict()}, EXIT_OK

    if isinstance(cfg, SolvePCConfig):
        res = solve_pc_grid(problem, cfg.theta, grid, cfg.feas_tol)
        return {**head, "solution": res.to_dict()}, EXIT_OK if res.feasible else EXIT_INFEASIBLE

    if isinstance(cfg, Pr4pcConfig):
        outcome = pr4pc(
            problem, cfg.theta, _strategy(cfg.strategy), cfg.solver, grid, descent, threads, cfg.warm_start
        )
        writer.trace(outcome)
        writer.curve("lambda-violation", [e.lam[0] for e in outcome.trace], [e.result.violation[0] for e in outcome.trace])
        writer.curve("lambda-loss", [e.lam[0] for e in outcome.trace], [e.result.loss for e in outcome.trace])
        body = {**head, "outcome": outcome.to_dict(), "solver": cfg.solver}
        # Reported for descent traces too, where it is not guaranteed.
        body["theorem1_conformance"] = trace_conformance(problem, outcome, grid)
        return body, EXIT_OK if outcome.winner is not None else EXIT_INFEASIBLE

    if isinstance(cfg, Theorem1Config):
        if cfg.lambdas is not None:
            lams = [np.asarray(l, dtype=float) for l in cfg.lambdas]
        else:
            rng = np.random.default_rng(cfg.seed)
            lo, hi = np.log(cfg.lambda_range[0]), np.log(cfg.lambda_range[1])
            lams = [np.exp(rng.uniform(lo, hi, problem.m)) for _ in range(cfg.random_count)]
        checks = [check_theorem1(problem, lam, grid, cfg.tol) for lam in lams]
        return {
            **head,
            "holds_all": all(c.holds for c in checks),
            "checks": [{"lambda": lam, **c.to_dict()} for lam, c in zip(lams, checks)],
        }, EXIT_OK

    if isinstance(cfg, AttainabilityConfig):
        sources = [cfg.w_star is not None, cfg.from_lambda is not None, cfg.from_theta is not None]
        if sum(sources) != 1:
            raise ConfigError("attainability needs exactly one of w_star, from_lambda, from_theta")
        if cfg.w_star is not None:
            w_star = cfg.w_star
        elif cfg.from_lambda is not None:
            w_star = solve_pr_grid(problem, cfg.from_lambda, grid).w
        else:
            pc = solve_pc_grid(problem, cfg.from_theta, grid)
            if not pc.feasible:
                return {**head, "solution": pc.to_dict()}, EXIT_INFEASIBLE
            w_star = pc.w
        hs = attainability_halfspaces(problem, w_star, grid, cfg.tol)
        interval = multiplier_interval(hs, cfg.j, cfg.lambda_other, cfg.exact, cfg.tol)
        region = multiplier_region_feasible(hs, _log_grid(cfg.lambda_grid, problem.m), cfg.tol)
        hs_body = hs.to_dict()
        if len(hs) > HALFSPACE_JSON_LIMIT:
            hs_body["halfspaces"] = None
            hs_body["omitted"] = f"{len(hs)} half-spaces exceed the JSON listing limit of {HALFSPACE_JSON_LIMIT}"
        if problem.m == 1:
            writer.curve("halfspace-bounds", hs.delta_c[:, 0], hs.delta_l)
        return {
            **head,
            "halfspaces": hs_body,
            "interval": interval.to_dict(),
            "region": region.to_dict(),
            "premise_ok": hs.premise_ok,
        }, EXIT_OK

    if isinstance(cfg, MonotonicityConfig):
        if (cfg.lambdas is None) == (cfg.lambda_range is None):
            raise ConfigError("monotonicity needs exactly one of lambdas, lambda_range")
        values = cfg.lambdas if cfg.lambdas is not None else log_space(cfg.lambda_range.lo, cfg.lambda_range.hi, cfg.lambda_range.count)
        base = np.zeros(problem.m) if cfg.base is None else np.asarray(cfg.base, dtype=float)
        if base.shape[0] != problem.m or not 0 <= cfg.j < problem.m:
            raise ConfigError("monotonicity base/j do not match the number of constraints")
        lams = []
        for v in values:
            lam = base.copy()
            lam[cfg.j] = v
            lams.append(lam)
        report = monotonicity_scan(problem, lams, cfg.j, cfg.solver, grid, descent, cfg.tol)
        writer.curve("monotonicity", report.lambdas, report.violations_seq)
        return {**head, "report": report.to_dict()}, EXIT_OK

    if isinstance(cfg, SensitivityConfig):
        thetas = sorted(cfg.thetas, reverse=True)
        curve = sensitivity_curve(problem, thetas, tuple(cfg.lambda_range), cfg.count, grid)
        writer.curve("sensitivity", [r.theta for r in curve.rows], [r.lam for r in curve.rows])
        return {**head, "curve": curve.to_dict()}, EXIT_OK

    raise ConfigError(f"unsupported command {cfg.command!r}")


def run_experiment(
    config: dict[str, Any],
    *,
    output_dir: str | Path | None = None,
    threads: int | None = None,
    budget: int | None = None,
    seed: int | None = None,
    timings: bool = False,
) -> RunArtifact:
    """Validate ``config``, run it and write ``manifest.json``, ``result.json`` and data files.

    Never raises for expected failures; the outcome is carried by ``exit_code``
    and ``diagnostic``.  Config errors write no files.
    """
    config = dict(config)
    if seed is not None:
        config["seed"] = seed
    if output_dir is not None:
        config["output_dir"] = str(output_dir)
    if threads is not None:
        config["threads"] = threads
    try:
        cfg = parse_config(config)
    except ValidationError as exc:
        diag = _diagnostic("config", "invalid configuration", EXIT_CONFIG, details=json.loads(exc.json(include_url=False)))
        return RunArtifact(None, EXIT_CONFIG, diagnostic=diag)
    n_threads = cfg.threads or os.cpu_count() or 1
    echo = cfg.model_dump(mode="json", by_alias=True)
    out = Path(cfg.output_dir)
    started = time.perf_counter()
    try:
        if isinstance(cfg, DemoConfig):
            writer = ArtifactWriter(out)
            result = run_demo(cfg.name, writer, n_threads)
            code = EXIT_OK
        else:
            # validate the instance before creating any output
            make_instance(InstanceSpec(cfg.instance.name, cfg.instance.params))
            writer = ArtifactWriter(out)
            result, code = _execute(cfg, writer, n_threads, budget)
            writer.json("result.json", result)
    except (UnknownInstanceError, InstanceParamError, ConfigError, InvalidBracket, ContractViolation, IndexError, KeyError) as exc:
        diag = _diagnostic("config", str(exc).strip("'\""), EXIT_CONFIG)
        return RunArtifact(None, EXIT_CONFIG, diagnostic=diag)
    except BudgetExceeded as exc:
        diag = _diagnostic("budget", str(exc), EXIT_BUDGET, required=exc.required, budget=exc.budget)
        writer = ArtifactWriter(out)
        writer.json("diagnostic.json", diag)
        writer.manifest(echo, EXIT_BUDGET)
        return RunArtifact(out, EXIT_BUDGET, dict(writer.files), diagnostic=diag)
    elapsed = {"total_seconds": time.perf_counter() - started} if timings else None
    writer.manifest(echo, code, elapsed)
    diag = None
    if code == EXIT_INFEASIBLE:
        diag = _diagnostic("infeasible", "requested feasibility not met (no multiplier found or empty feasible set)", code)
    return RunArtifact(out, code, dict(writer.files), result, diag)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="cap on worker threads (default: machine parallelism)")
    common.add_argument("--budget", type=int, default=None, help="maximum grid evaluations per solve")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--timings", action="store_true", help="record wall-clock timings in the manifest (breaks byte-identical reruns)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pr4pc", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", parents=[common], help="run an experiment config")
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, default=None, help="override output_dir")
    demo = sub.add_parser("demo", parents=[common], help="run a pre-wired demonstration")
    demo.add_argument("name", choices=["fig1a", "fig1b", "fig2a", "fig2b", "relax_pitfall"])
    demo.add_argument("--out", type=Path, required=True)
    sub.add_parser("schema", help="print the config JSON schema")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "schema":
        sys.stdout.write(dumps(config_schema()))
        return EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.cmd == "demo":
        config: dict[str, Any] = {"command": "demo", "name": args.name}
    else:
        try:
            config = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            sys.stderr.write(dumps(_diagnostic("config", f"cannot read {args.config}: {exc}", EXIT_CONFIG)))
            return EXIT_CONFIG
        if not isinstance(config, dict):
            sys.stderr.write(dumps(_diagnostic("config", "config must be a JSON object", EXIT_CONFIG)))
            return EXIT_CONFIG
    art = run_experiment(
        config,
        output_dir=args.out,
        threads=args.threads,
        budget=args.budget,
        seed=args.seed,
        timings=args.timings,
    )
    if art.diagnostic is not None:
        sys.stderr.write(dumps(art.diagnostic))
    if art.output_dir is not None:
        print(f"wrote {len(art.files)} files to {art.output_dir} (exit {art.exit_code})")
    return art.exit_code


if __name__ == "__main__":
    sys.exit(main())
