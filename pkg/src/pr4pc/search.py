"""Multiplier search: sweep candidate multipliers, solve the regularized problem
for each, keep the solutions meeting the threshold and return the lowest-loss one.

Candidates come from an explicit list, a log-spaced grid, bisection on a single
multiplier, or projected subgradient ascent on the multipliers.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Literal, Sequence

import numpy as np

from .core import (
    ContractViolation,
    FloatArray,
    Problem,
    SolveResult,
    as_multipliers,
    as_threshold,
    infeasible_result,
)
from .solvers import DescentConfig, GridSpec, Solver, make_solver

log = logging.getLogger(__name__)

StrategyKind = Literal["explicit_list", "log_grid", "binary_search", "dual_ascent"]

MONOTONE_TOL = 1e-9


class InvalidBracket(ValueError):
    pass


@dataclass(frozen=True)
class LambdaStrategy:
    """How multiplier candidates are generated.

    Use the constructors :meth:`explicit`, :meth:`log_grid`, :meth:`binary`
    and :meth:`dual` rather than filling fields by hand.
    """

    kind: StrategyKind
    lambdas: tuple[tuple[float, ...], ...] = ()
    lo: tuple[float, ...] = ()
    hi: tuple[float, ...] = ()
    count: int = 0
    bracket: tuple[float, float] = (0.0, 0.0)
    tol: float = 1e-6
    lambda0: tuple[float, ...] = ()
    eta: float = 0.0
    iters: int = 0
    max_probes: int = 200

    @classmethod
    def explicit(cls, lambdas: Sequence[Sequence[float] | float]) -> "LambdaStrategy":
        rows = tuple(tuple(float(v) for v in np.atleast_1d(lam)) for lam in lambdas)
        return cls("explicit_list", lambdas=rows)

    @classmethod
    def log_grid(
        cls, lo: float | Sequence[float], hi: float | Sequence[float], count: int
    ) -> "LambdaStrategy":
        return cls(
            "log_grid",
            lo=tuple(float(v) for v in np.atleast_1d(lo)),
            hi=tuple(float(v) for v in np.atleast_1d(hi)),
            count=int(count),
        )

    @classmethod
    def binary(cls, lo: float, hi: float, tol: float = 1e-6, max_probes: int = 200) -> "LambdaStrategy":
        return cls("binary_search", bracket=(float(lo), float(hi)), tol=float(tol), max_probes=max_probes)

    @classmethod
    def dual(cls, lambda0: float | Sequence[float], eta: float, iters: int) -> "LambdaStrategy":
        return cls(
            "dual_ascent",
            lambda0=tuple(float(v) for v in np.atleast_1d(lambda0)),
            eta=float(eta),
            iters=int(iters),
        )

    def validate(self, m: int) -> None:
        if self.kind == "explicit_list":
            if not self.lambdas:
                raise ContractViolation("explicit strategy needs at least one multiplier")
            for lam in self.lambdas:
                as_multipliers(lam, m)
        elif self.kind == "log_grid":
            if self.count < 1:
                raise ContractViolation("log grid needs count >= 1")
            for bounds in (self.lo, self.hi):
                if len(bounds) not in (1, m):
                    raise ContractViolation(f"log grid bounds need 1 or {m} entries")
            if any(v <= 0 for v in self.lo + self.hi):
                raise ContractViolation("log grid bounds must be > 0")
        elif self.kind == "binary_search":
            if m != 1:
                raise ContractViolation("binary search handles a single multiplier only")
            lo, hi = self.bracket
            if not (0 <= lo < hi):
                raise ContractViolation(f"bracket must satisfy 0 <= lo < hi, got {self.bracket}")
            if not self.tol > 0:
                raise ContractViolation("binary search tolerance must be > 0")
        elif self.kind == "dual_ascent":
            as_multipliers(self.lambda0, m)
            if not self.eta > 0:
                raise ContractViolation("dual ascent step eta must be > 0")
            if self.iters < 1:
                raise ContractViolation("dual ascent needs iters >= 1")
        else:
            raise ContractViolation(f"unknown strategy kind {self.kind!r}")

    def candidates(self, m: int) -> list[FloatArray]:
        """Finite candidate list for ``explicit_list`` and ``log_grid``."""
        self.validate(m)
        if self.kind == "explicit_list":
            return [as_multipliers(lam, m) for lam in self.lambdas]
        if self.kind == "log_grid":
            lo = self.lo * m if len(self.lo) == 1 else self.lo
            hi = self.hi * m if len(self.hi) == 1 else self.hi
            axes = [log_space(a, b, self.count) for a, b in zip(lo, hi)]
            return [as_multipliers(c, m) for c in itertools.product(*axes)]
        raise ContractViolation(f"{self.kind} generates candidates adaptively")


def log_space(lo: float, hi: float, count: int) -> FloatArray:
    """``count`` log-spaced values with exact endpoints."""
    if count == 1:
        return np.array([float(lo)])
    vals = np.logspace(math.log10(lo), math.log10(hi), count)
    vals[0], vals[-1] = lo, hi
    return vals


@dataclass(frozen=True, eq=False)
class TraceEntry:
    index: int
    lam: FloatArray
    result: SolveResult
    stored: bool
    note: str | None = None


@dataclass(eq=False)
class Pr4pcOutcome:
    """Every attempted multiplier, the stored (threshold-meeting) subset and the winner."""

    theta: FloatArray
    trace: list[TraceEntry]
    winner: TraceEntry | None
    strategy: str
    flags: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def stored(self) -> list[TraceEntry]:
        return [e for e in self.trace if e.stored]

    @property
    def status(self) -> str:
        return "ok" if self.winner is not None else "no_multiplier_found"

    def to_dict(self) -> dict[str, Any]:
        def entry(e: TraceEntry) -> dict[str, Any]:
            return {
                "index": e.index,
                "lambda": [float(v) for v in e.lam],
                "stored": e.stored,
                "note": e.note,
                "result": e.result.to_dict(),
            }

        return {
            "status": self.status,
            "strategy": self.strategy,
            "theta": [float(v) for v in self.theta],
            "winner": None if self.winner is None else entry(self.winner),
            "stored": [entry(e) for e in self.stored],
            "trace": [entry(e) for e in self.trace],
            "flags": list(self.flags),
            "extra": self.extra,
        }


def _meets(result: SolveResult, theta: FloatArray) -> bool:
    return result.feasible and bool(np.all(result.violation <= theta))


def _entry(index: int, lam: FloatArray, result: SolveResult, theta: FloatArray, note: str | None = None) -> TraceEntry:
    return TraceEntry(index, lam, result, _meets(result, theta), note)


def _pick_winner(trace: list[TraceEntry]) -> TraceEntry | None:
    best: TraceEntry | None = None
    for e in trace:
        # strict '<' keeps the earliest entry on equal losses
        if e.stored and (best is None or e.result.loss < best.result.loss):
            best = e
    return best


def _safe_solve(solver: Solver, problem: Problem, lam: FloatArray, init: Any = None) -> tuple[SolveResult, str | None]:
    try:
        res = solver(problem, lam, init=init)
    except (ArithmeticError, ValueError) as exc:
        log.warning("solver failed at lambda=%s: %s", lam.tolist(), exc)
        return infeasible_result(problem, "descent_local", status="failed", lam=lam), f"solver error: {exc}"
    if res.status == "failed":
        return res, "solver failed: " + "; ".join(res.diagnostics)
    return res, None


def _monotonicity_flags(trace: list[TraceEntry], j: int = 0) -> list[str]:
    flags = []
    ok = [e for e in trace if e.result.feasible]
    for a, b in itertools.combinations(ok, 2):
        hi, lo = (a, b) if a.lam[j] >= b.lam[j] else (b, a)
        if hi.lam[j] > lo.lam[j] and hi.result.violation[j] > lo.result.violation[j] + MONOTONE_TOL:
            flags.append(
                f"non-monotone: lambda={hi.lam[j]:.17g} gives C={hi.result.violation[j]:.17g} "
                f"> C={lo.result.violation[j]:.17g} at lambda={lo.lam[j]:.17g}"
            )
    return flags


def pr4pc(
    problem: Problem,
    theta: Any,
    strategy: LambdaStrategy,
    solver: Literal["grid", "descent"] | Solver = "grid",
    grid: GridSpec | None = None,
    descent: DescentConfig | None = None,
    threads: int = 1,
    warm_start: bool = False,
) -> Pr4pcOutcome:
    """Search multipliers, keep regularized optima with ``C(w*) <= theta``, return the lowest loss.

    ``warm_start`` (descent only) seeds each solve with the previous optimum;
    it forces sequential evaluation.
    """
    theta = as_threshold(theta, problem.m)
    strategy.validate(problem.m)
    solve = make_solver(solver, grid, descent)
    if strategy.kind == "binary_search":
        return binary_search_multiplier(
            problem, theta, strategy.bracket, strategy.tol, solve, max_probes=strategy.max_probes
        )
    if strategy.kind == "dual_ascent":
        return dual_ascent(problem, theta, strategy.lambda0, strategy.eta, strategy.iters, solve)

    cands = strategy.candidates(problem.m)
    if warm_start:
        solved, prev = [], None
        for lam in cands:
            res, note = _safe_solve(solve, problem, lam, prev)
            if res.feasible:
                prev = res.w
            solved.append((res, note))
    elif threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            solved = list(pool.map(lambda lam: _safe_solve(solve, problem, lam), cands))
    else:
        solved = [_safe_solve(solve, problem, lam) for lam in cands]
    trace = [_entry(i, lam, res, theta, note) for i, (lam, (res, note)) in enumerate(zip(cands, solved))]
    return Pr4pcOutcome(theta, trace, _pick_winner(trace), strategy.kind)


def binary_search_multiplier(
    problem: Problem,
    theta: Any,
    bracket: Sequence[float],
    tol: float,
    solver: Literal["grid", "descent"] | Solver = "grid",
    grid: GridSpec | None = None,
    descent: DescentConfig | None = None,
    max_probes: int = 200,
) -> Pr4pcOutcome:
    """Bisect a single multiplier until the bracket is narrower than ``tol``.

    The bracket must satisfy ``C(w*(lo)) >= theta >= C(w*(hi))``.  Every probe
    is kept in the trace; pairs of probes that contradict monotonicity are
    reported in ``flags`` (expected with local solvers).
    """
    if problem.m != 1:
        raise ContractViolation("binary search handles a single multiplier only")
    theta = as_threshold(theta, 1)
    lo, hi = (float(v) for v in bracket)
    if not (0 <= lo < hi) or not tol > 0:
        raise ContractViolation(f"need 0 <= lo < hi and tol > 0, got bracket {bracket}, tol {tol}")
    solve = make_solver(solver, grid, descent)
    trace: list[TraceEntry] = []

    def probe(lam_value: float) -> SolveResult:
        lam = as_multipliers([lam_value], 1)
        res, note = _safe_solve(solve, problem, lam)
        trace.append(_entry(len(trace), lam, res, theta, note))
        if not res.feasible:
            raise InvalidBracket(f"solver failed at lambda={lam_value}: {note}")
        return res

    c_lo = probe(lo).violation[0]
    c_hi = probe(hi).violation[0]
    if not (c_lo >= theta[0] >= c_hi):
        raise InvalidBracket(
            f"bracket [{lo}, {hi}] gives C={c_lo:.6g}..{c_hi:.6g}, which does not straddle theta={theta[0]:.6g}"
        )
    while hi - lo > tol and len(trace) < max_probes:
        mid = 0.5 * (lo + hi)
        if probe(mid).violation[0] <= theta[0]:
            hi = mid
        else:
            lo = mid
    out = Pr4pcOutcome(theta, trace, _pick_winner(trace), "binary_search")
    out.flags = _monotonicity_flags(trace)
    out.extra["terminal_bracket"] = [lo, hi]
    if hi - lo > tol:
        out.flags.append(f"probe limit {max_probes} reached with bracket width {hi - lo:.3g}")
    return out


def dual_ascent(
    problem: Problem,
    theta: Any,
    lambda0: Any,
    eta: float,
    iters: int,
    solver: Literal["grid", "descent"] | Solver = "grid",
    grid: GridSpec | None = None,
    descent: DescentConfig | None = None,
) -> Pr4pcOutcome:
    """Projected subgradient ascent: ``lam <- max(0, lam + eta * (C(w*) - theta))``.

    A failed solve is recorded and the next iterate reuses the last multiplier.
    """
    theta = as_threshold(theta, problem.m)
    lam = as_multipliers(lambda0, problem.m)
    if not eta > 0:
        raise ContractViolation("eta must be > 0")
    if iters < 1:
        raise ContractViolation("iters must be >= 1")
    solve = make_solver(solver, grid, descent)
    trace: list[TraceEntry] = []
    for t in range(iters):
        res, note = _safe_solve(solve, problem, lam)
        trace.append(_entry(t, lam, res, theta, note))
        if res.feasible:
            lam = as_multipliers(np.maximum(0.0, lam + eta * (res.violation - theta)))
    out = Pr4pcOutcome(theta, trace, _pick_winner(trace), "dual_ascent")
    out.extra["final_lambda"] = [float(v) for v in lam]
    return out
