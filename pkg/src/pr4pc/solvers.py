"""PR/PC solution backends: an exhaustive grid oracle and projected gradient descent."""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Any, Callable, Literal

import numpy as np

from .core import (
    ContractViolation,
    EvaluationError,
    FloatArray,
    Problem,
    SolveResult,
    as_assignment,
    as_multipliers,
    as_threshold,
    infeasible_result,
    regularized_values,
)

log = logging.getLogger(__name__)

Prefer = Literal["low_violation", "high_violation"]

DEFAULT_BUDGET = 10_000_000
_EPS = np.finfo(np.float64).eps


class BudgetExceeded(RuntimeError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"grid needs {required} evaluations, budget is {budget}")
        self.required = required
        self.budget = budget


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid over a box (ignored for finite spaces, which are enumerated).

    ``points_per_dim=None`` uses the instance default.  ``prefer`` decides ties
    between equal objective values: by default the smaller violation wins.
    ``tie_tol`` is relative; ``None`` means a few ulps.
    """

    points_per_dim: int | tuple[int, ...] | None = None
    budget: int = DEFAULT_BUDGET
    prefer: Prefer = "low_violation"
    tie_tol: float | None = None

    def resolve(self, problem: Problem) -> tuple[int, ...]:
        ppd = problem.default_points if self.points_per_dim is None else self.points_per_dim
        if isinstance(ppd, int):
            ppd = (ppd,) * problem.dim
        ppd = tuple(int(k) for k in ppd)
        if len(ppd) != problem.dim:
            raise ContractViolation(f"grid has {len(ppd)} axes, problem has dimension {problem.dim}")
        if any(k < 2 for k in ppd):
            raise ContractViolation("a grid needs at least 2 points per dimension")
        return ppd


@dataclass(frozen=True, eq=False)
class GridTable:
    """Loss and violation evaluated once over every grid point."""

    points: FloatArray
    loss: FloatArray
    violation: FloatArray
    steps: FloatArray
    labels: tuple[str, ...] | None
    provenance: Literal["grid_global", "finite_enumeration"]

    def __len__(self) -> int:
        return self.points.shape[0]


def _freeze(a: FloatArray) -> FloatArray:
    a.setflags(write=False)
    return a


@functools.lru_cache(maxsize=16)
def _cached_table(problem: Problem, grid: GridSpec) -> GridTable:
    space = problem.space
    if space.kind == "finite":
        pts = np.array(space.points, dtype=np.float64)
        if pts.shape[0] > grid.budget:
            raise BudgetExceeded(pts.shape[0], grid.budget)
        steps = np.zeros(problem.dim)
        labels = space.labels or None
        provenance = "finite_enumeration"
    else:
        ppd = grid.resolve(problem)
        required = int(np.prod(ppd, dtype=np.int64))
        if required > grid.budget:
            raise BudgetExceeded(required, grid.budget)
        axes = [np.linspace(lo, hi, k) for lo, hi, k in zip(space.lo, space.hi, ppd)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.reshape(-1) for g in mesh], axis=1)
        steps = np.array([(hi - lo) / (k - 1) for lo, hi, k in zip(space.lo, space.hi, ppd)])
        labels = None
        provenance = "grid_global"
    log.debug("evaluating %s on %d grid points", problem.name, pts.shape[0])
    loss = problem.batch_loss(pts)
    viol = problem.batch_violation(pts)
    return GridTable(
        _freeze(pts), _freeze(loss), _freeze(viol), _freeze(steps), labels, provenance
    )


def grid_table(problem: Problem, grid: GridSpec | None = None) -> GridTable:
    return _cached_table(problem, grid or GridSpec())


def select_best(
    values: FloatArray,
    violation: FloatArray,
    points: FloatArray,
    prefer: Prefer = "low_violation",
    tie_tol: float | None = None,
) -> int:
    """Index of the minimum of ``values`` with a deterministic tie-break.

    Values within ``tie_tol`` (relative) of the minimum are tied; ties go to the
    lexicographically smaller (or larger, with ``high_violation``) violation,
    then the lexicographically smaller point.  The result does not depend on the
    order of the inputs.
    """
    best = values.min()
    tol = (4 * _EPS if tie_tol is None else tie_tol) * max(1.0, abs(best))
    cand = np.flatnonzero(values <= best + tol)
    if cand.size == 1:
        return int(cand[0])
    C = violation[cand]
    if prefer == "high_violation":
        C = -C
    # lexsort: last key is primary
    keys = [points[cand, k] for k in range(points.shape[1] - 1, -1, -1)]
    keys += [C[:, k] for k in range(C.shape[1] - 1, -1, -1)]
    return int(cand[np.lexsort(keys)[0]])


def _result_at(
    problem: Problem, table: GridTable, idx: int, lam: FloatArray | None, **kw: Any
) -> SolveResult:
    w = _freeze(table.points[idx].copy())
    C = _freeze(table.violation[idx].copy())
    L = float(table.loss[idx])
    reg = L if lam is None else float(regularized_values(table.loss[idx : idx + 1], C[None, :], lam)[0])
    return SolveResult(
        w=w,
        loss=L,
        violation=C,
        reg_objective=reg,
        provenance=table.provenance,
        converged=True,
        lam=lam,
        label=table.labels[idx] if table.labels else None,
        **kw,
    )


def solve_pr_grid(problem: Problem, lam: Any, grid: GridSpec | None = None) -> SolveResult:
    """Exact minimizer of ``L + lam . C`` over the grid (or finite space)."""
    grid = grid or GridSpec()
    lam = as_multipliers(lam, problem.m)
    table = grid_table(problem, grid)
    values = regularized_values(table.loss, table.violation, lam)
    idx = select_best(values, table.violation, table.points, grid.prefer, grid.tie_tol)
    return _result_at(problem, table, idx, lam)


def solve_pc_grid(
    problem: Problem, theta: Any, grid: GridSpec | None = None, feas_tol: float = 0.0
) -> SolveResult:
    """Minimum loss among grid points with ``C(w) <= theta``.

    An empty feasible set yields a result with ``status="infeasible"``.
    """
    grid = grid or GridSpec()
    theta = as_threshold(theta, problem.m)
    table = grid_table(problem, grid)
    mask = np.all(table.violation <= theta + feas_tol, axis=1)
    if not mask.any():
        return infeasible_result(problem, table.provenance, theta=theta)
    sub = np.flatnonzero(mask)
    pick = select_best(
        table.loss[sub], table.violation[sub], table.points[sub], grid.prefer, grid.tie_tol
    )
    return _result_at(problem, table, int(sub[pick]), None, theta=theta)


def analytic_grad(problem: Problem, lam: Any, w: Any) -> FloatArray | None:
    """Gradient of the regularized objective from instance-supplied derivatives, if any."""
    if problem.loss_grad is None or problem.violation_jac is None:
        return None
    lam = as_multipliers(lam, problem.m)
    w = np.asarray(w, dtype=np.float64)
    g = np.asarray(problem.loss_grad(w), dtype=np.float64).reshape(problem.dim)
    J = np.asarray(problem.violation_jac(w), dtype=np.float64).reshape(problem.m, problem.dim)
    return g + lam @ J


def finite_diff_grad(problem: Problem, lam: Any, w: Any, h: float | None = None) -> FloatArray:
    """Central-difference gradient of ``L + lam . C``.

    The step defaults to ``1e-6 * max(1, |w_k|)`` per coordinate.  Near a box
    face the difference becomes one-sided toward the interior.
    """
    lam = as_multipliers(lam, problem.m)
    w = as_assignment(w, problem.dim)
    if problem.space.kind != "box":
        raise ContractViolation("finite differences need a box space")
    if h is not None and not h > 0:
        raise ContractViolation("finite-difference step must be positive")
    lo = np.asarray(problem.space.lo)
    hi = np.asarray(problem.space.hi)
    d = problem.dim
    hs = np.full(d, h) if h is not None else 1e-6 * np.maximum(1.0, np.abs(w))
    plus = np.tile(w, (d, 1))
    minus = np.tile(w, (d, 1))
    for k in range(d):
        up = w[k] + hs[k] <= hi[k]
        down = w[k] - hs[k] >= lo[k]
        if up:
            plus[k, k] += hs[k]
        if down:
            minus[k, k] -= hs[k]
        if not (up or down):
            raise ContractViolation(f"box too narrow for step {hs[k]} in dimension {k}")
    f_plus = regularized_values(problem.batch_loss(plus), problem.batch_violation(plus), lam)
    f_minus = regularized_values(problem.batch_loss(minus), problem.batch_violation(minus), lam)
    denom = plus[np.arange(d), np.arange(d)] - minus[np.arange(d), np.arange(d)]
    g = (f_plus - f_minus) / denom
    if not np.all(np.isfinite(g)):
        raise EvaluationError(f"{problem.name}: non-finite finite-difference gradient at {w.tolist()}")
    return g


@dataclass(frozen=True)
class DescentConfig:
    """Projected gradient descent settings.

    Restart starting points are drawn uniformly from the box with ``seed``.
    ``analytic=False`` forces finite differences even when the instance
    supplies derivatives.
    """

    step_size: float = 0.05
    max_iters: int = 20_000
    grad_tolerance: float = 1e-9
    restarts: int = 4
    seed: int = 0
    h: float | None = None
    analytic: bool = True
    prefer: Prefer = "low_violation"

    def __post_init__(self) -> None:
        if not self.step_size > 0:
            raise ContractViolation("step_size must be > 0")
        if self.max_iters < 1:
            raise ContractViolation("max_iters must be >= 1")
        if not self.grad_tolerance > 0:
            raise ContractViolation("grad_tolerance must be > 0")
        if self.restarts < 1:
            raise ContractViolation("restarts must be >= 1")
        if self.h is not None and not self.h > 0:
            raise ContractViolation("h must be > 0")


def _descend(
    problem: Problem, lam: FloatArray, w0: FloatArray, cfg: DescentConfig
) -> tuple[FloatArray, bool, str | None]:
    lo = np.asarray(problem.space.lo)
    hi = np.asarray(problem.space.hi)
    use_analytic = cfg.analytic and problem.loss_grad is not None and problem.violation_jac is not None
    w = w0.copy()
    for _ in range(cfg.max_iters):
        if use_analytic:
            g = analytic_grad(problem, lam, w)
        else:
            g = finite_diff_grad(problem, lam, w, cfg.h)
        w_next = np.clip(w - cfg.step_size * g, lo, hi)
        if not np.all(np.isfinite(w_next)):
            return w, False, f"non-finite iterate from start {w0.tolist()}"
        moved = np.linalg.norm(w_next - w) / cfg.step_size
        w = w_next
        if moved < cfg.grad_tolerance:
            return w, True, None
    return w, False, None


def solve_pr_descent(
    problem: Problem,
    lam: Any,
    config: DescentConfig | None = None,
    init: Any | None = None,
) -> SolveResult:
    """Best-of-restarts projected gradient descent on ``L + lam . C``.

    ``init`` (optional) is tried first as a warm start, before the random
    restarts.  ``converged`` reports whether the winning run met the
    gradient tolerance.
    """
    cfg = config or DescentConfig()
    lam = as_multipliers(lam, problem.m)
    if problem.space.kind != "box":
        raise ContractViolation("descent needs a box parameter space")
    lo = np.asarray(problem.space.lo)
    hi = np.asarray(problem.space.hi)
    rng = np.random.default_rng(cfg.seed)
    starts = [lo + rng.random(problem.dim) * (hi - lo) for _ in range(cfg.restarts)]
    if init is not None:
        starts.insert(0, np.clip(as_assignment(init, problem.dim), lo, hi))

    finals: list[FloatArray] = []
    flags: list[bool] = []
    notes: list[str] = []
    for w0 in starts:
        try:
            w, ok, note = _descend(problem, lam, w0, cfg)
        except (EvaluationError, FloatingPointError) as exc:
            notes.append(f"restart from {w0.tolist()} aborted: {exc}")
            continue
        if note:
            notes.append(note)
            continue
        finals.append(w)
        flags.append(ok)
    if not finals:
        return infeasible_result(
            problem, "descent_local", status="failed", lam=lam, diagnostics=tuple(notes)
        )
    W = np.array(finals)
    L = problem.batch_loss(W)
    C = problem.batch_violation(W)
    values = regularized_values(L, C, lam)
    idx = select_best(values, C, W, cfg.prefer)
    return SolveResult(
        w=_freeze(W[idx].copy()),
        loss=float(L[idx]),
        violation=_freeze(C[idx].copy()),
        reg_objective=float(values[idx]),
        provenance="descent_local",
        converged=flags[idx],
        lam=lam,
        diagnostics=tuple(notes),
    )


Solver = Callable[..., SolveResult]


def make_solver(
    kind: Literal["grid", "descent"] | Solver = "grid",
    grid: GridSpec | None = None,
    descent: DescentConfig | None = None,
) -> Solver:
    """Bind a backend to its settings: ``solver(problem, lam, init=None)``."""
    if callable(kind):
        return kind
    if kind == "grid":
        g = grid or GridSpec()
        return lambda problem, lam, init=None: solve_pr_grid(problem, lam, g)
    if kind == "descent":
        d = descent or DescentConfig()
        return lambda problem, lam, init=None: solve_pr_descent(problem, lam, d, init)
    raise ContractViolation(f"unknown solver {kind!r}")
