"""Certification tools over grid-discretized (or finite) parameter spaces.

* :func:`check_theorem1` confirms a regularized optimum is also a constrained
  optimum at the threshold equal to its own violation.
* :func:`attainability_halfspaces` builds, for a candidate constrained optimum
  ``w*``, the inequalities ``lam . dC + dL >= 0`` every multiplier must satisfy
  for ``w*`` to be a regularized optimum; :func:`multiplier_interval` and
  :func:`multiplier_region_feasible` decide whether any multiplier does.
* :func:`monotonicity_scan` and :func:`sensitivity_curve` expose how achieved
  violation responds to the multiplier.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator, Literal, Sequence

import numpy as np

from .core import (
    ContractViolation,
    FloatArray,
    Problem,
    SolveResult,
    as_assignment,
    as_multipliers,
    as_threshold,
)
from .search import Pr4pcOutcome, log_space
from .solvers import DescentConfig, GridSpec, GridTable, Solver, grid_table, make_solver, solve_pc_grid, solve_pr_grid

OPT_TOL = 1e-9
ZERO_DC = 1e-12


@dataclass(frozen=True, eq=False)
class Theorem1Check:
    holds: bool
    solution: SolveResult
    feasible_competitors: int
    counterexample: FloatArray | None = None
    counterexample_loss: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "holds": self.holds,
            "solution": self.solution.to_dict(),
            "feasible_competitors": self.feasible_competitors,
            "counterexample": None if self.counterexample is None else self.counterexample.tolist(),
            "counterexample_loss": self.counterexample_loss,
        }


def check_theorem1(
    problem: Problem, lam: Any, grid: GridSpec | None = None, tol: float = OPT_TOL
) -> Theorem1Check:
    """Solve PR on the grid, then look for a point with no larger violation and lower loss."""
    res = solve_pr_grid(problem, lam, grid)
    table = grid_table(problem, grid)
    mask = np.all(table.violation <= res.violation, axis=1)
    better = mask & (table.loss < res.loss - tol)
    if better.any():
        k = int(np.flatnonzero(better)[np.argmin(table.loss[better])])
        return Theorem1Check(False, res, int(mask.sum()), table.points[k].copy(), float(table.loss[k]))
    return Theorem1Check(True, res, int(mask.sum()))


def trace_conformance(
    problem: Problem, outcome: Pr4pcOutcome, grid: GridSpec | None = None, tol: float = OPT_TOL
) -> list[bool]:
    """Per trace entry: does PC at threshold ``C(w*)`` reach the same loss as ``w*``?

    Exact for grid-solved traces; for local solvers it is a diagnostic only.
    """
    flags = []
    for e in outcome.trace:
        if not e.result.feasible:
            flags.append(False)
            continue
        pc = solve_pc_grid(problem, e.result.violation, grid)
        flags.append(pc.feasible and abs(pc.loss - e.result.loss) <= tol)
    return flags


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """``lam . delta_c + delta_l >= 0``, contributed by ``witness``."""

    delta_c: FloatArray
    delta_l: float
    witness: FloatArray
    label: str | None = None

    def residual(self, lam: Any) -> float:
        return float(np.dot(np.asarray(lam, dtype=np.float64), self.delta_c) + self.delta_l)


@dataclass(frozen=True, eq=False)
class HalfSpaceSet:
    """All half-spaces for ``w_star`` over a grid, stored column-wise.

    ``premise_violations`` lists points with the same violation as ``w_star``
    but strictly lower loss: ``w_star`` is then not a constrained optimum at
    its own violation level and the analysis premise fails.
    """

    w_star: FloatArray
    loss_star: float
    violation_star: FloatArray
    witnesses: FloatArray
    losses: FloatArray
    violations: FloatArray
    labels: tuple[str, ...] | None
    exact: bool
    premise_violations: list[dict[str, Any]] = field(default_factory=list)

    @property
    def delta_c(self) -> FloatArray:
        return self.violations - self.violation_star

    @property
    def delta_l(self) -> FloatArray:
        return self.losses - self.loss_star

    @property
    def m(self) -> int:
        return self.violation_star.shape[0]

    @property
    def premise_ok(self) -> bool:
        return not self.premise_violations

    def __len__(self) -> int:
        return self.witnesses.shape[0]

    def __getitem__(self, k: int) -> HalfSpace:
        return HalfSpace(
            self.delta_c[k],
            float(self.delta_l[k]),
            self.witnesses[k],
            None if self.labels is None else self.labels[k],
        )

    def __iter__(self) -> Iterator[HalfSpace]:
        for k in range(len(self)):
            yield self[k]

    def residuals(self, lams: Any) -> FloatArray:
        """``(G, K)`` matrix of ``lam . dC + dL`` for ``G`` multipliers."""
        L = np.atleast_2d(np.asarray(lams, dtype=np.float64))
        return (L[:, None, :] * self.delta_c[None, :, :]).sum(axis=2) + self.delta_l[None, :]

    def satisfied_by(self, lam: Any, tol: float = OPT_TOL) -> bool:
        if len(self) == 0:
            return True
        return bool(np.all(self.residuals(lam) >= -tol))

    def exact_deltas(self) -> tuple[list[list[Fraction]], list[Fraction]]:
        """Deltas in rational arithmetic, reading each value by its shortest decimal repr."""
        q = _decimal_fraction
        c_star = [q(v) for v in self.violation_star]
        l_star = q(self.loss_star)
        dc = [[q(v) - cs for v, cs in zip(row, c_star)] for row in self.violations]
        dl = [q(v) - l_star for v in self.losses]
        return dc, dl

    def to_dict(self) -> dict[str, Any]:
        return {
            "w_star": self.w_star.tolist(),
            "loss_star": self.loss_star,
            "violation_star": self.violation_star.tolist(),
            "count": len(self),
            "halfspaces": [
                {
                    "witness": hs.witness.tolist(),
                    "label": hs.label,
                    "delta_c": hs.delta_c.tolist(),
                    "delta_l": hs.delta_l,
                }
                for hs in self
            ],
            "premise_violations": self.premise_violations,
        }


def _decimal_fraction(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def _locate(problem: Problem, table: GridTable, w_star: Any) -> int:
    if isinstance(w_star, str):
        w_star = problem.space.point(w_star)
    w = as_assignment(w_star, problem.dim)
    hits = np.flatnonzero(np.all(table.points == w, axis=1))
    if hits.size == 0:
        raise ContractViolation(f"w*={w.tolist()} is not a point of the evaluation grid")
    return int(hits[0])


def attainability_halfspaces(
    problem: Problem, w_star: Any, grid: GridSpec | None = None, tol: float = OPT_TOL
) -> HalfSpaceSet:
    """Half-spaces ``lam . (C(w) - C(w*)) + (L(w) - L(w*)) >= 0`` for every grid point.

    Points whose violation equals ``w*``'s (to 1e-12) contribute nothing; if such
    a point also has lower loss it is recorded as a premise violation.
    ``w_star`` may be a finite-space label.
    """
    table = grid_table(problem, grid)
    k = _locate(problem, table, w_star)
    dC = table.violation - table.violation[k]
    dL = table.loss - table.loss[k]
    flat = np.all(np.abs(dC) < ZERO_DC, axis=1)
    premise = [
        {
            "witness": table.points[i].tolist(),
            "label": table.labels[i] if table.labels else None,
            "delta_l": float(dL[i]),
        }
        for i in np.flatnonzero(flat & (dL < -tol))
    ]
    keep = np.flatnonzero(~flat)
    return HalfSpaceSet(
        w_star=table.points[k].copy(),
        loss_star=float(table.loss[k]),
        violation_star=table.violation[k].copy(),
        witnesses=table.points[keep],
        losses=table.loss[keep],
        violations=table.violation[keep],
        labels=tuple(table.labels[i] for i in keep) if table.labels else None,
        exact=table.provenance == "finite_enumeration",
        premise_violations=premise,
    )


@dataclass(frozen=True, eq=False)
class MultiplierInterval:
    """Range of multiplier ``j`` (others fixed) for which ``w*`` is a regularized optimum."""

    j: int
    lower: float
    upper: float
    feasible: bool
    binding_lower_witness: FloatArray | None
    binding_upper_witness: FloatArray | None
    blocking_witness: FloatArray | None = None
    lower_exact: Fraction | None = None
    upper_exact: Fraction | None = None

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.feasible and self.lower - tol <= value <= self.upper + tol

    def to_dict(self) -> dict[str, Any]:
        def vec(v):
            return None if v is None else [float(x) for x in v]

        return {
            "j": self.j,
            "lower": self.lower,
            "upper": None if np.isinf(self.upper) else self.upper,
            "upper_is_infinite": bool(np.isinf(self.upper)),
            "feasible": self.feasible,
            "binding_lower_witness": vec(self.binding_lower_witness),
            "binding_upper_witness": vec(self.binding_upper_witness),
            "blocking_witness": vec(self.blocking_witness),
            "lower_exact": None if self.lower_exact is None else str(self.lower_exact),
            "upper_exact": None if self.upper_exact is None else str(self.upper_exact),
        }


def multiplier_interval(
    halfspaces: HalfSpaceSet,
    j: int = 0,
    lambda_other: Sequence[float] | None = None,
    exact: bool | None = None,
    tol: float = OPT_TOL,
) -> MultiplierInterval:
    """Bounds on ``lam_j`` from the ratios ``R = -(dL + lam_other . dC_other) / dC_j``.

    Witnesses with ``dC_j > 0`` give lower bounds, ``dC_j < 0`` upper bounds.  A
    witness with ``dC_j = 0`` and negative residual makes the interval empty for
    every ``lam_j``.  ``exact`` (default: on for finite spaces) does the
    arithmetic in rationals, reading table values as written in decimal.
    """
    m = halfspaces.m
    if not 0 <= j < m:
        raise IndexError(f"constraint index {j} out of range for m={m}")
    others = [k for k in range(m) if k != j]
    lam_other = np.zeros(0) if lambda_other is None else np.asarray(lambda_other, dtype=np.float64).reshape(-1)
    if lam_other.shape[0] != len(others):
        raise ContractViolation(f"lambda_other needs {len(others)} entries, got {lam_other.shape[0]}")
    as_multipliers(lam_other)
    exact = halfspaces.exact if exact is None else exact
    if exact:
        return _interval_exact(halfspaces, j, others, lam_other, tol)

    dC = halfspaces.delta_c
    dCj = dC[:, j]
    rest = halfspaces.delta_l + (dC[:, others] * lam_other).sum(axis=1)
    zero = np.abs(dCj) < ZERO_DC
    blocked = np.flatnonzero(zero & (rest < -tol))
    with np.errstate(divide="ignore", invalid="ignore"):
        R = -rest / dCj
    pos = np.flatnonzero(~zero & (dCj > 0))
    neg = np.flatnonzero(~zero & (dCj < 0))
    lower, lw = 0.0, None
    if pos.size:
        k = pos[np.argmax(R[pos])]
        if R[k] > lower:
            lower, lw = float(R[k]), halfspaces.witnesses[k].copy()
    upper, uw = float("inf"), None
    if neg.size:
        k = neg[np.argmin(R[neg])]
        upper, uw = float(R[k]), halfspaces.witnesses[k].copy()
    bw = halfspaces.witnesses[blocked[0]].copy() if blocked.size else None
    return MultiplierInterval(j, lower, upper, bw is None and lower <= upper, lw, uw, bw)


def _interval_exact(
    hs: HalfSpaceSet, j: int, others: list[int], lam_other: FloatArray, tol: float
) -> MultiplierInterval:
    dc, dl = hs.exact_deltas()
    lo_other = [_decimal_fraction(v) for v in lam_other]
    lower, lw = Fraction(0), None
    upper, uw = None, None
    bw = None
    for k, (row, d_l) in enumerate(zip(dc, dl)):
        rest = d_l + sum((lo * row[o] for lo, o in zip(lo_other, others)), Fraction(0))
        a = row[j]
        if a == 0:
            if rest < 0 and bw is None:
                bw = hs.witnesses[k].copy()
            continue
        r = -rest / a
        if a > 0 and r > lower:
            lower, lw = r, hs.witnesses[k].copy()
        elif a < 0 and (upper is None or r < upper):
            upper, uw = r, hs.witnesses[k].copy()
    feasible = bw is None and (upper is None or lower <= upper)
    return MultiplierInterval(
        j,
        float(lower),
        float("inf") if upper is None else float(upper),
        feasible,
        lw,
        uw,
        bw,
        lower_exact=lower,
        upper_exact=upper,
    )


@dataclass(frozen=True, eq=False)
class RegionScan:
    feasible_points: list[FloatArray]
    any: bool
    checked: int
    interval: MultiplierInterval | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "any": self.any,
            "checked": self.checked,
            "feasible_points": [p.tolist() for p in self.feasible_points],
            "interval": None if self.interval is None else self.interval.to_dict(),
        }


def default_lambda_grid(m: int, lo: float = 1e-3, hi: float = 1e3, count: int = 61) -> FloatArray:
    axis = log_space(lo, hi, count)
    return np.array(list(itertools.product(axis, repeat=m)))


def multiplier_region_feasible(
    halfspaces: HalfSpaceSet, lambda_grid: Any | None = None, tol: float = OPT_TOL, chunk: int = 256
) -> RegionScan:
    """Grid multipliers satisfying every half-space to within ``tol``.

    An empty answer is evidence, not proof, of unattainability when ``m > 1``.
    For ``m = 1`` the closed-form interval is attached as ``interval``.
    """
    m = halfspaces.m
    lams = default_lambda_grid(m) if lambda_grid is None else np.atleast_2d(np.asarray(lambda_grid, dtype=np.float64))
    if lams.shape[1] != m:
        lams = lams.reshape(-1, m)
    if np.any(lams < 0):
        raise ContractViolation("multiplier grid must be non-negative")
    ok = np.ones(lams.shape[0], dtype=bool)
    if len(halfspaces):
        for s in range(0, lams.shape[0], chunk):
            ok[s : s + chunk] = np.all(halfspaces.residuals(lams[s : s + chunk]) >= -tol, axis=1)
    pts = [lams[i].copy() for i in np.flatnonzero(ok)]
    interval = multiplier_interval(halfspaces, 0) if m == 1 else None
    return RegionScan(pts, bool(pts), lams.shape[0], interval)


@dataclass(eq=False)
class MonotonicityReport:
    j: int
    provenance: str
    lambdas: list[float]
    violations_seq: list[float]
    pairs_checked: int = 0
    violations: list[dict[str, Any]] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict[str, Any]:
        return {
            "j": self.j,
            "provenance": self.provenance,
            "lambdas": self.lambdas,
            "violation_sequence": self.violations_seq,
            "pairs_checked": self.pairs_checked,
            "violations": self.violations,
            "monotone": self.monotone,
        }


def monotonicity_scan(
    problem: Problem,
    lambda_list: Sequence[Any],
    j: int = 0,
    solver: Literal["grid", "descent"] | Solver = "grid",
    grid: GridSpec | None = None,
    descent: DescentConfig | None = None,
    tol: float = OPT_TOL,
) -> MonotonicityReport:
    """Solve PR per multiplier and check ``lam'_j >= lam''_j  =>  C_j' <= C_j''`` for all pairs."""
    lams = [as_multipliers(np.atleast_1d(lam), problem.m) for lam in lambda_list]
    if not lams:
        raise ContractViolation("monotonicity scan needs at least one multiplier")
    others = [k for k in range(problem.m) if k != j]
    if others and any(not np.array_equal(l[others], lams[0][others]) for l in lams):
        raise ContractViolation("multipliers may differ only in component j")
    solve = make_solver(solver, grid, descent)
    results = [solve(problem, lam) for lam in lams]
    provenance = results[0].provenance
    report = MonotonicityReport(
        j, provenance, [float(l[j]) for l in lams], [float(r.violation[j]) for r in results]
    )
    for a, b in itertools.combinations(range(len(lams)), 2):
        report.pairs_checked += 1
        if not (results[a].feasible and results[b].feasible):
            continue
        hi, lo = (a, b) if lams[a][j] >= lams[b][j] else (b, a)
        ch, cl = results[hi].violation[j], results[lo].violation[j]
        if ch > cl + tol or (lams[a][j] == lams[b][j] and abs(ch - cl) > tol):
            report.violations.append(
                {
                    "lambda_high": float(lams[hi][j]),
                    "lambda_low": float(lams[lo][j]),
                    "c_high": float(ch),
                    "c_low": float(cl),
                    "provenance": results[hi].provenance,
                }
            )
    return report


@dataclass(frozen=True)
class SensitivityRow:
    theta: float
    lam: float | None
    violation: float | None

    @property
    def found(self) -> bool:
        return self.lam is not None


@dataclass(eq=False)
class SensitivityCurve:
    rows: list[SensitivityRow]
    lambda_grid: list[float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows": [{"theta": r.theta, "lambda": r.lam, "violation": r.violation} for r in self.rows],
            "lambda_grid": self.lambda_grid,
        }


def sensitivity_curve(
    problem: Problem,
    theta_list: Sequence[float],
    lambda_search_range: tuple[float, float] = (1e-3, 1e4),
    count: int = 141,
    grid: GridSpec | None = None,
) -> SensitivityCurve:
    """Smallest multiplier on a log grid whose regularized optimum has ``C <= theta``, per theta."""
    if problem.m != 1:
        raise ContractViolation("sensitivity curves are defined for a single constraint")
    thetas = [float(as_threshold([t], 1)[0]) for t in theta_list]
    if any(a < b for a, b in zip(thetas, thetas[1:])):
        raise ContractViolation("theta_list must be sorted in descending order")
    lo, hi = lambda_search_range
    if not (0 < lo < hi):
        raise ContractViolation("lambda search range must satisfy 0 < lo < hi")
    lams = log_space(lo, hi, count)
    achieved = np.array([solve_pr_grid(problem, [lam], grid).violation[0] for lam in lams])
    rows = []
    for t in thetas:
        hits = np.flatnonzero(achieved <= t)
        if hits.size:
            k = int(hits[0])
            rows.append(SensitivityRow(t, float(lams[k]), float(achieved[k])))
        else:
            rows.append(SensitivityRow(t, None, None))
    return SensitivityCurve(rows, [float(v) for v in lams])
