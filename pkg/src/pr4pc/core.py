"""Problem abstraction and exact evaluation of loss, violation and the
regularized objective.

A :class:`Problem` bundles a parameter space with *batch* evaluators: the loss
maps an ``(N, d)`` array of assignments to ``(N,)`` and the violation maps it to
``(N, m)``.  Single-point helpers below wrap the batch path so that grid
oracles and point evaluations share the same arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Sequence

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

BatchFn = Callable[[FloatArray], FloatArray]
PointFn = Callable[[FloatArray], FloatArray]

Provenance = Literal["grid_global", "descent_local", "finite_enumeration"]


class ContractViolation(ValueError):
    """An argument broke a documented precondition (dimension, sign, membership)."""


class EvaluationError(ArithmeticError):
    """An evaluator produced a non-finite value."""


class InstanceDefinitionError(ValueError):
    """An instance evaluator broke a structural guarantee, e.g. negative violation."""


def as_assignment(w: Any, dim: int | None = None) -> FloatArray:
    """Coerce ``w`` to a read-only 1-D float vector, checking finiteness and size."""
    arr = np.array(w, dtype=np.float64).reshape(-1)
    if dim is not None and arr.shape[0] != dim:
        raise ContractViolation(f"assignment has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"assignment has non-finite components: {arr.tolist()}")
    arr.setflags(write=False)
    return arr


def as_multipliers(lam: Any, m: int | None = None) -> FloatArray:
    arr = np.array(lam, dtype=np.float64).reshape(-1)
    if m is not None and arr.shape[0] != m:
        raise ContractViolation(f"multiplier vector has length {arr.shape[0]}, expected {m}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"non-finite multipliers: {arr.tolist()}")
    if np.any(arr < 0):
        raise ContractViolation(f"multipliers must be non-negative, got {arr.tolist()}")
    arr.setflags(write=False)
    return arr


def as_threshold(theta: Any, m: int | None = None) -> FloatArray:
    arr = np.array(theta, dtype=np.float64).reshape(-1)
    if m is not None and arr.shape[0] != m:
        raise ContractViolation(f"threshold has length {arr.shape[0]}, expected {m}")
    if np.any(np.isnan(arr)):
        raise ContractViolation("threshold contains NaN")
    if np.any(arr < 0):
        raise ContractViolation(f"thresholds must be non-negative, got {arr.tolist()}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ParamSpace:
    """Either a closed box or an explicit finite list of assignments.

    Finite spaces may carry a label per point (``"a"``, ``"b"``, ...), which is
    how table instances name their elements.
    """

    kind: Literal["box", "finite"]
    lo: tuple[float, ...] = ()
    hi: tuple[float, ...] = ()
    points: tuple[tuple[float, ...], ...] = ()
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "box":
            if len(self.lo) != len(self.hi) or not self.lo:
                raise ContractViolation("box bounds must be non-empty and of equal length")
            for k, (a, b) in enumerate(zip(self.lo, self.hi)):
                if not (np.isfinite(a) and np.isfinite(b)) or a > b:
                    raise ContractViolation(f"invalid box interval [{a}, {b}] in dimension {k}")
        elif self.kind == "finite":
            if not self.points:
                raise ContractViolation("finite space must be non-empty")
            d = len(self.points[0])
            if any(len(p) != d for p in self.points):
                raise ContractViolation("finite space points must share one dimension")
            if self.labels and len(self.labels) != len(self.points):
                raise ContractViolation("one label per finite point is required")
            if self.labels and len(set(self.labels)) != len(self.labels):
                raise ContractViolation("finite point labels must be unique")
        else:
            raise ContractViolation(f"unknown space kind {self.kind!r}")

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]) -> "ParamSpace":
        return cls("box", lo=tuple(float(v) for v in lo), hi=tuple(float(v) for v in hi))

    @classmethod
    def finite(
        cls, points: Sequence[Sequence[float]], labels: Sequence[str] | None = None
    ) -> "ParamSpace":
        pts = tuple(tuple(float(v) for v in p) for p in points)
        return cls("finite", points=pts, labels=tuple(labels or ()))

    @property
    def dim(self) -> int:
        return len(self.lo) if self.kind == "box" else len(self.points[0])

    def contains(self, w: FloatArray) -> bool:
        if self.kind == "box":
            return bool(np.all(w >= np.asarray(self.lo)) and np.all(w <= np.asarray(self.hi)))
        return tuple(float(v) for v in w) in self._point_index

    def point(self, label: str) -> FloatArray:
        """Return the finite point carrying ``label``."""
        try:
            idx = self.labels.index(label)
        except ValueError:
            raise KeyError(f"no point labelled {label!r}; known: {list(self.labels)}") from None
        return as_assignment(self.points[idx])

    def label_of(self, w: FloatArray) -> str | None:
        if self.kind != "finite" or not self.labels:
            return None
        idx = self._point_index.get(tuple(float(v) for v in w))
        return None if idx is None else self.labels[idx]

    @property
    def _point_index(self) -> dict[tuple[float, ...], int]:
        cache = self.__dict__.get("_index_cache")
        if cache is None:
            cache = {p: i for i, p in enumerate(self.points)}
            object.__setattr__(self, "_index_cache", cache)
        return cache


@dataclass(frozen=True, eq=False)
class Problem:
    """A constrained training problem: minimize loss subject to violation <= threshold.

    ``loss`` and ``violation`` are batch evaluators over ``(N, d)`` arrays.
    ``loss_grad``/``violation_jac`` are optional analytic derivatives at a single
    point, returning ``(d,)`` and ``(m, d)``.  ``lipschitz`` holds
    ``(loss_constant, per_constraint_constants)`` when known.
    """

    name: str
    dim: int
    space: ParamSpace
    num_constraints: int
    loss: BatchFn
    violation: BatchFn
    loss_grad: PointFn | None = None
    violation_jac: PointFn | None = None
    lipschitz: tuple[float, tuple[float, ...]] | None = None
    default_points: int | tuple[int, ...] = 2001
    params: dict[str, Any] = field(default_factory=dict)
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ContractViolation("problem dimension must be >= 1")
        if self.num_constraints < 1:
            raise ContractViolation("problem needs at least one constraint")
        if self.space.dim != self.dim:
            raise ContractViolation(
                f"space dimension {self.space.dim} does not match problem dimension {self.dim}"
            )

    @property
    def m(self) -> int:
        return self.num_constraints

    def batch_loss(self, W: FloatArray) -> FloatArray:
        out = np.asarray(self.loss(W), dtype=np.float64).reshape(W.shape[0])
        if not np.all(np.isfinite(out)):
            bad = W[~np.isfinite(out)][0]
            raise EvaluationError(f"{self.name}: non-finite loss at w={bad.tolist()}")
        return out

    def batch_violation(self, W: FloatArray) -> FloatArray:
        out = np.asarray(self.violation(W), dtype=np.float64).reshape(W.shape[0], self.m)
        if not np.all(np.isfinite(out)):
            bad = W[~np.all(np.isfinite(out), axis=1)][0]
            raise EvaluationError(f"{self.name}: non-finite violation at w={bad.tolist()}")
        if np.any(out < 0):
            bad = W[np.any(out < 0, axis=1)][0]
            raise InstanceDefinitionError(
                f"{self.name}: negative constraint violation at w={bad.tolist()}"
            )
        return out


def _checked_point(problem: Problem, w: Any) -> FloatArray:
    arr = as_assignment(w, problem.dim)
    if not problem.space.contains(arr):
        raise ContractViolation(f"w={arr.tolist()} is outside the parameter space of {problem.name}")
    return arr


def regularized_values(loss: FloatArray, violation: FloatArray, lam: FloatArray) -> FloatArray:
    """Batch ``loss + violation @ lam``, written elementwise so m=1 is an exact product."""
    return loss + (violation * lam).sum(axis=-1)


def eval_loss(problem: Problem, w: Any) -> float:
    arr = _checked_point(problem, w)
    return float(problem.batch_loss(arr[None, :])[0])


def eval_violation(problem: Problem, w: Any) -> FloatArray:
    arr = _checked_point(problem, w)
    out = problem.batch_violation(arr[None, :])[0].copy()
    out.setflags(write=False)
    return out


def eval_regularized(problem: Problem, w: Any, lam: Any) -> float:
    lam_arr = as_multipliers(lam, problem.m)
    arr = _checked_point(problem, w)
    L = problem.batch_loss(arr[None, :])
    C = problem.batch_violation(arr[None, :])
    return float(regularized_values(L, C, lam_arr)[0])


def is_feasible(problem: Problem, w: Any, theta: Any) -> bool:
    th = as_threshold(theta, problem.m)
    return bool(np.all(eval_violation(problem, w) <= th))


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Outcome of one PR or PC solve.

    ``status`` is ``"infeasible"`` only for constrained solves with an empty
    feasible set; then ``w`` is ``None`` and the numeric fields are NaN.
    """

    w: FloatArray | None
    loss: float
    violation: FloatArray
    reg_objective: float
    provenance: Provenance
    converged: bool = True
    lam: FloatArray | None = None
    theta: FloatArray | None = None
    status: Literal["optimal", "infeasible", "failed"] = "optimal"
    label: str | None = None
    diagnostics: tuple[str, ...] = ()

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"

    def to_dict(self) -> dict[str, Any]:
        def vec(v: FloatArray | None) -> list[float] | None:
            return None if v is None else [float(x) for x in v]

        return {
            "w": vec(self.w),
            "label": self.label,
            "loss": _finite_or_none(self.loss),
            "violation": [_finite_or_none(x) for x in self.violation],
            "reg_objective": _finite_or_none(self.reg_objective),
            "lambda": vec(self.lam),
            "theta": vec(self.theta),
            "provenance": self.provenance,
            "converged": self.converged,
            "status": self.status,
            "diagnostics": list(self.diagnostics),
        }


def _finite_or_none(x: float) -> float | None:
    x = float(x)
    return x if np.isfinite(x) else None


def infeasible_result(problem: Problem, provenance: Provenance, **kw: Any) -> SolveResult:
    nan_vec = np.full(problem.m, np.nan)
    nan_vec.setflags(write=False)
    return SolveResult(
        w=None,
        loss=float("nan"),
        violation=nan_vec,
        reg_objective=float("nan"),
        provenance=provenance,
        converged=False,
        status=kw.pop("status", "infeasible"),
        **kw,
    )
