"""Canonical problem library.

Closed-form 1-D and finite instances that reproduce the plateau, tie,
unattainable-optimum and vanishing-gradient phenomena, plus two tiny ML
problems regularized by an ordering hinge and a relaxed balance penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .core import ContractViolation, FloatArray, ParamSpace, Problem

__all__ = [
    "ATTAINABLE_TABLE",
    "BUNDLED",
    "Dataset",
    "InstanceSpec",
    "UNATTAINABLE_TABLE",
    "balance_penalty",
    "hinge_order_penalty",
    "instance_names",
    "make_instance",
]


class UnknownInstanceError(KeyError):
    pass


class InstanceParamError(ValueError):
    pass


def hinge_order_penalty(y: Sequence[float], i: int, j: int) -> float:
    """``max(0, y[i] - y[j])``: zero exactly when the ordering ``y[i] <= y[j]`` holds."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = y.shape[0]
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"indices ({i}, {j}) out of range for {n} outputs")
    if i == j:
        raise ContractViolation("ordering penalty needs two distinct indices")
    return float(max(0.0, y[i] - y[j]))


def balance_penalty(y: Sequence[float]) -> float:
    """``|sum(y) - n/2|`` for outputs in [0, 1] (binary labels or relaxed scores)."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size == 0:
        raise ContractViolation("balance penalty needs at least one output")
    if np.any(~np.isfinite(y)) or np.any(y < 0) or np.any(y > 1):
        raise ContractViolation("balance penalty expects outputs in [0, 1]")
    return float(abs(y.sum() - y.size / 2))


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: FloatArray
    targets: FloatArray

    def __post_init__(self) -> None:
        X = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        t = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        if X.shape[0] != t.shape[0]:
            raise ContractViolation("inputs and targets must have the same length")
        if t.shape[0] < 2:
            raise ContractViolation("a dataset needs at least two points")
        X.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", t)

    def __len__(self) -> int:
        return self.targets.shape[0]


@dataclass(frozen=True)
class InstanceSpec:
    name: str
    params: Mapping[str, Any] = field(default_factory=dict)


# Rows are (label, loss, violation).  The first row is the point under study.
ATTAINABLE_TABLE: tuple[tuple[str, float, tuple[float, ...]], ...] = (
    ("w*", 1.0, (0.5,)),
    ("a", 0.0, (1.0,)),
    ("b", 3.0, (0.0,)),
)

# "w*" is PC-optimal at theta=1, but no multiplier makes it a PR optimum.
UNATTAINABLE_TABLE: tuple[tuple[str, float, tuple[float, ...]], ...] = (
    ("w*", 1.0, (1.0,)),
    ("a", 0.0, (2.0,)),
    ("b", 1.2, (0.5,)),
)

_TABLES = {"attainable": ATTAINABLE_TABLE, "unattainable": UNATTAINABLE_TABLE}

# Fixed regression data: the least-squares fit ranks output 0 above output 1,
# so the ordering constraint y_0 <= y_1 is active.
_REGRESSION_X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
_REGRESSION_T = np.array([1.0, 0.5, 1.8, 0.4])

# Symmetric 1-D features, labels positive iff |x| > 1 (12 of 16).  A linear
# logistic model cannot exploit |x|, so the relaxed balance constraint is met
# most cheaply by pushing every score to 0.5.
_CLASSIFICATION_ABS = np.array([0.25, 0.75, 1.25, 1.75, 2.25, 2.75, 3.25, 3.75])
_CLASSIFICATION_X = np.concatenate([-_CLASSIFICATION_ABS[::-1], _CLASSIFICATION_ABS])[:, None]
_CLASSIFICATION_Y = (np.abs(_CLASSIFICATION_X[:, 0]) > 1.0).astype(np.float64)


def _col(W: FloatArray) -> FloatArray:
    return W[:, 0]


def _plateau(params: dict[str, Any]) -> Problem:
    def loss(W):
        return _col(W).copy()

    def violation(W):
        return np.maximum(0.0, 1.0 - W[:, :1])

    def loss_grad(w):
        return np.ones(1)

    def violation_jac(w):
        return np.array([[-1.0 if 1.0 - w[0] > 0 else 0.0]])

    return Problem(
        name="plateau",
        dim=1,
        space=ParamSpace.box([0.0], [2.0]),
        num_constraints=1,
        loss=loss,
        violation=violation,
        loss_grad=loss_grad,
        violation_jac=violation_jac,
        lipschitz=(1.0, (1.0,)),
        params=params,
    )


def _log_unbounded(params: dict[str, Any]) -> Problem:
    w_max = float(params.get("w_max", 1e6))
    if not (w_max > 0 and math.isfinite(w_max)):
        raise InstanceParamError("log_unbounded needs a finite w_max > 0")

    def loss(W):
        return -_col(W)

    def violation(W):
        return np.log1p(np.maximum(0.0, W[:, :1]))

    def loss_grad(w):
        return np.array([-1.0])

    def violation_jac(w):
        return np.array([[1.0 / (1.0 + w[0]) if w[0] > 0 else 0.0]])

    return Problem(
        name="log_unbounded",
        dim=1,
        space=ParamSpace.box([0.0], [w_max]),
        num_constraints=1,
        loss=loss,
        violation=violation,
        loss_grad=loss_grad,
        violation_jac=violation_jac,
        lipschitz=(1.0, (1.0,)),
        params={"w_max": w_max},
    )


def _vanishing_gradient(params: dict[str, Any]) -> Problem:
    def loss(W):
        return _col(W).copy()

    def violation(W):
        return np.exp(-W[:, :1])

    def loss_grad(w):
        return np.ones(1)

    def violation_jac(w):
        return np.array([[-math.exp(-w[0])]])

    return Problem(
        name="vanishing_gradient",
        dim=1,
        space=ParamSpace.box([0.0], [10.0]),
        num_constraints=1,
        loss=loss,
        violation=violation,
        loss_grad=loss_grad,
        violation_jac=violation_jac,
        lipschitz=(1.0, (1.0,)),
        params=params,
    )


def _table_problem(
    name: str, rows: Sequence[tuple[str, float, Sequence[float]]], params: dict[str, Any]
) -> Problem:
    if len(rows) < 1:
        raise InstanceParamError(f"{name} needs at least one table row")
    labels = [str(r[0]) for r in rows]
    losses = np.array([float(r[1]) for r in rows])
    viols = np.array([[float(c) for c in r[2]] for r in rows], dtype=np.float64)
    if viols.ndim != 2 or viols.shape[1] < 1:
        raise InstanceParamError(f"{name}: every row needs a non-empty violation vector")
    if np.any(viols < 0):
        raise InstanceParamError(f"{name}: table violations must be non-negative")
    space = ParamSpace.finite([(float(k),) for k in range(len(rows))], labels)

    def index(W: FloatArray) -> np.ndarray:
        idx = W[:, 0].astype(np.int64)
        if np.any(idx != W[:, 0]) or np.any(idx < 0) or np.any(idx >= len(rows)):
            raise ContractViolation(f"{name}: assignment is not a table element")
        return idx

    return Problem(
        name=name,
        dim=1,
        space=space,
        num_constraints=viols.shape[1],
        loss=lambda W: losses[index(W)],
        violation=lambda W: viols[index(W)],
        params=params,
        extras={"rows": [(lab, float(L), [float(c) for c in C]) for lab, L, C in zip(labels, losses, viols)]},
    )


def _two_point_tie(params: dict[str, Any]) -> Problem:
    return _table_problem("two_point_tie", [("a", 0.0, (1.0,)), ("b", 1.0, (0.0,))], params)


def _finite_table(params: dict[str, Any]) -> Problem:
    if "rows" in params:
        rows = []
        for r in params["rows"]:
            if isinstance(r, Mapping):
                rows.append((r["label"], r["loss"], tuple(np.atleast_1d(r["violation"]))))
            else:
                lab, L, C = r
                rows.append((lab, L, tuple(np.atleast_1d(C))))
        return _table_problem("finite_table", rows, dict(params))
    if "table" in params:
        key = params["table"]
        if key not in _TABLES:
            raise InstanceParamError(f"unknown preset table {key!r}; choose from {sorted(_TABLES)}")
        return _table_problem("finite_table", _TABLES[key], dict(params))
    raise InstanceParamError("finite_table requires 'rows' or a preset 'table'")


def _linear_outputs(W: FloatArray, X: FloatArray) -> FloatArray:
    # Elementwise products summed over features; avoids BLAS so single-point
    # and batch evaluations round identically.
    return (W[:, None, :] * X[None, :, :]).sum(axis=2)


def _ordered_regression(params: dict[str, Any]) -> Problem:
    i = int(params.get("i", 0))
    j = int(params.get("j", 1))
    bound = float(params.get("bound", 3.0))
    data = Dataset(_REGRESSION_X, _REGRESSION_T)
    X, t = data.inputs, data.targets
    n = len(data)
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise InstanceParamError(f"ordered_regression: bad output pair ({i}, {j})")
    diff = X[i] - X[j]

    def loss(W):
        r = _linear_outputs(W, X) - t[None, :]
        return (r * r).mean(axis=1)

    def violation(W):
        y = _linear_outputs(W, X)
        return np.maximum(0.0, y[:, i] - y[:, j])[:, None]

    def loss_grad(w):
        r = X @ w - t
        return 2.0 / n * (X.T @ r)

    def violation_jac(w):
        active = float(diff @ w) > 0
        return (diff if active else np.zeros_like(diff))[None, :]

    return Problem(
        name="ordered_regression",
        dim=2,
        space=ParamSpace.box([-bound, -bound], [bound, bound]),
        num_constraints=1,
        loss=loss,
        violation=violation,
        loss_grad=loss_grad,
        violation_jac=violation_jac,
        default_points=401,
        params={"i": i, "j": j, "bound": bound},
        extras={"dataset": data, "outputs": lambda W: _linear_outputs(np.atleast_2d(W), X)},
    )


def _sigmoid(z: FloatArray) -> FloatArray:
    # exp(-|z|) never overflows
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _balanced_classification(params: dict[str, Any]) -> Problem:
    bound = float(params.get("bound", 4.0))
    data = Dataset(_CLASSIFICATION_X, _CLASSIFICATION_Y)
    Xa = np.hstack([data.inputs, np.ones((len(data), 1))])  # slope, bias
    y = data.targets
    n = len(data)

    def scores(W):
        return _linear_outputs(W, Xa)

    def loss(W):
        z = scores(W)
        # -log p = log(1 + e^-z), -log(1 - p) = log(1 + e^z)
        return (y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)).mean(axis=1)

    def violation(W):
        p = _sigmoid(scores(W))
        return np.abs(p.sum(axis=1) - n / 2)[:, None]

    def loss_grad(w):
        p = _sigmoid(Xa @ w)
        return Xa.T @ (p - y) / n

    def violation_jac(w):
        p = _sigmoid(Xa @ w)
        s = p.sum() - n / 2
        return (np.sign(s) * (Xa.T @ (p * (1.0 - p))))[None, :]

    return Problem(
        name="balanced_classification",
        dim=2,
        space=ParamSpace.box([-bound, -bound], [bound, bound]),
        num_constraints=1,
        loss=loss,
        violation=violation,
        loss_grad=loss_grad,
        violation_jac=violation_jac,
        default_points=401,
        params={"bound": bound},
        extras={
            "dataset": data,
            "outputs": lambda W: _sigmoid(scores(np.atleast_2d(W))),
        },
    )


_BUILDERS: dict[str, tuple[Callable[[dict[str, Any]], Problem], frozenset[str]]] = {
    "plateau": (_plateau, frozenset()),
    "two_point_tie": (_two_point_tie, frozenset()),
    "log_unbounded": (_log_unbounded, frozenset({"w_max"})),
    "vanishing_gradient": (_vanishing_gradient, frozenset()),
    "finite_table": (_finite_table, frozenset({"rows", "table"})),
    "ordered_regression": (_ordered_regression, frozenset({"i", "j", "bound"})),
    "balanced_classification": (_balanced_classification, frozenset({"bound"})),
}

BUNDLED: tuple[InstanceSpec, ...] = (
    InstanceSpec("plateau"),
    InstanceSpec("two_point_tie"),
    InstanceSpec("log_unbounded"),
    InstanceSpec("vanishing_gradient"),
    InstanceSpec("finite_table", {"table": "attainable"}),
    InstanceSpec("ordered_regression"),
    InstanceSpec("balanced_classification"),
)


def instance_names() -> list[str]:
    return list(_BUILDERS)


def make_instance(spec: InstanceSpec | str, **params: Any) -> Problem:
    """Build a named instance.

    Accepts either an :class:`InstanceSpec` or a name plus keyword params.

    Params per instance: ``log_unbounded`` takes ``w_max`` (default 1e6);
    ``finite_table`` requires ``rows`` (``[(label, loss, [violations...]), ...]``)
    or ``table`` in {"attainable", "unattainable"}; ``ordered_regression`` takes
    the constrained output pair ``i``, ``j`` and the box half-width ``bound``;
    ``balanced_classification`` takes ``bound``.  The rest take none.
    """
    if isinstance(spec, InstanceSpec):
        name, merged = spec.name, {**spec.params, **params}
    else:
        name, merged = spec, dict(params)
    if name not in _BUILDERS:
        raise UnknownInstanceError(f"unknown instance {name!r}; known: {instance_names()}")
    builder, allowed = _BUILDERS[name]
    unknown = set(merged) - allowed
    if unknown:
        raise InstanceParamError(f"{name}: unknown params {sorted(unknown)}")
    return builder(merged)
