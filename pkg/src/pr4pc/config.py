"""Experiment configuration schema (JSON, validated before any computation)."""

from __future__ import annotations

from typing import Annotated, Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from .solvers import DEFAULT_BUDGET, DescentConfig, GridSpec


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


NonNegVec = list[Annotated[float, Field(ge=0)]]


class InstanceModel(_Strict):
    name: str
    params: dict[str, Any] = Field(default_factory=dict)


class GridModel(_Strict):
    points_per_dim: Optional[Union[Annotated[int, Field(ge=2)], list[Annotated[int, Field(ge=2)]]]] = None
    budget: Annotated[int, Field(ge=1)] = DEFAULT_BUDGET
    prefer: Literal["low_violation", "high_violation"] = "low_violation"
    tie_tol: Optional[Annotated[float, Field(ge=0)]] = None

    def build(self, budget: int | None = None) -> GridSpec:
        ppd = self.points_per_dim
        return GridSpec(
            points_per_dim=tuple(ppd) if isinstance(ppd, list) else ppd,
            budget=self.budget if budget is None else budget,
            prefer=self.prefer,
            tie_tol=self.tie_tol,
        )


class DescentModel(_Strict):
    step_size: Annotated[float, Field(gt=0)] = 0.05
    max_iters: Annotated[int, Field(ge=1)] = 20_000
    grad_tolerance: Annotated[float, Field(gt=0)] = 1e-9
    restarts: Annotated[int, Field(ge=1)] = 4
    seed: Optional[int] = None  # falls back to the experiment seed
    h: Optional[Annotated[float, Field(gt=0)]] = None
    analytic: bool = True
    prefer: Literal["low_violation", "high_violation"] = "low_violation"

    def build(self, seed: int) -> DescentConfig:
        data = self.model_dump()
        data["seed"] = seed if self.seed is None else self.seed
        return DescentConfig(**data)


class LogRange(_Strict):
    lo: Annotated[float, Field(gt=0)]
    hi: Annotated[float, Field(gt=0)]
    count: Annotated[int, Field(ge=1)]


class ExplicitStrategy(_Strict):
    kind: Literal["explicit_list"]
    lambdas: list[NonNegVec] = Field(min_length=1)


class LogGridStrategy(_Strict):
    kind: Literal["log_grid"]
    lo: Union[Annotated[float, Field(gt=0)], list[Annotated[float, Field(gt=0)]]]
    hi: Union[Annotated[float, Field(gt=0)], list[Annotated[float, Field(gt=0)]]]
    count: Annotated[int, Field(ge=1)]


class BinarySearchStrategy(_Strict):
    kind: Literal["binary_search"]
    lo: Annotated[float, Field(ge=0)]
    hi: Annotated[float, Field(gt=0)]
    tol: Annotated[float, Field(gt=0)] = 1e-6
    max_probes: Annotated[int, Field(ge=2)] = 200


class DualAscentStrategy(_Strict):
    kind: Literal["dual_ascent"]
    lambda0: NonNegVec
    eta: Annotated[float, Field(gt=0)]
    iters: Annotated[int, Field(ge=1)]


Strategy = Annotated[
    Union[ExplicitStrategy, LogGridStrategy, BinarySearchStrategy, DualAscentStrategy],
    Field(discriminator="kind"),
]

SolverKind = Literal["grid", "descent"]


class _Base(_Strict):
    instance: InstanceModel
    grid: GridModel = Field(default_factory=GridModel)
    descent: DescentModel = Field(default_factory=DescentModel)
    output_dir: str = "out"
    seed: int = 0
    threads: Optional[Annotated[int, Field(ge=1)]] = None


class SolvePRConfig(_Base):
    command: Literal["solve-pr"]
    lambda_: NonNegVec = Field(alias="lambda")
    solver: SolverKind = "grid"


class SolvePCConfig(_Base):
    command: Literal["solve-pc"]
    theta: NonNegVec
    feas_tol: Annotated[float, Field(ge=0)] = 0.0


class Pr4pcConfig(_Base):
    command: Literal["pr4pc"]
    theta: NonNegVec
    strategy: Strategy
    solver: SolverKind = "grid"
    warm_start: bool = False


class Theorem1Config(_Base):
    command: Literal["theorem1"]
    lambdas: Optional[list[NonNegVec]] = None
    random_count: Annotated[int, Field(ge=1)] = 20
    lambda_range: tuple[Annotated[float, Field(gt=0)], Annotated[float, Field(gt=0)]] = (1e-3, 1e3)
    tol: Annotated[float, Field(ge=0)] = 1e-9


class AttainabilityConfig(_Base):
    command: Literal["attainability"]
    w_star: Optional[Union[str, list[float]]] = None
    from_lambda: Optional[NonNegVec] = None
    from_theta: Optional[NonNegVec] = None
    j: Annotated[int, Field(ge=0)] = 0
    lambda_other: Optional[NonNegVec] = None
    lambda_grid: LogRange = Field(default_factory=lambda: LogRange(lo=1e-3, hi=1e3, count=61))
    exact: Optional[bool] = None
    tol: Annotated[float, Field(ge=0)] = 1e-9


class MonotonicityConfig(_Base):
    command: Literal["monotonicity"]
    lambdas: Optional[list[Annotated[float, Field(ge=0)]]] = None
    lambda_range: Optional[LogRange] = None
    j: Annotated[int, Field(ge=0)] = 0
    base: Optional[NonNegVec] = None
    solver: SolverKind = "grid"
    tol: Annotated[float, Field(ge=0)] = 1e-9


class SensitivityConfig(_Base):
    command: Literal["sensitivity"]
    thetas: list[Annotated[float, Field(ge=0)]] = Field(min_length=1)
    lambda_range: tuple[Annotated[float, Field(gt=0)], Annotated[float, Field(gt=0)]] = (1e-3, 1e4)
    count: Annotated[int, Field(ge=2)] = 141


class DemoConfig(_Strict):
    command: Literal["demo"]
    name: Literal["fig1a", "fig1b", "fig2a", "fig2b", "relax_pitfall"]
    output_dir: str = "out"
    seed: int = 0
    threads: Optional[Annotated[int, Field(ge=1)]] = None


ExperimentConfig = Annotated[
    Union[
        SolvePRConfig,
        SolvePCConfig,
        Pr4pcConfig,
        Theorem1Config,
        AttainabilityConfig,
        MonotonicityConfig,
        SensitivityConfig,
        DemoConfig,
    ],
    Field(discriminator="command"),
]

CONFIG_ADAPTER: TypeAdapter = TypeAdapter(ExperimentConfig)


def parse_config(data: dict[str, Any]) -> Any:
    return CONFIG_ADAPTER.validate_python(data)


def config_schema() -> dict[str, Any]:
    return CONFIG_ADAPTER.json_schema(by_alias=True)
