"""Run configuration: one validated model holding every tunable, loaded from JSON and overridden by flags."""

import enum
import json
import logging
import pathlib
from typing import Any, Dict, List, Optional, Tuple

import pydantic

from mutualspace.floorplan import Context
from mutualspace.matching import ContextWeights, MatchConfig, RotationMode
from mutualspace.misc import (
    A_MIN,
    BOUNDARY_EPSILON,
    D_STEP,
    MARKER_LENGTH,
    MARKER_START,
    MARKER_STEP,
    MARKER_THICKNESS,
    PERSONAL_DIAMETER,
    SURFACE_OFFSET,
    ConfigError,
    default_out_dir,
)
from mutualspace.placement import PlacementConfig
from mutualspace.subspace import SweepConfig

logger = logging.getLogger(__name__)


class Method(enum.Enum):
    SA_TABLE = "SA-Table"
    SA_WALL = "SA-Wall"
    SA_FLOOR = "SA-Floor"
    S_ISA = "S-ISA"
    S_TI = "S-TI"

    @property
    def context(self) -> Context:
        """Collaboration context placement runs in. Both baselines stand on the floor."""
        return {
            Method.SA_TABLE: Context.TABLE,
            Method.SA_WALL: Context.WALL,
        }.get(self, Context.FLOOR)

    @property
    def weights(self) -> ContextWeights:
        return {
            Method.SA_TABLE: ContextWeights.sa_table,
            Method.SA_WALL: ContextWeights.sa_wall,
            Method.SA_FLOOR: ContextWeights.sa_floor,
        }.get(self, ContextWeights.geometric)()

    @property
    def allocates_subspaces(self) -> bool:
        return self is not Method.S_TI

    @classmethod
    def for_context(cls, context: Context) -> "Method":
        return {Context.TABLE: cls.SA_TABLE, Context.WALL: cls.SA_WALL, Context.FLOOR: cls.SA_FLOOR}[Context(context)]


class RunConfig(pydantic.BaseModel):
    """Every knob of a run. Defaults are the published constants."""

    model_config = pydantic.ConfigDict(extra="forbid", frozen=True)

    context: Optional[Context] = None
    method: Optional[Method] = None
    weights: Optional[Tuple[float, float, float, float, float]] = None
    d_step: float = pydantic.Field(default=D_STEP, gt=0, le=0.5)
    personal_diameter: float = pydantic.Field(default=PERSONAL_DIAMETER, ge=0.3)
    surface_offset: float = pydantic.Field(default=SURFACE_OFFSET, gt=0)
    marker_length: float = pydantic.Field(default=MARKER_LENGTH, ge=MARKER_LENGTH)
    marker_thickness: float = pydantic.Field(default=MARKER_THICKNESS, gt=0)
    marker_start: float = pydantic.Field(default=MARKER_START, gt=0)
    marker_step: float = pydantic.Field(default=MARKER_STEP, gt=0)
    a_min: float = pydantic.Field(default=A_MIN, ge=0)
    boundary_epsilon: float = pydantic.Field(default=BOUNDARY_EPSILON, gt=0)
    rotation_mode: RotationMode = RotationMode.QUARTER_TURNS
    population: int = pydantic.Field(default=24, ge=8)
    generations: int = pydantic.Field(default=60, ge=20)
    seed: int = 0
    n_hosts: int = pydantic.Field(default=1, ge=1, le=3)
    out: Optional[pathlib.Path] = None

    @pydantic.field_validator("weights")
    @classmethod
    def _check_weights(cls, value: Optional[Tuple[float, ...]]) -> Optional[Tuple[float, ...]]:
        if value is not None:
            ContextWeights.from_sequence(value)
        return value

    @classmethod
    def load(cls, path: pathlib.Path) -> "RunConfig":
        try:
            data = json.loads(pathlib.Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} not found") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not JSON: {exc}") from exc
        return cls.parse(data)

    @classmethod
    def parse(cls, data: Any) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except pydantic.ValidationError as exc:
            problems = "; ".join(f"{'.'.join(str(p) for p in e['loc']) or '$'}: {e['msg']}" for e in exc.errors())
            raise ConfigError(f"invalid config: {problems}") from exc

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """New config with every non None override applied and validated."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return self.parse(data)

    @property
    def out_dir(self) -> pathlib.Path:
        return self.out if self.out is not None else default_out_dir()

    def resolved_method(self) -> Method:
        if self.method is not None:
            return self.method
        return Method.for_context(self.context or Context.TABLE)

    def resolved_context(self) -> Context:
        return self.context if self.context is not None else self.resolved_method().context

    def method_weights(self, method: Optional[Method] = None) -> ContextWeights:
        if self.weights is not None:
            return ContextWeights.from_sequence(self.weights)
        return (method or self.resolved_method()).weights

    def match_config(self) -> MatchConfig:
        return MatchConfig(
            rotation_mode=self.rotation_mode,
            population=self.population,
            generations=self.generations,
            seed=self.seed,
            boundary_epsilon=self.boundary_epsilon,
        )

    def placement_config(self, n_clients: int, n_hosts: Optional[int] = None) -> PlacementConfig:
        return PlacementConfig(
            d_step=self.d_step,
            personal_diameter=self.personal_diameter,
            surface_offset=self.surface_offset,
            n_hosts=n_hosts or self.n_hosts,
            n_clients=n_clients,
        )

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(
            marker_length=self.marker_length,
            thickness=self.marker_thickness,
            start=self.marker_start,
            step=self.marker_step,
            widen_step=self.marker_step,
            a_min=self.a_min,
        )

    def dumps(self, resolved: bool = False) -> str:
        """JSON of the config. resolved adds the weights every method runs with, which the loader rejects."""
        data: Dict[str, Any] = json.loads(self.model_dump_json())
        if resolved:
            data["method_weights"] = {m.value: list(self.method_weights(m).as_tuple()) for m in Method}
        return json.dumps(data, indent=2, sort_keys=True)


def parse_methods(values: Optional[List[str]]) -> List[Method]:
    """Method names from the command line, all methods when none given."""
    if not values:
        return list(Method)
    methods = []
    for value in values:
        try:
            methods.append(Method(value))
        except ValueError as exc:
            choices = ", ".join(m.value for m in Method)
            raise ConfigError(f"unknown method {value}, pick from {choices}") from exc
    return methods
