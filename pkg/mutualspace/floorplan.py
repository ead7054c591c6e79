"""Semantic floorplans: JSON schema, validation and per-context semantic maps."""

import enum
import json
import logging
import math
import pathlib
from typing import Dict, List, Literal, Tuple, Union

import pydantic
import shapely
from shapely.geometry import Point, Polygon

from mutualspace.geometry import PolygonSet, Pose, Point2, Segment, make_polygon, transform, unite
from mutualspace.misc import (
    AREA_EPS,
    DIST_EPS,
    FloorplanParseError,
    FloorplanValidationError,
    GeometryError,
    OutOfBoundsError,
    Y,
)

logger = logging.getLogger(__name__)

MIN_PLAN_AREA = 4.0
MAX_PLAN_AREA = 200.0


class SemanticLabel(enum.Enum):
    """Region labels. FLOOR is never stored, it is whatever the boundary has left."""

    TABLE = "table"
    WALL = "wall"
    CHAIR = "chair"
    OBSTACLE = "obstacle"
    FLOOR = "floor"


REGION_LABELS = (SemanticLabel.TABLE, SemanticLabel.WALL, SemanticLabel.CHAIR, SemanticLabel.OBSTACLE)
# Highest first, decides label_at where regions touch.
LABEL_PRIORITY = (
    SemanticLabel.WALL,
    SemanticLabel.TABLE,
    SemanticLabel.OBSTACLE,
    SemanticLabel.CHAIR,
    SemanticLabel.FLOOR,
)


class Context(enum.Enum):
    """Collaboration context picked by the host."""

    TABLE = "table"
    WALL = "wall"
    FLOOR = "floor"


class PlanKind(enum.Enum):
    HOST = "host"
    HOME = "home"
    OFFICE = "office"


class RegionModel(pydantic.BaseModel):
    """One labeled region as stored in JSON."""

    model_config = pydantic.ConfigDict(extra="forbid")

    id: str
    label: Literal["table", "wall", "chair", "obstacle"]
    polygon: List[Tuple[float, float]]


class FloorplanModel(pydantic.BaseModel):
    """Floorplan JSON schema.

    {
        "id": "meeting-room-1",
        "kind": "host" | "home" | "office",
        "boundary": [[x, y], ...],
        "regions": [{"id": "table-1", "label": "table", "polygon": [[x, y], ...]}, ...]
    }
    Units are meters, vertices counter clockwise.
    """

    model_config = pydantic.ConfigDict(extra="forbid")

    id: str
    kind: Literal["host", "home", "office"]
    boundary: List[Tuple[float, float]]
    regions: List[RegionModel] = []


class LabeledRegion(pydantic.BaseModel):
    """Region of a plan with its shapely polygon."""

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: str
    label: SemanticLabel
    shape: Polygon


class Floorplan(pydantic.BaseModel):
    """Validated floorplan."""

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: str
    kind: PlanKind
    boundary: Polygon
    regions: Tuple[LabeledRegion, ...] = ()

    def region(self, region_id: str) -> LabeledRegion:
        for region in self.regions:
            if region.id == region_id:
                return region
        raise FloorplanValidationError(f"not found in plan {self.id}", region_id)

    def regions_with(self, label: SemanticLabel) -> List[LabeledRegion]:
        return [r for r in self.regions if r.label is label]

    def layer(self, label: SemanticLabel) -> PolygonSet:
        return PolygonSet.of(*[r.shape for r in self.regions_with(label)])

    @property
    def area(self) -> float:
        return float(self.boundary.area)


def _round(value: float) -> float:
    return round(float(value), 9) + 0.0  # + 0.0 turns -0.0 into 0.0.


def _ring(poly: Polygon) -> List[Tuple[float, float]]:
    return [(_round(x), _round(y)) for x, y in list(poly.exterior.coords)[:-1]]


def validate(fp: Floorplan) -> Floorplan:
    """Enforce plan invariants, raising FloorplanValidationError naming the offending region."""
    if not MIN_PLAN_AREA <= fp.area <= MAX_PLAN_AREA:
        raise FloorplanValidationError(f"plan {fp.id} area {fp.area:.3f} m^2 outside [{MIN_PLAN_AREA}, {MAX_PLAN_AREA}]")
    seen = set()
    envelope = fp.boundary.buffer(DIST_EPS)
    for region in fp.regions:
        if region.label is SemanticLabel.FLOOR:
            raise FloorplanValidationError("floor is implicit and cannot be a region", region.id)
        if region.id in seen:
            raise FloorplanValidationError("duplicate region id", region.id)
        seen.add(region.id)
        if not envelope.covers(region.shape):
            raise FloorplanValidationError(f"lies outside the boundary of {fp.id}", region.id)
    tree = shapely.STRtree([r.shape for r in fp.regions])
    for i, region in enumerate(fp.regions):
        for j in tree.query(region.shape):
            if j <= i:
                continue
            other = fp.regions[int(j)]
            if region.shape.intersection(other.shape).area > AREA_EPS:
                raise FloorplanValidationError(f"overlaps region [{other.id}]", region.id)
    return fp


def from_model(model: FloorplanModel) -> Floorplan:
    """Convert the schema model into geometry, then validate."""
    try:
        boundary = make_polygon(model.boundary)
    except GeometryError as exc:
        raise FloorplanValidationError(f"plan {model.id} boundary invalid: {exc}") from exc
    regions = []
    for region in model.regions:
        try:
            shape = make_polygon(region.polygon)
        except GeometryError as exc:
            raise FloorplanValidationError(str(exc), region.id) from exc
        regions.append(LabeledRegion(id=region.id, label=SemanticLabel(region.label), shape=shape))
    return validate(Floorplan(id=model.id, kind=PlanKind(model.kind), boundary=boundary, regions=tuple(regions)))


def to_model(fp: Floorplan) -> FloorplanModel:
    return FloorplanModel(
        id=fp.id,
        kind=fp.kind.value,
        boundary=_ring(fp.boundary),
        regions=[RegionModel(id=r.id, label=r.label.value, polygon=_ring(r.shape)) for r in fp.regions],
    )


def loads(text: str) -> Floorplan:
    """Parse floorplan JSON text."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FloorplanParseError(f"invalid JSON: {exc}", "$") from exc
    try:
        model = FloorplanModel.model_validate(data)
    except pydantic.ValidationError as exc:
        first = exc.errors()[0]
        path = ".".join(str(part) for part in first["loc"])
        raise FloorplanParseError(first["msg"], path) from exc
    return from_model(model)


def load(source: Union[str, pathlib.Path]) -> Floorplan:
    """Load from a path, or from JSON text when given a string holding an object."""
    if isinstance(source, str) and source.lstrip().startswith("{"):
        return loads(source)
    path = pathlib.Path(source)
    if not path.is_file():
        raise FloorplanParseError(f"no such file {path}")
    logger.debug("Loading floorplan %s", path)
    return loads(path.read_text(encoding="utf-8"))


def dumps(fp: Floorplan) -> str:
    return json.dumps(to_model(fp).model_dump(), indent=2, sort_keys=True) + "\n"


def save(fp: Floorplan, path: pathlib.Path) -> pathlib.Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(fp), encoding="utf-8")
    return path


class SemanticMap(pydantic.BaseModel):
    """Per-label polygon sets of one plan under one collaboration context."""

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    plan_id: str
    context: Context
    boundary: PolygonSet
    table: PolygonSet
    wall: PolygonSet
    chair: PolygonSet
    obstacle: PolygonSet
    floor: PolygonSet
    movable_floor: PolygonSet

    @property
    def sittable(self) -> PolygonSet:
        """Chairs are user instantiable in table context only."""
        return self.chair if self.context is Context.TABLE else PolygonSet()

    def classes(self) -> Dict[str, PolygonSet]:
        """Label classes used for semantic matching; chairs merge into obstacles outside table context."""
        if self.context is Context.TABLE:
            return {
                "table": self.table,
                "wall": self.wall,
                "floor": self.floor,
                "chair": self.chair,
                "obstacle": self.obstacle,
            }
        return {
            "table": self.table,
            "wall": self.wall,
            "floor": self.floor,
            "obstacle": unite([self.obstacle, self.chair]),
        }

    def walkable(self) -> PolygonSet:
        """Where a user may stand, or sit in table context."""
        return unite([self.floor, self.sittable])

    def transformed(self, pose: Pose) -> "SemanticMap":
        return SemanticMap(
            plan_id=self.plan_id,
            context=self.context,
            boundary=transform(self.boundary, pose),
            table=transform(self.table, pose),
            wall=transform(self.wall, pose),
            chair=transform(self.chair, pose),
            obstacle=transform(self.obstacle, pose),
            floor=transform(self.floor, pose),
            movable_floor=transform(self.movable_floor, pose),
        )


def semantic_map(fp: Floorplan, context: Context) -> SemanticMap:
    """Split a plan into label layers; floor is the boundary minus every region."""
    context = Context(context)
    boundary = PolygonSet(fp.boundary)
    layers = {label: fp.layer(label) for label in REGION_LABELS}
    floor = boundary - unite(layers.values())
    chair = layers[SemanticLabel.CHAIR]
    movable = unite([floor, chair]) if context is Context.TABLE else floor
    return SemanticMap(
        plan_id=fp.id,
        context=context,
        boundary=boundary,
        table=layers[SemanticLabel.TABLE],
        wall=layers[SemanticLabel.WALL],
        chair=chair,
        obstacle=layers[SemanticLabel.OBSTACLE],
        floor=floor,
        movable_floor=movable,
    )


def label_at(smap: SemanticMap, p: Point2) -> SemanticLabel:
    """Label under a point, wall > table > obstacle > chair > floor where regions touch."""
    point = Point(p.x, p.y)
    if smap.boundary.geom.distance(point) > DIST_EPS:
        raise OutOfBoundsError(f"({p.x}, {p.y}) is outside plan {smap.plan_id}")
    layers = {
        SemanticLabel.WALL: smap.wall,
        SemanticLabel.TABLE: smap.table,
        SemanticLabel.OBSTACLE: smap.obstacle,
        SemanticLabel.CHAIR: smap.chair,
    }
    for label in LABEL_PRIORITY[:-1]:
        layer = layers[label]
        if not layer.is_empty and layer.geom.intersects(point):
            return label
    return SemanticLabel.FLOOR


class WallFace(pydantic.BaseModel):
    """Inner face of a wall region and the unit normal pointing into the room."""

    model_config = pydantic.ConfigDict(frozen=True)

    region_id: str
    face: Segment
    normal: Tuple[float, float]

    def transformed(self, pose: Pose) -> "WallFace":
        angle_cos, angle_sin = pose.affine()[0], pose.affine()[2]
        nx, ny = self.normal
        return WallFace(
            region_id=self.region_id,
            face=self.face.transformed(pose),
            normal=(angle_cos * nx - angle_sin * ny, angle_sin * nx + angle_cos * ny),
        )


def wall_face(fp: Floorplan, region_id: str) -> WallFace:
    """Long side of the wall's oriented box that faces away from the plan boundary."""
    region = fp.region(region_id)
    if region.label is not SemanticLabel.WALL:
        raise FloorplanValidationError("is not a wall", region_id)
    box = region.shape.minimum_rotated_rectangle
    corners = list(box.exterior.coords)[:4]
    edges = [(corners[i], corners[(i + 1) % 4]) for i in range(4)]
    lengths = [math.dist(a, b) for a, b in edges]
    long_pair = (0, 2) if lengths[0] + lengths[2] >= lengths[1] + lengths[3] else (1, 3)
    outline = fp.boundary.exterior

    def depth(edge: Tuple[Tuple[float, float], Tuple[float, float]]) -> float:
        (ax, ay), (bx, by) = edge
        return outline.distance(Point((ax + bx) / 2, (ay + by) / 2))

    inner, outer = sorted((edges[i] for i in long_pair), key=depth, reverse=True)
    inner_mid = ((inner[0][0] + inner[1][0]) / 2, (inner[0][1] + inner[1][1]) / 2)
    outer_mid = ((outer[0][0] + outer[1][0]) / 2, (outer[0][1] + outer[1][1]) / 2)
    nx, ny = inner_mid[0] - outer_mid[0], inner_mid[1] - outer_mid[1]
    norm = math.hypot(nx, ny)
    if norm <= AREA_EPS:
        logger.warning("%sWall %s has no thickness, normal falls back to +y", Y, region_id)
        nx, ny, norm = 0.0, 1.0, 1.0
    a, b = sorted((_round(x), _round(y)) for x, y in inner)
    return WallFace(region_id=region_id, face=Segment.of(a, b), normal=(_round(nx / norm), _round(ny / norm)))


def wall_faces(fp: Floorplan) -> List[WallFace]:
    return [wall_face(fp, r.id) for r in fp.regions_with(SemanticLabel.WALL)]
