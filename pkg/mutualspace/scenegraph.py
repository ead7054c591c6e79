"""Scene graphs centered on interaction targets, and picking the client target that best mirrors the host's."""

import enum
import logging
import math
from typing import List, Optional, Tuple

import networkx as nx
import pydantic
from shapely.geometry import Polygon

from mutualspace.floorplan import Context, Floorplan, LabeledRegion, SemanticLabel, semantic_map, wall_face
from mutualspace.geometry import PolygonSet
from mutualspace.misc import C, FloorplanValidationError, TargetNotFoundError

logger = logging.getLogger(__name__)

PERSONAL_AREA = 0.6  # Neighbors farther than this from the center object are not part of its graph.
WALL_BAND_DEPTH = 1.0
MOVABLE_FLOOR_ID = "movable-floor"
QUARTER_TURNS = (0, 1, 2, 3)


class Affordance(enum.Enum):
    SITTABLE = "sittable"
    OBSTACLE = "obstacle"
    SURFACE = "surface"


class Direction(enum.Enum):
    """Clockwise order, also the tie break order."""

    N = "N"
    E = "E"
    S = "S"
    W = "W"


DIRECTIONS = list(Direction)


def affordance_of(label: SemanticLabel) -> Affordance:
    if label is SemanticLabel.CHAIR:
        return Affordance.SITTABLE
    if label in (SemanticLabel.TABLE, SemanticLabel.WALL):
        return Affordance.SURFACE
    return Affordance.OBSTACLE


def direction_of(dx: float, dy: float) -> Direction:
    """Dominant axis of a displacement, 45 degree sectors, ties go N, E, S, W."""
    scores = [dy, dx, -dy, -dx]
    return DIRECTIONS[max(range(4), key=lambda i: scores[i])]


def rotate_direction(direction: Direction, quarter_turns: int) -> Direction:
    """Direction after rotating the scene counter clockwise by quarter_turns (N becomes W)."""
    return DIRECTIONS[(DIRECTIONS.index(direction) - quarter_turns) % 4]


class OrientedBox(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    center: Tuple[float, float]
    half_extents: Tuple[float, float]
    angle: float


def oriented_box(shape: Polygon) -> OrientedBox:
    box = shape.minimum_rotated_rectangle
    corners = list(box.exterior.coords)[:4]
    (x0, y0), (x1, y1), (x2, y2) = corners[0], corners[1], corners[2]
    center = box.centroid
    return OrientedBox(
        center=(center.x, center.y),
        half_extents=(math.hypot(x1 - x0, y1 - y0) / 2, math.hypot(x2 - x1, y2 - y1) / 2),
        angle=math.atan2(y1 - y0, x1 - x0),
    )


class ObjectNode(pydantic.BaseModel):
    """Scene graph node: one region with its affordance and bounding box."""

    model_config = pydantic.ConfigDict(frozen=True)

    region_id: str
    label: SemanticLabel
    affordance: Affordance
    obb: OrientedBox

    @classmethod
    def from_region(cls, region: LabeledRegion) -> "ObjectNode":
        return cls(
            region_id=region.id,
            label=region.label,
            affordance=affordance_of(region.label),
            obb=oriented_box(region.shape),
        )


class GraphEdge(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    source: str
    target: str
    direction: Direction
    gap: float


class SceneGraph(object):
    """Star shaped directed graph: the center object points at every nearby chair or obstacle."""

    def __init__(self, graph: nx.DiGraph, center: str) -> None:
        self.graph = graph
        self.center_id = center

    @property
    def center(self) -> ObjectNode:
        return self.graph.nodes[self.center_id]["node"]

    @property
    def neighbors(self) -> List[GraphEdge]:
        edges = [
            GraphEdge(source=u, target=v, direction=data["direction"], gap=data["gap"])
            for u, v, data in self.graph.out_edges(self.center_id, data=True)
        ]
        return sorted(edges, key=lambda e: (DIRECTIONS.index(e.direction), e.target))

    def dominant(self, direction: Direction) -> Optional[Affordance]:
        """Most frequent neighbor affordance in a direction, sittable wins ties, None when empty."""
        counts = {Affordance.SITTABLE: 0, Affordance.OBSTACLE: 0}
        for _, v, data in self.graph.out_edges(self.center_id, data=True):
            if data["direction"] is direction:
                affordance = self.graph.nodes[v]["node"].affordance
                counts[affordance] = counts.get(affordance, 0) + 1
        if not counts[Affordance.SITTABLE] and not counts[Affordance.OBSTACLE]:
            return None
        if counts[Affordance.SITTABLE] >= counts[Affordance.OBSTACLE]:
            return Affordance.SITTABLE
        return Affordance.OBSTACLE

    def rotated(self, quarter_turns: int) -> "SceneGraph":
        graph = self.graph.copy()
        for _, _, data in graph.edges(data=True):
            data["direction"] = rotate_direction(data["direction"], quarter_turns)
        return SceneGraph(graph, self.center_id)

    def __str__(self) -> str:
        parts = [f"{e.direction.value}:{e.target}({e.gap:.2f})" for e in self.neighbors]
        return f"{self.center_id} -> [{', '.join(parts)}]"


def build_graph(fp: Floorplan, center_region: str) -> SceneGraph:
    """Graph of every chair/obstacle within the personal area distance of the center table or wall."""
    center = fp.region(center_region)
    if center.label not in (SemanticLabel.TABLE, SemanticLabel.WALL):
        raise FloorplanValidationError("scene graph center must be a table or a wall", center_region)
    graph = nx.DiGraph()
    center_node = ObjectNode.from_region(center)
    graph.add_node(center.id, node=center_node)
    cx, cy = center_node.obb.center
    for region in fp.regions:
        if region.id == center.id or region.label not in (SemanticLabel.CHAIR, SemanticLabel.OBSTACLE):
            continue
        gap = float(center.shape.distance(region.shape))
        if gap > PERSONAL_AREA + 1e-9:
            continue
        node = ObjectNode.from_region(region)
        nx_, ny_ = node.obb.center
        graph.add_node(region.id, node=node)
        graph.add_edge(center.id, region.id, direction=direction_of(nx_ - cx, ny_ - cy), gap=gap)
    return SceneGraph(graph, center.id)


def match_score(host_g: SceneGraph, client_g: SceneGraph) -> float:
    """Quarter point for every direction whose dominant affordance agrees, no neighbors counts as agreement."""
    return sum(0.25 for d in DIRECTIONS if host_g.dominant(d) == client_g.dominant(d))


class TargetSelection(pydantic.BaseModel):
    """Chosen target object of one plan and the quarter turn (degrees) that lines it up."""

    model_config = pydantic.ConfigDict(frozen=True)

    region_id: str
    rotation: int = 0
    score: float = 1.0

    @pydantic.field_validator("rotation")
    @classmethod
    def _quarter_turn(cls, value: int) -> int:
        if value not in (0, 90, 180, 270):
            raise ValueError(f"rotation must be a quarter turn, got {value}")
        return value

    @property
    def quarter_turns(self) -> int:
        return self.rotation // 90


class TargetPair(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    context: Context
    host: TargetSelection
    client: TargetSelection


def _largest(regions: List[LabeledRegion]) -> LabeledRegion:
    return sorted(regions, key=lambda r: (-r.shape.area, r.id))[0]


def _host_region(fp: Floorplan, label: SemanticLabel, region_id: str) -> LabeledRegion:
    try:
        region = fp.region(region_id)
    except FloorplanValidationError as exc:
        raise TargetNotFoundError(f"host target {region_id} not in {fp.id}") from exc
    if region.label is not label:
        raise TargetNotFoundError(f"host target {region_id} is a {region.label.value}, not a {label.value}")
    return region


def wall_band(fp: Floorplan, region_id: str, depth: float = WALL_BAND_DEPTH) -> Polygon:
    """Rectangle of the given depth in front of a wall's inner face, clipped to the plan."""
    face = wall_face(fp, region_id)
    (ax, ay), (bx, by) = face.face.a.as_tuple(), face.face.b.as_tuple()
    nx_, ny_ = face.normal
    band = Polygon([(ax, ay), (bx, by), (bx + nx_ * depth, by + ny_ * depth), (ax + nx_ * depth, ay + ny_ * depth)])
    return band.buffer(0).intersection(fp.boundary)


def wall_free_floor(fp: Floorplan, region_id: str, floor: Optional[PolygonSet] = None) -> float:
    """Free floor area inside the band in front of a wall."""
    if floor is None:
        floor = semantic_map(fp, Context.WALL).floor
    return float(floor.geom.intersection(wall_band(fp, region_id)).area)


def _best_wall(fp: Floorplan) -> Tuple[LabeledRegion, float]:
    walls = fp.regions_with(SemanticLabel.WALL)
    if not walls:
        raise TargetNotFoundError(f"{fp.id} has no wall")
    floor = semantic_map(fp, Context.WALL).floor
    scored = [(wall_free_floor(fp, w.id, floor), w) for w in walls]
    free, wall = sorted(scored, key=lambda item: (-item[0], -item[1].shape.area, item[1].id))[0]
    return wall, free


def _wall_score(fp: Floorplan, region_id: str, free: float) -> float:
    band_area = wall_band(fp, region_id).area
    return min(1.0, free / band_area) if band_area > 0 else 0.0


def _normal_rotation(host_normal: Tuple[float, float], client_normal: Tuple[float, float]) -> int:
    """Quarter turn bringing the client normal closest to the host normal."""
    target = math.atan2(host_normal[1], host_normal[0])
    start = math.atan2(client_normal[1], client_normal[0])
    diff = (target - start) % (2 * math.pi)
    return int(round(diff / (math.pi / 2))) % 4


def select_target(
    host_fp: Floorplan,
    client_fp: Floorplan,
    context: Context,
    host_target_id: Optional[str] = None,
) -> TargetPair:
    """Pick the host's and the client's interaction target for a context.

    Table: the host designates a table (largest when not given); every client table is scored against it under the
    four quarter turns. Wall: the wall with the widest free floor band in front wins on both sides. Floor: the
    movable floor itself.
    """
    context = Context(context)
    if context is Context.FLOOR:
        selection = TargetSelection(region_id=MOVABLE_FLOOR_ID)
        return TargetPair(context=context, host=selection, client=selection)

    if context is Context.WALL:
        if host_target_id:
            host_wall = _host_region(host_fp, SemanticLabel.WALL, host_target_id)
            host_free = wall_free_floor(host_fp, host_wall.id)
        else:
            host_wall, host_free = _best_wall(host_fp)
        client_wall, client_free = _best_wall(client_fp)
        rotation = _normal_rotation(wall_face(host_fp, host_wall.id).normal, wall_face(client_fp, client_wall.id).normal)
        logger.debug("%sWall targets %s / %s, rotation %s", C, host_wall.id, client_wall.id, rotation * 90)
        return TargetPair(
            context=context,
            host=TargetSelection(region_id=host_wall.id, score=_wall_score(host_fp, host_wall.id, host_free)),
            client=TargetSelection(
                region_id=client_wall.id,
                rotation=rotation * 90,
                score=_wall_score(client_fp, client_wall.id, client_free),
            ),
        )

    host_tables = host_fp.regions_with(SemanticLabel.TABLE)
    if host_target_id:
        host_table = _host_region(host_fp, SemanticLabel.TABLE, host_target_id)
    elif host_tables:
        host_table = _largest(host_tables)
    else:
        raise TargetNotFoundError(f"host {host_fp.id} has no table")
    client_tables = client_fp.regions_with(SemanticLabel.TABLE)
    if not client_tables:
        raise TargetNotFoundError(f"client {client_fp.id} has no table")
    host_g = build_graph(host_fp, host_table.id)
    candidates = []
    for table in client_tables:
        client_g = build_graph(client_fp, table.id)
        for turns in QUARTER_TURNS:
            score = match_score(host_g, client_g.rotated(turns))
            candidates.append((-score, -table.shape.area, table.id, turns, score))
    _, _, table_id, turns, score = sorted(candidates)[0]
    logger.debug("%sTable targets %s / %s, rotation %s, score %.2f", C, host_table.id, table_id, turns * 90, score)
    return TargetPair(
        context=context,
        host=TargetSelection(region_id=host_table.id),
        client=TargetSelection(region_id=table_id, rotation=turns * 90, score=score),
    )
