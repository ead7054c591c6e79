"""Interactable subspace extraction by marker sweeps, allocation into the host plan and the mutual space record."""

import enum
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import pydantic
import shapely
from shapely import ops
from shapely.geometry import LineString, MultiLineString, Polygon, box

from mutualspace.floorplan import Context, FloorplanModel
from mutualspace.geometry import PolygonSet, PolygonSetField, Point2, Pose, Segment, transform, transform_geometry, unite
from mutualspace.matching import MatchedSpace, MatchResult
from mutualspace.misc import (
    A_MIN,
    AREA_EPS,
    DIST_EPS,
    MARKER_LENGTH,
    MARKER_START,
    MARKER_STEP,
    MARKER_THICKNESS,
    OVERLAP_EPS,
    PERSONAL_DIAMETER,
    C,
)

logger = logging.getLogger(__name__)

WALL_GAP = 1e-3  # Edges closer than this to the target zone stay open.
MAX_WIDENINGS = 100


class Side(enum.Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"


class SweepConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    marker_length: float = pydantic.Field(default=MARKER_LENGTH, ge=MARKER_LENGTH)
    thickness: float = pydantic.Field(default=MARKER_THICKNESS, gt=0)
    start: float = pydantic.Field(default=MARKER_START, gt=0)
    step: float = pydantic.Field(default=MARKER_STEP, gt=0)
    widen_step: float = pydantic.Field(default=MARKER_STEP, gt=0)
    a_min: float = pydantic.Field(default=A_MIN, ge=0)
    unmatched_tolerance: float = pydantic.Field(default=0.05, ge=0)


class MarkerSweep(pydantic.BaseModel):
    """Final state of one marker. The rectangle side sits at start + travel from the user."""

    model_config = pydantic.ConfigDict(frozen=True)

    side: Side
    length: float
    thickness: float = MARKER_THICKNESS
    start: float = MARKER_START
    step: float = MARKER_STEP
    travel: float = 0.0

    @property
    def extent(self) -> float:
        return self.start + self.travel


class Subspace(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    owner: str
    position: Point2
    region: PolygonSetField
    interactable_area: float
    obstacle_area: float
    sweeps: List[MarkerSweep] = []


class _LocalFrame(object):
    """Client frame centered on the user, so markers move along the axes."""

    def __init__(self, position: Point2, theta: float) -> None:
        self.to_local = Pose.about(position.as_tuple(), -theta, (0.0, 0.0))
        self.to_host = Pose.about((0.0, 0.0), theta, position.as_tuple())


def _marker(side: Side, travel: float, length: float, cfg: SweepConfig) -> Polygon:
    """Marker strip in the local frame: thickness deep, its outer edge at start + travel."""
    outer = cfg.start + travel
    inner = outer - cfg.thickness
    half = length / 2
    if side is Side.RIGHT:
        return box(inner, -half, outer, half)
    if side is Side.LEFT:
        return box(-outer, -half, -inner, half)
    if side is Side.UP:
        return box(-half, inner, half, outer)
    return box(-half, -outer, half, -inner)


def _rect(extents: Dict[Side, float]) -> Polygon:
    return box(-extents[Side.LEFT], -extents[Side.DOWN], extents[Side.RIGHT], extents[Side.UP])


def _blocked(marker: Polygon, footprint, unmatched) -> bool:
    if marker.difference(footprint).area > OVERLAP_EPS:
        return True
    return unmatched is not None and marker.intersection(unmatched).area > OVERLAP_EPS


def sweep(side: Side, length: float, footprint, unmatched, cfg: SweepConfig, limit: float) -> MarkerSweep:
    """Advance one marker in steps until the next step leaves the footprint or hits unmatched area."""
    steps = 0
    while (steps + 1) * cfg.step <= limit:
        if _blocked(_marker(side, (steps + 1) * cfg.step, length, cfg), footprint, unmatched):
            break
        steps += 1
    return MarkerSweep(
        side=side,
        length=length,
        thickness=cfg.thickness,
        start=cfg.start,
        step=cfg.step,
        travel=round(steps * cfg.step, 9),
    )


def _retract(sweeps: Dict[Side, MarkerSweep], footprint, unmatched, cfg: SweepConfig) -> Dict[Side, MarkerSweep]:
    """Pull back the side whose outer strip holds the most unmatched area until the interior is clean enough."""
    if unmatched is None:
        return sweeps
    sweeps = dict(sweeps)
    while True:
        extents = {side: s.extent for side, s in sweeps.items()}
        region = _rect(extents).intersection(footprint)
        if region.intersection(unmatched).area <= cfg.unmatched_tolerance:
            return sweeps
        worst: Optional[Tuple[float, Side]] = None
        for side in Side:
            if sweeps[side].travel <= 0:
                continue
            strip = _rect(extents).difference(_rect({**extents, side: extents[side] - cfg.step}))
            dirty = strip.intersection(unmatched).area
            if worst is None or dirty > worst[0]:
                worst = (dirty, side)
        if worst is None:
            return sweeps
        side = worst[1]
        sweeps[side] = sweeps[side].model_copy(update={"travel": round(max(0.0, sweeps[side].travel - cfg.step), 9)})


def _measure(region: PolygonSet, match: MatchedSpace) -> Tuple[float, float]:
    obstacle = (region & match.obstacle).area
    return max(0.0, region.area - obstacle), obstacle


def _extract_at(match: MatchedSpace, position: Point2, length: float, cfg: SweepConfig, owner: str) -> Subspace:
    frame = _LocalFrame(position, match.pose.theta)
    footprint = transform_geometry(match.footprint.geom, frame.to_local)
    unmatched = None if match.unmatched.is_empty else transform_geometry(match.unmatched.geom, frame.to_local)
    shapely.prepare(footprint)
    minx, miny, maxx, maxy = footprint.bounds
    limit = max(abs(minx), abs(miny), abs(maxx), abs(maxy)) + cfg.step
    sweeps = {side: sweep(side, length, footprint, unmatched, cfg, limit) for side in Side}
    sweeps = _retract(sweeps, footprint, unmatched, cfg)
    local = PolygonSet(_rect({side: s.extent for side, s in sweeps.items()})) & PolygonSet(footprint)
    region = transform(local, frame.to_host)
    interactable, obstacle = _measure(region, match)
    return Subspace(
        owner=owner,
        position=position,
        region=region,
        interactable_area=interactable,
        obstacle_area=obstacle,
        sweeps=[sweeps[side] for side in Side],
    )


def extract_subspace(match: MatchedSpace, position: Point2, cfg: Optional[SweepConfig] = None, owner: str = "") -> Subspace:
    """Subspace of one client from four marker sweeps around the user's position.

    When the first result already has A_min of interactable area the markers are widened step by step up to the
    footprint diagonal, keeping the result with the least obstacle area among those that still have A_min.
    """
    cfg = cfg or SweepConfig()
    owner = owner or f"C{match.client_index + 1}"
    best = _extract_at(match, position, cfg.marker_length, cfg, owner)
    if best.interactable_area < cfg.a_min:
        return best
    minx, miny, maxx, maxy = match.footprint.bounds
    widest = math.hypot(maxx - minx, maxy - miny)
    length = cfg.marker_length
    for _ in range(MAX_WIDENINGS):
        length = round(length + cfg.widen_step, 9)
        if length > widest:
            break
        candidate = _extract_at(match, position, length, cfg, owner)
        if candidate.interactable_area < cfg.a_min:
            continue
        if candidate.obstacle_area < best.obstacle_area - AREA_EPS:
            best = candidate
    logger.debug(
        "%s%s subspace %.2f m^2 interactable, %.2f m^2 obstacle, marker %.1f m",
        C,
        owner,
        best.interactable_area,
        best.obstacle_area,
        best.sweeps[0].length,
    )
    return best


def personal_square(position: Point2, theta: float, size: float = PERSONAL_DIAMETER) -> Polygon:
    """Square of the personal size centered on a user, in the client's rotation frame."""
    frame = _LocalFrame(position, theta)
    half = size / 2
    return transform_geometry(box(-half, -half, half, half), frame.to_host)


def _segments(lines) -> List[Segment]:
    if lines.is_empty:
        return []
    merged = ops.linemerge(lines) if isinstance(lines, MultiLineString) else lines
    parts = merged.geoms if hasattr(merged, "geoms") else [merged]
    segments: List[Segment] = []
    for part in parts:
        if not isinstance(part, LineString):
            continue
        coords = list(part.coords)
        for a, b in zip(coords[:-1], coords[1:]):
            if math.dist(a, b) > DIST_EPS:
                segments.append(Segment.of(a, b))
    return segments


def boundary_walls(region: PolygonSet, target_zone: Optional[PolygonSet] = None) -> List[Segment]:
    """Outline of a subspace as segments, minus the edges running along the target zone."""
    if region.is_empty:
        return []
    outline = region.geom.boundary
    if target_zone is not None and not target_zone.is_empty:
        outline = outline.difference(target_zone.geom.buffer(WALL_GAP))
    return _segments(outline)


class ClientSpace(pydantic.BaseModel):
    """One client laid over the host: pose, footprint, matching and its subspace and walls."""

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    owner: str
    plan_id: str
    pose: Pose
    objective: Optional[float] = None
    boundary: PolygonSetField
    matched: Dict[str, PolygonSetField] = {}
    unmatched: PolygonSetField = PolygonSet()
    subspace: Optional[Subspace] = None
    walls: List[Segment] = []

    @classmethod
    def of(cls, owner: str, match: MatchedSpace, result: Optional[MatchResult] = None) -> "ClientSpace":
        return cls(
            owner=owner,
            plan_id=match.plan_id,
            pose=match.pose,
            objective=result.objective if result is not None else None,
            boundary=match.moved.boundary,
            matched=dict(match.matched),
            unmatched=match.unmatched,
        )


class MutualSpace(pydantic.BaseModel):
    """Everything needed to inspect or render one host/clients run, JSON serializable."""

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    method: str = ""
    context: Context
    host: FloorplanModel
    host_target: str = ""
    clients: List[ClientSpace] = []
    positions: Dict[str, Point2] = {}
    shared_region: Optional[PolygonSetField] = None
    shared_obstacle: Optional[PolygonSetField] = None
    success: bool = False
    failure: Optional[str] = None

    def subspaces(self) -> List[Subspace]:
        return [c.subspace for c in self.clients if c.subspace is not None]

    def walls(self) -> List[Segment]:
        return [wall for c in self.clients for wall in c.walls]

    def dumps(self) -> str:
        return self.model_dump_json(indent=2)


def allocate(
    host: FloorplanModel,
    context: Context,
    clients: Sequence[ClientSpace],
    subspaces: Sequence[Subspace],
    target_zone: Optional[PolygonSet] = None,
    positions: Optional[Dict[str, Point2]] = None,
    method: str = "",
    host_target: str = "",
) -> MutualSpace:
    """Attach each subspace to its client and draw walls along its outline, open towards the target zone."""
    by_owner = {s.owner: s for s in subspaces}
    placed: List[ClientSpace] = []
    for client in clients:
        sub = by_owner.get(client.owner)
        walls = boundary_walls(sub.region, target_zone) if sub is not None else []
        placed.append(client.model_copy(update={"subspace": sub, "walls": walls}))
    return MutualSpace(
        method=method,
        context=Context(context),
        host=host,
        host_target=host_target,
        clients=placed,
        positions=dict(positions or {}),
        success=True,
    )


def total_interactable(space: MutualSpace) -> float:
    """Area of the union of every client's interactable subspace part."""
    parts = []
    for client in space.clients:
        if client.subspace is None:
            continue
        obstacle = unite([client.matched.get("obstacle", PolygonSet()), client.unmatched])
        parts.append(client.subspace.region - obstacle)
    return unite(parts).area
