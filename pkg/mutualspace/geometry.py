"""2D polygon kernel: boolean ops, rigid poses, offsets, boundary alignment and a raster oracle.

Everything here is immutable and pure, so geometry values can be shared freely between workers.
"""

import enum
import logging
import math
from typing import Annotated, Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pydantic
import shapely
from shapely import affinity, ops
from shapely.geometry import LinearRing, LineString, MultiLineString, MultiPolygon, Point, Polygon
from shapely.geometry.base import BaseGeometry
from shapely.geometry.polygon import orient

from mutualspace.misc import AREA_EPS, COORD_LIMIT, OVERLAP_EPS, GeometryError

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
SAMPLE_SPACING = 0.01  # Boundary sampling pitch for alignment measures.
TANGENT_TOLERANCE = math.radians(10)
QUAD_SEGS = 64  # Segments per quarter circle for rounded offsets and disks.
DISK_QUAD_SEGS = 32

Coords = Sequence[Sequence[float]]


class BooleanOp(enum.Enum):
    """Polygon set operations."""

    INTERSECT = "intersect"
    UNION = "union"
    DIFFERENCE = "difference"


class Point2(pydantic.BaseModel):
    """Point in meters."""

    model_config = pydantic.ConfigDict(frozen=True)

    x: float
    y: float

    @pydantic.field_validator("x", "y")
    @classmethod
    def _check_coordinate(cls, value: float) -> float:
        if not math.isfinite(value) or abs(value) > COORD_LIMIT:
            raise ValueError(f"coordinate {value} not finite or beyond {COORD_LIMIT} m")
        return value

    @classmethod
    def of(cls, xy: Sequence[float]) -> "Point2":
        return cls(x=float(xy[0]), y=float(xy[1]))

    def as_tuple(self) -> Tuple[float, float]:
        return self.x, self.y

    def distance(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def _cos_sin(theta: float) -> Tuple[float, float]:
    """Cosine and sine, exact on quarter turns so axis aligned plans stay axis aligned."""
    quarter = theta / (math.pi / 2)
    nearest = round(quarter)
    if abs(quarter - nearest) < 1e-12:
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(nearest) % 4]
    return math.cos(theta), math.sin(theta)


class Pose(pydantic.BaseModel):
    """Rigid motion: rotate about the origin by theta, then translate by (tx, ty)."""

    model_config = pydantic.ConfigDict(frozen=True)

    tx: float = 0.0
    ty: float = 0.0
    theta: float = 0.0

    @pydantic.field_validator("theta")
    @classmethod
    def _normalize_theta(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("theta must be finite")
        value = math.fmod(value, TWO_PI)
        if value < 0:
            value += TWO_PI
        return 0.0 if value >= TWO_PI else value

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def about(cls, pivot: Tuple[float, float], theta: float, landing: Tuple[float, float]) -> "Pose":
        """Pose that rotates around pivot by theta and moves pivot onto landing."""
        cos, sin = _cos_sin(theta)
        px, py = pivot
        return cls(tx=landing[0] - (cos * px - sin * py), ty=landing[1] - (sin * px + cos * py), theta=theta)

    def affine(self) -> List[float]:
        """Shapely affine_transform matrix [a, b, d, e, xoff, yoff]."""
        cos, sin = _cos_sin(self.theta)
        return [cos, -sin, sin, cos, self.tx, self.ty]

    def apply(self, x: float, y: float) -> Tuple[float, float]:
        cos, sin = _cos_sin(self.theta)
        return cos * x - sin * y + self.tx, sin * x + cos * y + self.ty

    def apply_point(self, point: Point2) -> Point2:
        return Point2.of(self.apply(point.x, point.y))

    def quarter_turns(self) -> Optional[int]:
        """Number of quarter turns when theta is one, else None."""
        quarter = self.theta / (math.pi / 2)
        if abs(quarter - round(quarter)) < 1e-9:
            return int(round(quarter)) % 4
        return None


class Segment(pydantic.BaseModel):
    """Directed line segment."""

    model_config = pydantic.ConfigDict(frozen=True)

    a: Point2
    b: Point2

    @pydantic.model_validator(mode="after")
    def _check_length(self) -> "Segment":
        if self.a.distance(self.b) <= AREA_EPS:
            raise ValueError("segment shorter than 1e-6 m")
        return self

    @classmethod
    def of(cls, a: Sequence[float], b: Sequence[float]) -> "Segment":
        return cls(a=Point2.of(a), b=Point2.of(b))

    @property
    def length(self) -> float:
        return self.a.distance(self.b)

    @property
    def midpoint(self) -> Point2:
        return Point2(x=(self.a.x + self.b.x) / 2, y=(self.a.y + self.b.y) / 2)

    def as_line(self) -> LineString:
        return LineString([self.a.as_tuple(), self.b.as_tuple()])

    def as_array(self) -> np.ndarray:
        return np.array([[self.a.x, self.a.y], [self.b.x, self.b.y]], dtype=float)

    def transformed(self, pose: Pose) -> "Segment":
        return Segment(a=pose.apply_point(self.a), b=pose.apply_point(self.b))


def make_polygon(vertices: Coords) -> Polygon:
    """Build a validated counter clockwise simple polygon."""
    if len(vertices) < 3:
        raise GeometryError(f"Polygon needs at least 3 vertices, got {len(vertices)}")
    for vertex in vertices:
        if len(vertex) != 2 or not all(math.isfinite(v) and abs(v) <= COORD_LIMIT for v in vertex):
            raise GeometryError(f"Invalid vertex {vertex}")
    poly = Polygon([(float(x), float(y)) for x, y in vertices])
    if not poly.is_valid:
        raise GeometryError(f"Polygon is not simple: {shapely.is_valid_reason(poly)}")
    if poly.area <= AREA_EPS:
        raise GeometryError(f"Polygon area {poly.area} below {AREA_EPS} m^2")
    return orient(poly, sign=1.0)


def rectangle(minx: float, miny: float, maxx: float, maxy: float) -> Polygon:
    return orient(shapely.box(minx, miny, maxx, maxy), sign=1.0)


def _polygonal_parts(geom: Optional[BaseGeometry]) -> List[Polygon]:
    if geom is None or geom.is_empty:
        return []
    if not geom.is_valid:
        geom = shapely.make_valid(geom)
    if isinstance(geom, Polygon):
        return [geom]
    if hasattr(geom, "geoms"):
        parts: List[Polygon] = []
        for sub in geom.geoms:
            parts.extend(_polygonal_parts(sub))
        return parts
    return []  # Points and lines carry no area.


def _split_holes(poly: Polygon) -> List[Polygon]:
    """Cut a holed polygon into hole free pieces with one vertical cut through every hole."""
    if not poly.interiors:
        return [poly]
    _, miny, _, maxy = poly.bounds
    xs = sorted({Polygon(ring).representative_point().x for ring in poly.interiors})
    cuts = MultiLineString([[(x, miny - 1.0), (x, maxy + 1.0)] for x in xs])
    pieces = [p for p in _polygonal_parts(ops.split(poly, cuts)) if p.area > AREA_EPS]
    return sorted((orient(p, sign=1.0) for p in pieces), key=lambda p: p.bounds)


class PolygonSet(object):
    """Immutable set of interior disjoint polygons (a multipolygon)."""

    __slots__ = ("_geom",)

    def __init__(self, geom: Optional[BaseGeometry] = None) -> None:
        """Construct from any shapely geometry; non polygonal and degenerate parts are dropped."""
        parts = [orient(p, sign=1.0) for p in _polygonal_parts(geom) if p.area > AREA_EPS]
        if len(parts) > 1 and geom is not None and not isinstance(geom, MultiPolygon):
            merged = shapely.union_all(parts)
            parts = [orient(p, sign=1.0) for p in _polygonal_parts(merged) if p.area > AREA_EPS]
        self._geom = MultiPolygon(parts) if parts else MultiPolygon()

    @classmethod
    def of(cls, *polygons: Polygon) -> "PolygonSet":
        return cls(shapely.union_all(list(polygons))) if polygons else cls()

    @classmethod
    def empty(cls) -> "PolygonSet":
        return cls()

    @property
    def geom(self) -> MultiPolygon:
        return self._geom

    @property
    def area(self) -> float:
        return float(self._geom.area)

    @property
    def is_empty(self) -> bool:
        return self._geom.is_empty

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return self._geom.bounds

    @property
    def polygons(self) -> List[Polygon]:
        """Hole free decomposition, ordered by bounding box."""
        pieces: List[Polygon] = []
        for poly in self._geom.geoms:
            pieces.extend(_split_holes(poly))
        return sorted(pieces, key=lambda p: p.bounds)

    def __and__(self, other: "PolygonSet") -> "PolygonSet":
        return boolean(BooleanOp.INTERSECT, self, other)

    def __or__(self, other: "PolygonSet") -> "PolygonSet":
        return boolean(BooleanOp.UNION, self, other)

    def __sub__(self, other: "PolygonSet") -> "PolygonSet":
        return boolean(BooleanOp.DIFFERENCE, self, other)

    def __repr__(self) -> str:
        return f"PolygonSet(parts={len(self._geom.geoms)}, area={self.area:.4f})"


RING_DIGITS = 6


def polygon_rings(s: PolygonSet) -> List[List[Tuple[float, float]]]:
    """Hole free exterior rings for JSON output."""
    return [
        [(round(x, RING_DIGITS) + 0.0, round(y, RING_DIGITS) + 0.0) for x, y in poly.exterior.coords[:-1]]
        for poly in s.polygons
    ]


def from_rings(value: Any) -> PolygonSet:
    """Inverse of polygon_rings, also accepts a PolygonSet as is."""
    if isinstance(value, PolygonSet):
        return value
    if not isinstance(value, (list, tuple)):
        raise ValueError(f"expected a list of rings, got {type(value).__name__}")
    polygons = [Polygon(ring) for ring in value if len(ring) >= 3]
    return PolygonSet(shapely.union_all(polygons)) if polygons else PolygonSet()


# PolygonSet field of a pydantic model, stored as a list of rings in JSON.
PolygonSetField = Annotated[
    PolygonSet,
    pydantic.PlainValidator(from_rings),
    pydantic.PlainSerializer(polygon_rings, return_type=list),
]


def area(s: PolygonSet) -> float:
    """Total area in m^2."""
    return s.area


def boolean(op: Union[BooleanOp, str], a: PolygonSet, b: PolygonSet) -> PolygonSet:
    """Intersect, unite or subtract two polygon sets. Slivers under 1e-6 m^2 are dropped."""
    op = BooleanOp(op)
    if op is BooleanOp.INTERSECT:
        if a.is_empty or b.is_empty:
            return PolygonSet()
        return PolygonSet(a.geom.intersection(b.geom))
    if op is BooleanOp.UNION:
        return PolygonSet(shapely.union_all([a.geom, b.geom]))
    if b.is_empty:
        return a
    return PolygonSet(a.geom.difference(b.geom))


def unite(sets: Iterable[PolygonSet]) -> PolygonSet:
    geoms = [s.geom for s in sets if not s.is_empty]
    return PolygonSet(shapely.union_all(geoms)) if geoms else PolygonSet()


def transform_geometry(geom: BaseGeometry, pose: Pose) -> BaseGeometry:
    return affinity.affine_transform(geom, pose.affine())


def transform(s: PolygonSet, p: Pose) -> PolygonSet:
    """Apply a rigid pose."""
    return PolygonSet(transform_geometry(s.geom, p))


def perimeter(poly: Union[Polygon, PolygonSet]) -> float:
    return float(poly.geom.length if isinstance(poly, PolygonSet) else poly.length)


def offset_path(poly: Polygon, d: float) -> LinearRing:
    """Outer boundary of the Minkowski sum of poly and a disk of radius d (rounded corners)."""
    if d <= 0:
        raise GeometryError(f"Offset distance must be positive, got {d}")
    grown = poly.buffer(d, quad_segs=QUAD_SEGS)
    if isinstance(grown, MultiPolygon):  # Only possible for invalid input.
        grown = max(grown.geoms, key=lambda g: g.area)
    return LinearRing(orient(grown, sign=1.0).exterior.coords)


def segments_of(geom: Union[BaseGeometry, PolygonSet, Segment, Sequence[Segment]]) -> np.ndarray:
    """All boundary segments as an (N, 2, 2) array."""
    if isinstance(geom, Segment):
        return geom.as_array()[None, :, :]
    if isinstance(geom, (list, tuple)):
        if not geom:
            return np.zeros((0, 2, 2))
        return np.stack([s.as_array() for s in geom])
    if isinstance(geom, PolygonSet):
        geom = geom.geom
    boundary = geom if isinstance(geom, (LineString, LinearRing, MultiLineString)) else geom.boundary
    lines = boundary.geoms if hasattr(boundary, "geoms") else [boundary]
    chunks = []
    for line in lines:
        coords = np.asarray(line.coords, dtype=float)
        if len(coords) >= 2:
            chunks.append(np.stack([coords[:-1], coords[1:]], axis=1))
    if not chunks:
        return np.zeros((0, 2, 2))
    segments = np.concatenate(chunks)
    lengths = np.linalg.norm(segments[:, 1] - segments[:, 0], axis=1)
    return segments[lengths > AREA_EPS]


def aligned_segment_length(
    segments_a: np.ndarray,
    segments_b: np.ndarray,
    eps: float,
    spacing: float = SAMPLE_SPACING,
    tolerance: float = TANGENT_TOLERANCE,
) -> float:
    """Length of the a segments lying within eps of a parallel b segment.

    Each a segment is sampled at interval midpoints. A sample counts when its perpendicular foot lands on some b
    segment no farther than eps and that segment's line is within tolerance of the a segment's direction.
    """
    if eps <= 0:
        raise GeometryError(f"eps must be positive, got {eps}")
    if len(segments_a) == 0 or len(segments_b) == 0:
        return 0.0
    b_start = segments_b[:, 0]
    b_vec = segments_b[:, 1] - b_start
    b_len = np.linalg.norm(b_vec, axis=1)
    b_dir = b_vec / b_len[:, None]
    max_sin = math.sin(tolerance)
    total = 0.0
    for start, end in segments_a:
        vec = end - start
        length = float(np.hypot(*vec))
        if length <= AREA_EPS:
            continue
        direction = vec / length
        parallel = np.abs(direction[0] * b_dir[:, 1] - direction[1] * b_dir[:, 0]) <= max_sin
        if not parallel.any():
            continue
        count = max(1, int(math.ceil(length / spacing)))
        ts = (np.arange(count) + 0.5) / count
        samples = start + ts[:, None] * vec
        rel = samples[:, None, :] - b_start[None, :, :]
        along = rel[..., 0] * b_dir[None, :, 0] + rel[..., 1] * b_dir[None, :, 1]
        across = np.abs(rel[..., 0] * b_dir[None, :, 1] - rel[..., 1] * b_dir[None, :, 0])
        hit = parallel[None, :] & (along >= -1e-9) & (along <= b_len[None, :] + 1e-9) & (across <= eps)
        total += length / count * int(hit.any(axis=1).sum())
    return total


def aligned_boundary_length(
    a: Union[Polygon, PolygonSet],
    b: Union[Polygon, PolygonSet],
    eps: float,
    spacing: float = SAMPLE_SPACING,
) -> float:
    """Length of a's boundary that runs within eps of, and parallel (10 deg) to, b's boundary."""
    return min(aligned_segment_length(segments_of(a), segments_of(b), eps, spacing), perimeter(a))


def _point_xy(center: Union[Point2, Sequence[float]]) -> Tuple[float, float]:
    return center.as_tuple() if isinstance(center, Point2) else (float(center[0]), float(center[1]))


def clearance_ok(center: Union[Point2, Sequence[float]], radius: float, forbidden: PolygonSet) -> bool:
    """True when the disk around center overlaps forbidden by less than 1e-4 m^2."""
    return bool(clearance_mask(np.array([_point_xy(center)]), radius, forbidden)[0])


def clearance_mask(points: np.ndarray, radius: float, forbidden: PolygonSet) -> np.ndarray:
    """Vectorized clearance_ok over an (N, 2) array of centers."""
    if radius <= 0:
        raise GeometryError(f"Clearance radius must be positive, got {radius}")
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    ok = np.ones(len(points), dtype=bool)
    if forbidden.is_empty or not len(points):
        return ok
    geom = forbidden.geom
    shapely.prepare(geom)
    distances = shapely.distance(shapely.points(points), geom)
    for i in np.nonzero(distances < radius)[0]:
        disk = Point(points[i]).buffer(radius, quad_segs=DISK_QUAD_SEGS)
        ok[i] = geom.intersection(disk).area < OVERLAP_EPS
    return ok


def squares_inside(points: np.ndarray, size: float, theta: float, region: PolygonSet) -> np.ndarray:
    """Mask of centers whose size x size square, turned by theta, lies inside region."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if region.is_empty or not len(points):
        return np.zeros(len(points), dtype=bool)
    half = size / 2
    c, s = _cos_sin(theta)
    corners = np.array([(-half, -half), (half, -half), (half, half), (-half, half)]) @ np.array([[c, s], [-s, c]])
    squares = shapely.polygons(points[:, None, :] + corners[None, :, :])
    grown = region.geom.buffer(1e-6, join_style="mitre")
    shapely.prepare(grown)
    return shapely.covers(grown, squares)


class OccupancyGrid(pydantic.BaseModel):
    """Boolean raster: cell (i, j) covers x = origin_x + (j + 0.5) * cell, y = origin_y + (i + 0.5) * cell."""

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    origin: Tuple[float, float]
    cell: float
    mask: np.ndarray

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def area(self) -> float:
        return self.count * self.cell**2


def rasterize(
    s: PolygonSet,
    cell: float,
    window: Optional[Tuple[float, float, float, float]] = None,
) -> OccupancyGrid:
    """Mark every cell whose center lies in s. Pass window to rasterize several sets on one grid."""
    if not 0.001 <= cell <= 0.1:
        raise GeometryError(f"Raster cell {cell} outside [0.001, 0.1] m")
    if window is None:
        if s.is_empty:
            return OccupancyGrid(origin=(0.0, 0.0), cell=cell, mask=np.zeros((0, 0), dtype=bool))
        window = s.bounds
    minx, miny, maxx, maxy = window
    cols = max(0, int(math.ceil((maxx - minx) / cell)))
    rows = max(0, int(math.ceil((maxy - miny) / cell)))
    xs = minx + (np.arange(cols) + 0.5) * cell
    ys = miny + (np.arange(rows) + 0.5) * cell
    grid_x, grid_y = np.meshgrid(xs, ys)
    if s.is_empty:
        mask = np.zeros(grid_x.shape, dtype=bool)
    else:
        mask = shapely.contains_xy(s.geom, grid_x, grid_y)
    return OccupancyGrid(origin=(minx, miny), cell=cell, mask=mask)
