"""Authored floorplans: four meeting rooms for hosts, five homes and five offices for clients.

Coordinates are meters. Every room gets a 0.1 m wall ring along its outline; furniture keeps clear of it.
"""

import math
from typing import Dict, List, Sequence, Tuple

import shapely
from shapely.geometry import Polygon
from shapely.geometry.polygon import orient

from mutualspace.floorplan import FloorplanModel, RegionModel

WALL_THICKNESS = 0.1
Box = Tuple[float, float, float, float]
Ring = List[Tuple[float, float]]


def box_ring(minx: float, miny: float, maxx: float, maxy: float) -> Ring:
    return [(minx, miny), (maxx, miny), (maxx, maxy), (minx, maxy)]


def _coords(poly: Polygon) -> Ring:
    return [(round(x, 4) + 0.0, round(y, 4) + 0.0) for x, y in orient(poly, sign=1.0).exterior.coords[:-1]]


def wall_ring(boundary: Ring, thickness: float = WALL_THICKNESS) -> List[Ring]:
    """One wall piece per outline edge: the edge pushed inwards by thickness, minus earlier pieces."""
    outline = orient(Polygon(boundary), sign=1.0)
    points = list(outline.exterior.coords)[:-1]
    taken = Polygon()
    pieces: List[Ring] = []
    for (ax, ay), (bx, by) in zip(points, points[1:] + points[:1]):
        length = math.hypot(bx - ax, by - ay)
        nx, ny = -(by - ay) / length * thickness, (bx - ax) / length * thickness
        strip = Polygon([(ax, ay), (bx, by), (bx + nx, by + ny), (ax + nx, ay + ny)])
        piece = strip.intersection(outline).difference(taken)
        parts = [p for p in getattr(piece, "geoms", [piece]) if isinstance(p, Polygon) and p.area > 1e-4]
        for part in parts:
            pieces.append(_coords(part))
        taken = shapely.union_all([taken, strip.intersection(outline)])
    return pieces


def plan(
    plan_id: str,
    kind: str,
    boundary: Ring,
    tables: Sequence[Ring] = (),
    chairs: Sequence[Box] = (),
    obstacles: Sequence[Tuple[str, Box]] = (),
) -> FloorplanModel:
    regions: List[RegionModel] = []
    for i, ring in enumerate(wall_ring(boundary)):
        regions.append(RegionModel(id=f"wall-{i + 1}", label="wall", polygon=ring))
    for i, ring in enumerate(tables):
        regions.append(RegionModel(id=f"table-{i + 1}", label="table", polygon=ring))
    for i, chair in enumerate(chairs):
        regions.append(RegionModel(id=f"chair-{i + 1}", label="chair", polygon=box_ring(*chair)))
    counts: Dict[str, int] = {}
    for name, item in obstacles:
        counts[name] = counts.get(name, 0) + 1
        regions.append(RegionModel(id=f"{name}-{counts[name]}", label="obstacle", polygon=box_ring(*item)))
    return FloorplanModel(id=plan_id, kind=kind, boundary=boundary, regions=regions)


def _row(y0: float, y1: float, xs: Sequence[float], width: float = 0.5) -> List[Box]:
    return [(x, y0, x + width, y1) for x in xs]


HOSTS = [
    plan(
        "meeting-room-1",
        "host",
        box_ring(0, 0, 6, 5),
        tables=[box_ring(1.8, 1.9, 4.2, 3.1)],
        chairs=_row(1.3, 1.8, [2.05, 2.75, 3.45]) + _row(3.2, 3.7, [2.05, 2.75, 3.45]),
        obstacles=[("cabinet", (0.1, 4.4, 1.3, 4.9)), ("plant", (5.4, 0.1, 5.9, 0.6))],
    ),
    plan(
        "meeting-room-2",
        "host",
        box_ring(0, 0, 4, 3.5),
        tables=[box_ring(0.6, 0.6, 1.4, 1.4)],
        chairs=[(1.5, 0.75, 2.0, 1.25), (0.75, 1.5, 1.25, 2.0)],
        obstacles=[("cabinet", (3.4, 2.4, 3.9, 3.4))],
    ),
    plan(
        "meeting-room-3",
        "host",
        box_ring(0, 0, 5, 4),
        tables=[box_ring(1.8, 1.7, 3.2, 2.3)],
        chairs=_row(2.4, 2.9, [2.0, 2.5]) + _row(1.1, 1.6, [2.0, 2.5]),
        obstacles=[("shelf", (0.1, 3.4, 4.9, 3.9)), ("credenza", (0.1, 0.1, 3.0, 0.6))],
    ),
    plan(
        "meeting-room-4",
        "host",
        box_ring(0, 0, 8, 6),
        tables=[box_ring(2.5, 2.3, 5.5, 3.7)],
        chairs=_row(1.7, 2.2, [2.7, 3.4, 4.1, 4.8]) + _row(3.8, 4.3, [2.7, 3.4, 4.1, 4.8]),
        obstacles=[
            ("sideboard", (0.1, 0.1, 2.0, 0.6)),
            ("tv", (3.0, 5.5, 5.0, 5.9)),
            ("plant", (7.4, 5.4, 7.9, 5.9)),
        ],
    ),
]

HOMES = [
    plan(
        "home-1",
        "home",
        box_ring(0, 0, 5, 4),
        tables=[box_ring(1.0, 1.5, 2.2, 2.3)],
        chairs=[(0.4, 1.65, 0.9, 2.15), (2.3, 1.65, 2.8, 2.15)],
        obstacles=[("sofa", (3.2, 0.1, 4.9, 1.0)), ("shelf", (0.1, 3.5, 1.0, 3.9))],
    ),
    plan(
        "home-2",
        "home",
        box_ring(0, 0, 6, 4.5),
        tables=[box_ring(3.5, 2.8, 4.9, 3.7)],
        chairs=_row(2.2, 2.7, [3.7, 4.3]) + _row(3.8, 4.3, [3.7, 4.3]),
        obstacles=[("bed", (0.1, 0.1, 2.1, 1.7)), ("wardrobe", (0.1, 3.8, 1.5, 4.4))],
    ),
    plan(
        "home-3",
        "home",
        [(0, 0), (6, 0), (6, 3), (3, 3), (3, 5), (0, 5)],
        tables=[box_ring(3.8, 1.0, 5.0, 1.8)],
        chairs=[(3.9, 0.4, 4.4, 0.9), (4.5, 0.4, 5.0, 0.9), (5.1, 1.15, 5.6, 1.65)],
        obstacles=[("sofa", (0.1, 3.9, 1.9, 4.9)), ("counter", (0.1, 0.1, 0.7, 2.5))],
    ),
    plan(
        "home-4",
        "home",
        box_ring(0, 0, 4, 4),
        tables=[box_ring(2.6, 2.6, 3.4, 3.4)],
        chairs=[(2.75, 2.0, 3.25, 2.5)],
        obstacles=[("bed", (0.1, 0.1, 1.7, 2.1)), ("dresser", (0.1, 3.4, 1.2, 3.9))],
    ),
    plan(
        "home-5",
        "home",
        box_ring(0, 0, 7, 5),
        tables=[box_ring(2.0, 2.0, 3.6, 2.9)],
        chairs=_row(1.4, 1.9, [2.2, 2.9]) + _row(3.0, 3.5, [2.2, 2.9]),
        obstacles=[
            ("sofa", (5.0, 3.0, 6.9, 4.9)),
            ("tv", (4.0, 0.1, 6.0, 0.5)),
            ("shelf", (0.1, 4.4, 1.5, 4.9)),
        ],
    ),
]

# office-1, office-3 and office-5 are furnished wall to wall around a 1.0 x 1.8 m open patch. That patch is all
# their floor, too little for seven people standing apart.
OFFICES = [
    plan(
        "office-1",
        "office",
        box_ring(0, 0, 2.6, 2.2),
        tables=[box_ring(0.1, 1.3, 2.5, 2.1)],
        chairs=[(0.1, 0.8, 0.5, 1.3)],
        obstacles=[
            ("cabinet", (0.1, 0.1, 0.5, 0.8)),
            ("shelf", (0.5, 0.1, 2.5, 0.3)),
            ("cabinet", (2.3, 0.3, 2.5, 1.3)),
        ],
    ),
    plan(
        "office-2",
        "office",
        box_ring(0, 0, 6, 5),
        tables=[box_ring(2.1, 2.0, 3.9, 2.9)],
        chairs=_row(1.4, 1.9, [2.3, 3.2]) + _row(3.0, 3.5, [2.3, 3.2]),
        obstacles=[("shelf", (0.1, 4.4, 2.5, 4.9)), ("shelf", (5.4, 0.1, 5.9, 2.0))],
    ),
    plan(
        "office-3",
        "office",
        box_ring(0, 0, 2.4, 2.8),
        tables=[box_ring(0.1, 0.1, 0.9, 2.7)],
        chairs=[(0.9, 0.1, 1.4, 0.5)],
        obstacles=[
            ("printer", (1.4, 0.1, 2.3, 0.5)),
            ("bookcase", (1.9, 0.5, 2.3, 2.7)),
            ("plant", (0.9, 2.3, 1.9, 2.7)),
        ],
    ),
    plan(
        "office-4",
        "office",
        box_ring(0, 0, 7, 4),
        tables=[box_ring(1.0, 2.8, 2.6, 3.6), box_ring(4.0, 2.8, 5.6, 3.6)],
        chairs=[(1.55, 2.2, 2.05, 2.7), (4.55, 2.2, 5.05, 2.7)],
        obstacles=[("cabinet", (6.3, 0.1, 6.9, 1.2))],
    ),
    plan(
        "office-5",
        "office",
        box_ring(0, 0, 3.0, 2.0),
        tables=[box_ring(1.1, 1.1, 2.9, 1.9)],
        chairs=[(0.6, 0.6, 1.1, 1.1)],
        obstacles=[
            ("armchair", (0.1, 1.1, 1.1, 1.9)),
            ("cabinet", (0.1, 0.1, 0.6, 1.1)),
            ("bin", (0.6, 0.1, 1.1, 0.6)),
        ],
    ),
]
