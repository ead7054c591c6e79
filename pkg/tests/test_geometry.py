import math

import numpy as np
import pytest
import shapely
from shapely.geometry import MultiPoint, Polygon

from mutualspace.geometry import (
    BooleanOp,
    PolygonSet,
    Pose,
    Segment,
    aligned_boundary_length,
    area,
    boolean,
    clearance_mask,
    clearance_ok,
    from_rings,
    make_polygon,
    offset_path,
    perimeter,
    polygon_rings,
    rasterize,
    rectangle,
    squares_inside,
    transform,
)
from mutualspace.misc import GeometryError


def square(x: float = 0.0, y: float = 0.0, size: float = 1.0) -> PolygonSet:
    return PolygonSet(rectangle(x, y, x + size, y + size))


def random_polygon(rng: np.random.Generator) -> Polygon:
    points = rng.uniform(0, 3, size=(8, 2))
    return MultiPoint([tuple(p) for p in points]).convex_hull


def test_area():
    assert area(square()) == pytest.approx(1.0)
    assert area(PolygonSet()) == 0.0
    hexagon = make_polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])
    assert area(PolygonSet(hexagon)) == pytest.approx(3.0)


def test_make_polygon_rejects_bad_input():
    with pytest.raises(GeometryError):
        make_polygon([(0, 0), (1, 0)])
    with pytest.raises(GeometryError):
        make_polygon([(0, 0), (1, 1), (1, 0), (0, 1)])  # Bow tie.
    with pytest.raises(GeometryError):
        make_polygon([(0, 0), (1e-4, 0), (0, 1e-4)])


def test_make_polygon_reorients_clockwise_input():
    poly = make_polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert poly.exterior.is_ccw


def test_boolean_examples():
    assert area(boolean(BooleanOp.INTERSECT, square(), square())) == pytest.approx(1.0)
    assert boolean("intersect", square(), square(5, 5)).is_empty
    assert area(square() & square(0.5, 0)) == pytest.approx(0.5)
    assert area(square() | square(0.5, 0)) == pytest.approx(1.5)
    assert area(square() - square(0.5, 0)) == pytest.approx(0.5)


def test_boolean_drops_slivers():
    touching = square() & square(1.0, 0)
    assert touching.is_empty


def test_inclusion_exclusion_and_raster_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        a, b = PolygonSet(random_polygon(rng)), PolygonSet(random_polygon(rng))
        inter, union = a & b, a | b
        assert area(inter) + area(union) == pytest.approx(area(a) + area(b), abs=1e-4)
        assert area(inter - a) < 1e-6
        assert area(inter - b) < 1e-6
        window = union.bounds
        for s in (inter, union):
            grid = rasterize(s, 0.01, window)
            assert abs(grid.area - area(s)) <= max(0.02 * area(s), 0.01 * perimeter(s))


def test_transform_identity_and_symmetry():
    s = square()
    assert area(transform(s, Pose.identity()) - s) < 1e-9
    centered = PolygonSet(rectangle(-0.5, -0.5, 0.5, 0.5))
    turned = transform(centered, Pose(theta=math.pi))
    assert area(turned - centered) < 1e-9


def test_transform_rotate_then_translate():
    moved = transform(square(), Pose(tx=1, ty=2, theta=math.pi / 2))
    assert moved.bounds == pytest.approx((0.0, 2.0, 1.0, 3.0))
    assert area(moved) == pytest.approx(1.0)


def test_transform_preserves_area_under_random_poses():
    rng = np.random.default_rng(3)
    s = PolygonSet(random_polygon(rng))
    for _ in range(20):
        tx, ty, theta = rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 2 * math.pi)
        assert area(transform(s, Pose(tx=tx, ty=ty, theta=theta))) == pytest.approx(area(s), rel=1e-6)


def test_pose_normalizes_theta():
    assert Pose(theta=-math.pi / 2).theta == pytest.approx(3 * math.pi / 2)
    assert Pose(theta=5 * math.pi).theta == pytest.approx(math.pi)
    assert Pose(theta=math.pi / 2).quarter_turns() == 1
    assert Pose(theta=0.3).quarter_turns() is None


def test_pose_about_keeps_pivot_on_landing():
    pose = Pose.about((2.0, 1.0), math.pi / 2, (5.0, 5.0))
    assert pose.apply(2.0, 1.0) == pytest.approx((5.0, 5.0))


def test_segment_rejects_zero_length():
    with pytest.raises(ValueError):
        Segment.of((1, 1), (1, 1))


@pytest.mark.parametrize(
    "rect, expected",
    [
        ((0, 0, 1, 1), 4 + 2 * math.pi * 0.45),
        ((0, 0, 2, 1), 6 + 2 * math.pi * 0.45),
    ],
)
def test_offset_path_length(rect, expected):
    ring = offset_path(rectangle(*rect), 0.45)
    assert ring.length == pytest.approx(expected, abs=1e-3)
    distances = shapely.distance(shapely.points(list(ring.coords)), rectangle(*rect).exterior)
    assert np.all(np.abs(distances - 0.45) < 1e-3)


def test_offset_path_small_distance_tends_to_perimeter():
    assert offset_path(rectangle(0, 0, 1, 1), 1e-4).length == pytest.approx(4.0, abs=1e-3)
    with pytest.raises(GeometryError):
        offset_path(rectangle(0, 0, 1, 1), 0.0)


def test_aligned_boundary_length():
    unit = rectangle(0, 0, 1, 1)
    assert aligned_boundary_length(unit, unit, 0.05) == pytest.approx(4.0)
    assert aligned_boundary_length(unit, rectangle(10, 10, 11, 11), 0.05) == 0.0
    assert aligned_boundary_length(unit, rectangle(1, 0, 3, 1), 0.05) == pytest.approx(1.0, abs=1e-6)


def test_aligned_boundary_length_never_exceeds_perimeter():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a, b = random_polygon(rng), random_polygon(rng)
        assert aligned_boundary_length(a, b, 0.2) <= a.length + 1e-9


def test_clearance_ok():
    forbidden = square()
    assert clearance_ok((5.0, 5.0), 0.3, forbidden)
    assert not clearance_ok((0.5, 0.5), 0.3, forbidden)
    assert not clearance_ok((1.29, 0.5), 0.3, forbidden)
    assert clearance_ok((1.31, 0.5), 0.3, forbidden)
    assert clearance_ok((0.5, 0.5), 0.3, PolygonSet())


def test_clearance_mask_matches_single_checks():
    forbidden = square() | square(2, 0)
    points = np.array([[1.5, 0.5], [1.29, 0.5], [0.5, 2.0], [2.5, 0.5]])
    mask = clearance_mask(points, 0.3, forbidden)
    assert list(mask) == [clearance_ok(p, 0.3, forbidden) for p in points]


def test_squares_inside():
    room = PolygonSet(rectangle(0, 0, 1, 1))
    points = np.array([[0.5, 0.5], [0.3, 0.3], [0.29, 0.5]])
    assert list(squares_inside(points, 0.6, 0.0, room)) == [True, True, False]
    turned = squares_inside(np.array([[0.5, 0.5], [0.4, 0.5]]), 0.6, math.pi / 4, room)
    assert list(turned) == [True, False]
    assert not squares_inside(points, 0.6, 0.0, PolygonSet()).any()


def test_rasterize():
    assert rasterize(square(), 0.01).count == pytest.approx(10000, abs=200)
    assert rasterize(PolygonSet(), 0.01).count == 0
    clipped = PolygonSet(Polygon([(0, 0), (1, 0), (1, 0.3), (0, 0.9)]))
    assert rasterize(clipped, 0.01).area == pytest.approx(area(clipped), rel=0.02)
    with pytest.raises(GeometryError):
        rasterize(square(), 0.5)


def test_holes_are_decomposed():
    holed = square(0, 0, 3) - square(1, 1, 1)
    pieces = holed.polygons
    assert len(pieces) > 1
    assert all(not p.interiors for p in pieces)
    assert sum(p.area for p in pieces) == pytest.approx(8.0)


def test_rings_round_trip():
    holed = square(0, 0, 3) - square(1, 1, 1)
    restored = from_rings(polygon_rings(holed))
    assert area(restored) == pytest.approx(8.0)
    assert area(restored - holed) < 1e-6
    assert from_rings([]).is_empty
