import json
import math

import pytest
from shapely.geometry import Point

from conftest import bare_plan
from mutualspace.corpus.layouts import box_ring
from mutualspace.floorplan import (
    Context,
    SemanticLabel,
    dumps,
    label_at,
    load,
    loads,
    save,
    semantic_map,
    wall_face,
    wall_faces,
)
from mutualspace.geometry import Point2, Pose
from mutualspace.misc import FloorplanParseError, FloorplanValidationError, OutOfBoundsError

LABELS = ("table", "wall", "chair", "obstacle", "floor")


def test_minimal_plan_is_all_floor(empty_room):
    smap = semantic_map(empty_room, Context.FLOOR)
    assert empty_room.regions == ()
    assert smap.floor.area == pytest.approx(16.0)
    assert smap.movable_floor.area == pytest.approx(16.0)


def test_table_is_subtracted_from_floor(table_room):
    smap = semantic_map(table_room, Context.TABLE)
    assert smap.table.area == pytest.approx(2.0)
    assert smap.floor.area == pytest.approx(14.0)


def test_region_outside_boundary_is_rejected():
    with pytest.raises(FloorplanValidationError) as excinfo:
        bare_plan("bad", box_ring(0, 0, 4, 4), [("shelf-1", "obstacle", box_ring(3.5, 3.5, 4.5, 4.5))])
    assert excinfo.value.region_id == "shelf-1"


def test_overlapping_regions_are_rejected():
    with pytest.raises(FloorplanValidationError) as excinfo:
        bare_plan(
            "bad",
            box_ring(0, 0, 4, 4),
            [("table-1", "table", box_ring(1, 1, 2, 2)), ("sofa-1", "obstacle", box_ring(1.5, 1.5, 2.5, 2.5))],
        )
    assert excinfo.value.region_id == "table-1"


def test_duplicate_region_ids_are_rejected():
    with pytest.raises(FloorplanValidationError):
        bare_plan(
            "bad",
            box_ring(0, 0, 4, 4),
            [("a", "table", box_ring(0.5, 0.5, 1, 1)), ("a", "chair", box_ring(2, 2, 2.5, 2.5))],
        )


def test_plan_area_limits():
    with pytest.raises(FloorplanValidationError):
        bare_plan("tiny", box_ring(0, 0, 1, 1))
    with pytest.raises(FloorplanValidationError):
        bare_plan("huge", box_ring(0, 0, 20, 20))


def test_schema_errors_carry_field_path():
    with pytest.raises(FloorplanParseError) as excinfo:
        loads(json.dumps({"id": "x", "boundary": box_ring(0, 0, 4, 4)}))
    assert excinfo.value.field_path == "kind"
    with pytest.raises(FloorplanParseError) as excinfo:
        loads(json.dumps({"id": "x", "kind": "garage", "boundary": box_ring(0, 0, 4, 4)}))
    assert excinfo.value.field_path == "kind"
    with pytest.raises(FloorplanParseError):
        loads("{not json")


def test_unknown_keys_are_rejected():
    with pytest.raises(FloorplanParseError):
        loads(json.dumps({"id": "x", "kind": "home", "boundary": box_ring(0, 0, 4, 4), "color": "red"}))


def test_load_missing_file(tmp_path):
    with pytest.raises(FloorplanParseError):
        load(tmp_path / "nope.json")


def test_save_load_round_trip(tmp_path, walled_room):
    path = save(walled_room, tmp_path / "plan.json")
    again = load(path)
    assert dumps(again) == dumps(walled_room)
    for context in Context:
        before, after = semantic_map(walled_room, context), semantic_map(again, context)
        for label in LABELS:
            assert getattr(after, label).area == pytest.approx(getattr(before, label).area, abs=1e-6)


def test_load_accepts_json_text(walled_room):
    assert load(dumps(walled_room)).id == walled_room.id


def test_chairs_follow_context(walled_room):
    table_map = semantic_map(walled_room, Context.TABLE)
    floor_map = semantic_map(walled_room, Context.FLOOR)
    seat = Point2(x=2.5, y=1.15)
    assert table_map.walkable().geom.contains(Point(seat.x, seat.y))
    assert not floor_map.walkable().geom.contains(Point(seat.x, seat.y))
    assert "chair" in table_map.classes()
    assert "chair" not in floor_map.classes()
    assert floor_map.classes()["obstacle"].area == pytest.approx(table_map.chair.area)
    assert table_map.movable_floor.area == pytest.approx(table_map.floor.area + table_map.chair.area)
    assert floor_map.movable_floor.area == pytest.approx(floor_map.floor.area)


def test_label_at(walled_room):
    smap = semantic_map(walled_room, Context.TABLE)
    assert label_at(smap, Point2(x=0.8, y=0.8)) is SemanticLabel.FLOOR
    assert label_at(smap, Point2(x=2.0, y=2.0)) is SemanticLabel.TABLE
    assert label_at(smap, Point2(x=2.5, y=1.15)) is SemanticLabel.CHAIR
    assert label_at(smap, Point2(x=0.05, y=2.0)) is SemanticLabel.WALL
    # Inner wall face touches the floor, the wall wins.
    assert label_at(smap, Point2(x=2.0, y=0.1)) is SemanticLabel.WALL
    with pytest.raises(OutOfBoundsError):
        label_at(smap, Point2(x=6.0, y=1.0))


def test_labels_partition_the_boundary(corpus):
    for fp in corpus.plans:
        smap = semantic_map(fp, Context.TABLE)
        total = sum(getattr(smap, label).area for label in LABELS)
        assert total == pytest.approx(fp.area, abs=1e-3), fp.id


def test_semantic_map_is_deterministic(walled_room):
    a, b = semantic_map(walled_room, Context.WALL), semantic_map(walled_room, Context.WALL)
    assert [getattr(a, label).area for label in LABELS] == [getattr(b, label).area for label in LABELS]


def test_transformed_map_keeps_areas(walled_room):
    smap = semantic_map(walled_room, Context.TABLE)
    moved = smap.transformed(Pose(tx=3.0, ty=-1.0, theta=1.0))
    for label in LABELS:
        assert getattr(moved, label).area == pytest.approx(getattr(smap, label).area, rel=1e-6)


def test_meeting_room_one(corpus):
    fp = corpus.plan("meeting-room-1")
    assert len(fp.regions_with(SemanticLabel.TABLE)) == 1
    assert len(fp.regions_with(SemanticLabel.CHAIR)) >= 4
    assert len(fp.regions_with(SemanticLabel.WALL)) == 4


def test_wall_faces_point_into_the_room(walled_room):
    bottom = wall_face(walled_room, "wall-1")
    assert bottom.normal == pytest.approx((0.0, 1.0))
    assert bottom.face.a.y == pytest.approx(0.1)
    assert bottom.face.length == pytest.approx(5.0)
    right = wall_face(walled_room, "wall-2")
    assert right.normal == pytest.approx((-1.0, 0.0))
    assert right.face.a.x == pytest.approx(4.9)
    assert len(wall_faces(walled_room)) == 4
    with pytest.raises(FloorplanValidationError):
        wall_face(walled_room, "table-1")


def test_wall_face_follows_pose(walled_room):
    turned = wall_face(walled_room, "wall-1").transformed(Pose(theta=math.pi / 2))
    assert turned.normal == pytest.approx((-1.0, 0.0))
