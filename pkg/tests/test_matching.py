import math

import numpy as np
import pytest

from conftest import bare_plan
from mutualspace.corpus.layouts import box_ring
from mutualspace.floorplan import Context, WallFace, from_model, semantic_map, to_model
from mutualspace.geometry import PolygonSet, Pose, Segment, rasterize, rectangle
from mutualspace.matching import (
    ContextWeights,
    MatchConfig,
    MatchTerms,
    RotationMode,
    matched_space,
    objective,
    optimize_pose,
    psi_g_sem,
    psi_g_size,
    psi_i_hor,
    psi_i_mov,
    psi_i_ver,
)
from mutualspace.misc import MatchFailedError

FAST = MatchConfig(population=8, generations=20, seed=1)


@pytest.fixture
def small_floor():
    return bare_plan("floor-2x2", box_ring(0, 0, 2, 2))


def maps(host, client, context=Context.FLOOR):
    return semantic_map(host, context), semantic_map(client, context)


def test_size_ratio(empty_room, small_floor):
    host_map, client_map = maps(empty_room, small_floor)
    assert psi_g_size(host_map, client_map, Pose(tx=1, ty=1)) == pytest.approx(0.25)
    assert psi_g_size(host_map, host_map, Pose()) == pytest.approx(1.0)
    assert psi_g_size(host_map, client_map, Pose(tx=50, ty=50)) == 0.0


def test_semantic_ratio(table_room, small_floor):
    host_map, client_map = maps(table_room, small_floor)
    assert psi_g_sem(host_map, host_map, Pose()) == pytest.approx(1.0)
    assert psi_g_sem(host_map, client_map, Pose(tx=1, ty=1)) == pytest.approx(0.5)
    assert psi_g_sem(host_map, client_map, Pose(tx=50, ty=50)) == 0.0


def test_horizontal_ratio():
    host_table = rectangle(1, 1, 3, 2)
    assert psi_i_hor(host_table, host_table, Pose()) == pytest.approx(1.0)
    client_table = rectangle(0, 0, 1, 1)
    assert psi_i_hor(host_table, client_table, Pose(tx=3, ty=1)) == pytest.approx(1 / 6, abs=1e-3)
    assert psi_i_hor(host_table, host_table, Pose(tx=0.2, ty=0.2), eps=0.05) == 0.0


def test_vertical_ratio():
    host = WallFace(region_id="w", face=Segment.of((0, 0), (4, 0)), normal=(0.0, 1.0))
    half = WallFace(region_id="c", face=Segment.of((0, 0), (2, 0)), normal=(0.0, 1.0))
    full = WallFace(region_id="c", face=Segment.of((-1, 0), (5, 0)), normal=(0.0, 1.0))
    across = WallFace(region_id="c", face=Segment.of((0, 0), (0, 4)), normal=(1.0, 0.0))
    assert psi_i_ver(host, [full], Pose()) == pytest.approx(1.0)
    assert psi_i_ver(host, [half], Pose()) == pytest.approx(0.5)
    assert psi_i_ver(host, [half], Pose(tx=2)) == pytest.approx(0.5)
    assert psi_i_ver(host, [across], Pose()) == 0.0
    assert psi_i_ver(host, [half], Pose(ty=0.2)) == 0.0


def test_movable_floor_ratio(empty_room):
    host_map, _ = maps(empty_room, empty_room)
    assert psi_i_mov(host_map, host_map, Pose()) == pytest.approx(1.0)
    assert psi_i_mov(host_map, host_map, Pose(tx=2)) == pytest.approx(0.5)
    assert psi_i_mov(host_map, host_map, Pose(tx=10)) == 0.0


def test_terms_stay_in_unit_range(corpus):
    rng = np.random.default_rng(5)
    host, client = corpus.plan("meeting-room-1"), corpus.plan("home-3")
    host_map, client_map = maps(host, client, Context.TABLE)
    for _ in range(20):
        pose = Pose(tx=rng.uniform(-4, 8), ty=rng.uniform(-4, 8), theta=rng.uniform(0, 2 * math.pi))
        for fn in (psi_g_sem, psi_g_size, psi_i_mov):
            assert 0.0 <= fn(host_map, client_map, pose) <= 1.0


def test_terms_agree_with_raster_oracle(corpus):
    rng = np.random.default_rng(9)
    host, client = corpus.plan("meeting-room-3"), corpus.plan("office-2")
    host_map, client_map = maps(host, client, Context.FLOOR)
    for _ in range(20):
        pose = Pose(tx=rng.uniform(-2, 2), ty=rng.uniform(-2, 2), theta=rng.integers(4) * math.pi / 2)
        moved = client_map.transformed(pose)
        window = host_map.boundary.bounds

        def cells(s: PolygonSet) -> np.ndarray:
            return rasterize(s, 0.01, window).mask

        overlap = cells(host_map.boundary) & cells(moved.boundary)
        if overlap.sum():
            same = np.zeros_like(overlap)
            host_classes, moved_classes = host_map.classes(), moved.classes()
            for name, layer in host_classes.items():
                same |= cells(layer) & cells(moved_classes[name])
            assert psi_g_sem(host_map, client_map, pose) == pytest.approx(same.sum() / overlap.sum(), abs=0.02)
        size = overlap.sum() / cells(host_map.boundary).sum()
        assert psi_g_size(host_map, client_map, pose) == pytest.approx(size, abs=0.02)
        mov = (cells(host_map.movable_floor) & cells(moved.movable_floor)).sum() / cells(host_map.movable_floor).sum()
        assert psi_i_mov(host_map, client_map, pose) == pytest.approx(mov, abs=0.02)


def test_weighted_sum():
    ones = MatchTerms(sem=1, size=1, hor=1, ver=1, mov=1)
    assert ContextWeights.sa_table().combine(ones) == pytest.approx(120.0)
    assert ContextWeights.from_sequence([0] * 5).combine(ones) == 0.0
    assert ContextWeights.geometric().combine(MatchTerms(sem=0.8, size=0.5)) == pytest.approx(13.0)


def test_weights_are_validated():
    with pytest.raises(ValueError):
        ContextWeights(w3=-1.0)
    with pytest.raises(ValueError):
        ContextWeights.from_sequence([1, 2, 3])
    assert ContextWeights.sa_wall().active_terms() == {"sem", "size", "ver"}


def test_objective_is_monotone_in_each_term():
    rng = np.random.default_rng(2)
    weights = ContextWeights.from_sequence(rng.uniform(0, 100, 5))
    base = rng.uniform(0, 0.5, 5)
    for i in range(5):
        raised = base.copy()
        raised[i] += 0.3
        low = weights.combine(MatchTerms(**dict(zip(("sem", "size", "hor", "ver", "mov"), base))))
        high = weights.combine(MatchTerms(**dict(zip(("sem", "size", "hor", "ver", "mov"), raised))))
        assert high >= low


def test_objective_at_a_pose(walled_room):
    result = objective(walled_room, walled_room, Pose(), ContextWeights.sa_table(), Context.TABLE)
    assert result.objective == pytest.approx(120.0)
    assert result.terms.hor == pytest.approx(1.0)
    assert result.host_target == result.client_target == "table-1"
    zero = objective(walled_room, walled_room, Pose(tx=1), ContextWeights.from_sequence([0] * 5), Context.TABLE)
    assert zero.objective == 0.0


def test_missing_interaction_target_is_flagged(walled_room):
    result = objective(walled_room, walled_room, Pose(), ContextWeights.sa_wall(), Context.FLOOR)
    assert "ver-target-missing" in result.flags
    assert result.terms.ver == 0.0


def test_self_match_recovers_identity(walled_room):
    result = optimize_pose(walled_room, walled_room, Context.FLOOR, ContextWeights.sa_floor(), FAST)
    assert result.terms.sem >= 0.999
    assert result.terms.mov >= 0.999
    assert result.objective == pytest.approx(120.0)


def test_rigid_motion_of_the_client_keeps_the_optimum(walled_room):
    shifted = bare_plan(
        "shifted",
        [(x + 1, y) for x, y in walled_room.boundary.exterior.coords[:-1]],
        [
            (r.id, r.label.value, [(x + 1, y) for x, y in r.shape.exterior.coords[:-1]])
            for r in walled_room.regions
        ],
    )
    a = optimize_pose(walled_room, walled_room, Context.FLOOR, ContextWeights.sa_floor(), FAST)
    b = optimize_pose(walled_room, shifted, Context.FLOOR, ContextWeights.sa_floor(), FAST)
    assert b.objective == pytest.approx(a.objective, abs=1e-3)
    assert b.pose.tx == pytest.approx(a.pose.tx - 1)


def test_disjoint_semantics_score_zero():
    all_floor = bare_plan("open", box_ring(0, 0, 3, 3), kind="host")
    all_table = bare_plan("desk", box_ring(0, 0, 2, 2), [("table-1", "table", box_ring(0, 0, 2, 2))])
    result = optimize_pose(all_floor, all_table, Context.FLOOR, ContextWeights.geometric(), FAST)
    assert result.terms.sem == pytest.approx(0.0, abs=1e-9)
    assert result.terms.size > 0


def test_optimizer_is_deterministic(corpus):
    host, client = corpus.plan("meeting-room-2"), corpus.plan("office-3")
    a = optimize_pose(host, client, Context.TABLE, ContextWeights.sa_table(), FAST)
    b = optimize_pose(host, client, Context.TABLE, ContextWeights.sa_table(), FAST)
    assert a == b
    assert a.pose.quarter_turns() is not None


def test_continuous_rotation_mode(walled_room):
    cfg = FAST.model_copy(update={"rotation_mode": RotationMode.CONTINUOUS})
    result = optimize_pose(walled_room, walled_room, Context.FLOOR, ContextWeights.sa_floor(), cfg)
    assert result.objective == pytest.approx(120.0)


def test_no_overlap_fails(walled_room):
    cfg = FAST.model_copy(update={"translation_bounds": (100.0, 100.0, 110.0, 110.0)})
    with pytest.raises(MatchFailedError):
        optimize_pose(walled_room, walled_room, Context.FLOOR, ContextWeights.sa_floor(), cfg)


def test_config_bounds():
    with pytest.raises(ValueError):
        MatchConfig(population=4)
    with pytest.raises(ValueError):
        MatchConfig(generations=5)


def test_matched_space_of_a_self_match(walled_room):
    host_map = semantic_map(walled_room, Context.TABLE)
    match = matched_space(host_map, host_map, Pose())
    assert match.unmatched.is_empty
    assert match.footprint.area == pytest.approx(walled_room.area)
    assert match.allowed.area == pytest.approx(host_map.walkable().area)
    assert match.interactable.area == pytest.approx(walled_room.area)


def test_matched_space_marks_label_mismatch(table_room, small_floor):
    host_map, client_map = maps(table_room, small_floor, Context.TABLE)
    match = matched_space(host_map, client_map, Pose(tx=1, ty=1))
    assert match.footprint.area == pytest.approx(4.0)
    assert match.unmatched.area == pytest.approx(2.0)
    assert match.obstacle.area == pytest.approx(2.0)
    assert match.allowed.area == pytest.approx(2.0)


def quarter_turned(fp):
    """Same plan turned by 90 degrees about the origin, coordinates swapped exactly."""
    model = to_model(fp)

    def turn(ring):
        return [(-y + 0.0, x) for x, y in ring]

    regions = [r.model_copy(update={"polygon": turn(r.polygon)}) for r in model.regions]
    return from_model(model.model_copy(update={"boundary": turn(model.boundary), "regions": regions}))


@pytest.mark.slow
def test_corpus_floor_self_matches(corpus):
    cfg = MatchConfig(population=32, generations=100)
    for fp in corpus.plans:
        result = optimize_pose(fp, fp, Context.FLOOR, ContextWeights.sa_floor(), cfg)
        assert result.terms.sem >= 0.99, fp.id
        assert result.terms.mov >= 0.99, fp.id


@pytest.mark.slow
@pytest.mark.parametrize(
    "host_id, client_id",
    [
        ("meeting-room-1", "home-1"),
        ("meeting-room-2", "office-2"),
        ("meeting-room-3", "home-3"),
        ("meeting-room-4", "office-4"),
        ("meeting-room-1", "office-5"),
    ],
)
def test_pre_rotated_client_scores_the_same(corpus, host_id, client_id):
    cfg = MatchConfig(population=32, generations=100)
    host, client = corpus.plan(host_id), corpus.plan(client_id)
    plain = optimize_pose(host, client, Context.FLOOR, ContextWeights.sa_floor(), cfg)
    turned = optimize_pose(host, quarter_turned(client), Context.FLOOR, ContextWeights.sa_floor(), cfg)
    assert turned.objective == pytest.approx(plain.objective, abs=1e-2)
