import numpy as np
import pytest
from shapely.geometry import Point

from mutualspace.corpus import Corpus, builtin_corpus, load_corpus
from mutualspace.corpus.create_corpus import corpus_models, jitter, write_corpus
from mutualspace.corpus.layouts import HOSTS
from mutualspace.evaluation import Condition, enumerate_combinations
from mutualspace.floorplan import Context, SemanticLabel, dumps, from_model, semantic_map
from mutualspace.geometry import DISK_QUAD_SEGS
from mutualspace.misc import OVERLAP_EPS, PERSONAL_DIAMETER, CorpusError

SMALL_OFFICES = ("office-1", "office-3", "office-5")


def test_builtin_corpus_shape(corpus):
    assert len(corpus.plans) == 14
    assert [len(corpus.hosts), len(corpus.homes), len(corpus.offices)] == [4, 5, 5]
    assert [fp.id for fp in corpus.hosts] == ["meeting-room-1", "meeting-room-2", "meeting-room-3", "meeting-room-4"]
    for fp in corpus.homes + corpus.offices:
        assert fp.regions_with(SemanticLabel.TABLE), fp.id
        assert fp.regions_with(SemanticLabel.WALL), fp.id
        assert fp.regions_with(SemanticLabel.CHAIR), fp.id
        assert 4 <= fp.area <= 200


def test_small_offices_cap_the_shared_floor(corpus):
    # Shared floor lies inside every client's floor, each standing user needs a disk of it.
    disk = Point(0, 0).buffer(PERSONAL_DIAMETER / 2, quad_segs=DISK_QUAD_SEGS).area - OVERLAP_EPS
    for plan_id in SMALL_OFFICES:
        floor = semantic_map(corpus.plan(plan_id), Context.FLOOR).floor.area
        assert floor == pytest.approx(1.8)
        assert floor < 7 * disk
    for combo in enumerate_combinations(corpus, [Condition.H1_C6]):
        assert set(combo.clients) & set(SMALL_OFFICES), combo.combo_id


def test_unknown_plan(corpus):
    with pytest.raises(CorpusError):
        corpus.plan("garage-1")


def test_duplicate_ids_are_rejected(corpus):
    with pytest.raises(CorpusError):
        Corpus.of([corpus.plan("home-1"), corpus.plan("home-1")])


def test_write_is_deterministic(tmp_path):
    first = write_corpus(tmp_path / "a")
    second = write_corpus(tmp_path / "b")
    assert [p.name for p in first] == [p.name for p in second]
    assert len(first) == 14
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_load_corpus_from_disk(tmp_path, corpus):
    write_corpus(tmp_path)
    loaded = load_corpus(tmp_path)
    assert [fp.id for fp in loaded.plans] == [fp.id for fp in corpus.plans]
    for fp in loaded.plans:
        assert dumps(fp) == dumps(corpus.plan(fp.id))


def test_load_corpus_errors(tmp_path):
    with pytest.raises(CorpusError):
        load_corpus(tmp_path / "missing")
    with pytest.raises(CorpusError):
        load_corpus(tmp_path)
    (tmp_path / "broken.json").write_text("{}")
    with pytest.raises(CorpusError):
        load_corpus(tmp_path)


def test_jitter_is_seeded_and_valid():
    a = corpus_models(seed=3)
    b = corpus_models(seed=3)
    assert a == b
    assert a != corpus_models(seed=0)
    for model in a:
        from_model(model)
    assert builtin_corpus(seed=3).plan("home-1").id == "home-1"


def test_jitter_keeps_tables_and_walls():
    model = HOSTS[0]
    moved = jitter(model, np.random.default_rng(1))
    fixed = [r for r in model.regions if r.label in ("table", "wall")]
    assert fixed == [r for r in moved.regions if r.label in ("table", "wall")]
