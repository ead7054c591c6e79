"""Shared fixtures: small hand built floorplans and the built in corpus."""

from typing import Sequence, Tuple

import pytest

from mutualspace.corpus import Corpus, builtin_corpus
from mutualspace.corpus.layouts import box_ring, plan
from mutualspace.floorplan import Floorplan, FloorplanModel, RegionModel, from_model


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run full corpus sweeps")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def bare_plan(
    plan_id: str,
    boundary: Sequence[Tuple[float, float]],
    regions: Sequence[Tuple[str, str, Sequence[Tuple[float, float]]]] = (),
    kind: str = "home",
) -> Floorplan:
    """Plan without the wall ring, regions given as (id, label, ring)."""
    model = FloorplanModel(
        id=plan_id,
        kind=kind,
        boundary=list(boundary),
        regions=[RegionModel(id=i, label=label, polygon=list(ring)) for i, label, ring in regions],
    )
    return from_model(model)


@pytest.fixture
def empty_room() -> Floorplan:
    return bare_plan("empty-4x4", box_ring(0, 0, 4, 4))


@pytest.fixture
def table_room() -> Floorplan:
    """16 m^2 room with a 2 m^2 table in the middle."""
    return bare_plan("table-4x4", box_ring(0, 0, 4, 4), [("table-1", "table", box_ring(1.5, 1, 2.5, 3))])


@pytest.fixture
def walled_room() -> Floorplan:
    """5 x 4 room with a wall ring, one table and a chair either side."""
    return from_model(
        plan(
            "walled-5x4",
            "office",
            box_ring(0, 0, 5, 4),
            tables=[box_ring(1.5, 1.5, 3.5, 2.5)],
            chairs=[(2.25, 0.9, 2.75, 1.4), (2.25, 2.6, 2.75, 3.1)],
        )
    )


@pytest.fixture
def table_only_room() -> Floorplan:
    """Walled room with a single table and nothing else that counts as an obstacle."""
    return from_model(plan("table-only", "home", box_ring(0, 0, 5, 5), tables=[box_ring(2, 2, 3, 3)]))


@pytest.fixture(scope="session")
def corpus() -> Corpus:
    return builtin_corpus()


@pytest.fixture(scope="session")
def small_corpus(corpus: Corpus) -> Corpus:
    """One host, one home, one office: a single H1-C2 combination."""
    return Corpus.of([corpus.plan("meeting-room-1"), corpus.plan("home-1"), corpus.plan("office-1")])
