"""Whole corpus sweeps. These take hours, run them with --runslow."""

import os

import pytest

from mutualspace.config import Method, RunConfig
from mutualspace.evaluation import Condition, aggregate, enumerate_combinations, output_path, report_csv, run_batch
from mutualspace.floorplan import from_model
from mutualspace.geometry import PolygonSet
from mutualspace.render import load_mutual_space
from mutualspace.subspace import personal_square

SA_METHODS = ("SA-Table", "SA-Wall", "SA-Floor")
CONDITIONS = [c.value for c in Condition]
JOBS = os.cpu_count() or 1

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def sweep(corpus, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("sweep")
    records = run_batch(corpus, RunConfig(), out_dir=out_dir, jobs=JOBS)
    return records, out_dir


@pytest.fixture(scope="module")
def report(sweep):
    records, _ = sweep
    return aggregate(records)


def cell(report, method, condition, n_hosts=1):
    return report.row(method, condition, n_hosts)


def test_sweep_covers_every_run(sweep):
    records, _ = sweep
    assert len(records) == 900 * len(Method) * 3


def test_subspaces_hold_their_invariants(corpus, sweep):
    _, out_dir = sweep
    checked = 0
    for method in (m for m in Method if m.allocates_subspaces):
        for combo in enumerate_combinations(corpus, [Condition.H1_C2]):
            for n_hosts in (1, 2, 3):
                space = load_mutual_space(output_path(out_dir, method, combo, n_hosts))
                if not space.success:
                    continue
                host_boundary = PolygonSet(from_model(space.host).boundary)
                for client in space.clients:
                    sub = client.subspace
                    square = personal_square(space.positions[client.owner], client.pose.theta)
                    assert sub.region.geom.buffer(1e-6).contains(square), (method, combo.combo_id, client.owner)
                    assert (sub.region - (host_boundary & client.boundary)).area <= 1e-4
                    assert (sub.region & client.unmatched).area <= 0.05 + 1e-9
                    checked += 1
    assert checked


def test_success_rates(report):
    for condition in CONDITIONS:
        for n_hosts in (1, 2, 3):
            assert cell(report, "SA-Floor", condition, n_hosts)["success_rate"] == 1.0
            assert cell(report, "S-ISA", condition, n_hosts)["success_rate"] == 1.0
    rates = {(c, n): cell(report, "S-TI", c, n)["success_rate"] for c in CONDITIONS for n in (1, 2, 3)}
    for n_hosts in (1, 2, 3):
        assert rates["H1-C2", n_hosts] >= rates["H1-C4", n_hosts] >= rates["H1-C6", n_hosts] == 0.0
    for condition in CONDITIONS:
        assert rates[condition, 1] >= rates[condition, 2] >= rates[condition, 3]


def test_area_trends(report):
    for method in SA_METHODS:
        c2 = cell(report, method, "H1-C2")["total_interactable_mean"]
        c6 = cell(report, method, "H1-C6")["total_interactable_mean"]
        assert c6 > c2, method
    shared_c2 = cell(report, "S-TI", "H1-C2")["total_interactable_mean"]
    shared_c4 = cell(report, "S-TI", "H1-C4")["total_interactable_mean"]
    assert shared_c4 < shared_c2
    for condition in CONDITIONS:
        shared = cell(report, "S-TI", condition)["total_obstacle_mean"]
        if shared is None:
            continue
        for method in SA_METHODS:
            assert cell(report, method, condition)["total_obstacle_mean"] < shared, (method, condition)


def test_clients_get_room_to_work(report):
    for method in SA_METHODS:
        for condition in ("H1-C2", "H1-C4"):
            assert cell(report, method, condition)["client_interactable_mean"] > 3.0, (method, condition)


def test_h1_c2_sweep_is_reproducible(corpus, sweep, tmp_path):
    records, out_dir = sweep
    again = run_batch(corpus, RunConfig(), conditions=[Condition.H1_C2], out_dir=tmp_path, jobs=JOBS)
    first = [r for r in records if r.condition == "H1-C2"]
    assert again == first
    a = report_csv(aggregate(first), tmp_path / "first.csv").read_bytes()
    b = report_csv(aggregate(again), tmp_path / "again.csv").read_bytes()
    assert a == b
    runs = sorted(p.relative_to(tmp_path) for p in tmp_path.glob("*/H1-C2/*/*.json"))
    assert len(runs) == len(first)
    for run in runs:
        assert (tmp_path / run).read_bytes() == (out_dir / run).read_bytes(), str(run)
