"""Batch evaluation: space combinations, the five methods, per run metrics, aggregation and CSV reports."""

import concurrent.futures
import csv
import enum
import itertools
import logging
import math
import os
import pathlib
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import pydantic
import tqdm

from mutualspace.config import Method, RunConfig
from mutualspace.corpus import Corpus
from mutualspace.floorplan import Context, Floorplan, semantic_map, to_model
from mutualspace.geometry import PolygonSet, unite
from mutualspace.matching import ContextWeights, MatchedSpace, MatchResult, matched_space, optimize_pose
from mutualspace.misc import CB, GB, RB, RST, CorpusError, MatchFailedError, TargetNotFoundError, C, Y
from mutualspace.placement import HOST_OWNER, client_owner, place_users
from mutualspace.scenegraph import TargetPair, TargetSelection, select_target
from mutualspace.subspace import ClientSpace, MutualSpace, allocate, extract_subspace, total_interactable

logger = logging.getLogger(__name__)

HOST_COUNTS = (1, 2, 3)
AREA_METRICS = ("total_interactable", "total_obstacle", "client_interactable", "client_obstacle")

# Published mean total interactable / obstacle area (m^2) with one host user. Shown next to measured values only.
REFERENCE_MEANS: Dict[Tuple[str, str], Tuple[float, float]] = {
    ("SA-Table", "H1-C2"): (8.79, 1.00),
    ("SA-Wall", "H1-C2"): (8.47, 1.73),
    ("SA-Floor", "H1-C2"): (8.08, 1.12),
    ("S-ISA", "H1-C2"): (8.02, 1.73),
    ("S-TI", "H1-C2"): (6.40, 6.04),
    ("SA-Table", "H1-C4"): (11.98, 2.21),
    ("SA-Wall", "H1-C4"): (11.72, 2.65),
    ("SA-Floor", "H1-C4"): (10.84, 1.92),
    ("S-ISA", "H1-C4"): (10.80, 3.53),
    ("S-TI", "H1-C4"): (5.25, 6.09),
    ("SA-Table", "H1-C6"): (12.61, 2.24),
    ("SA-Wall", "H1-C6"): (12.57, 3.67),
    ("SA-Floor", "H1-C6"): (11.51, 2.82),
    ("S-ISA", "H1-C6"): (10.96, 4.48),
}


class Condition(enum.Enum):
    H1_C2 = "H1-C2"
    H1_C4 = "H1-C4"
    H1_C6 = "H1-C6"

    @property
    def per_kind(self) -> int:
        """Homes, and offices, taken per combination."""
        return {"H1-C2": 1, "H1-C4": 2, "H1-C6": 3}[self.value]

    @property
    def n_clients(self) -> int:
        return 2 * self.per_kind


class Combination(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    host: str
    clients: Tuple[str, ...]
    condition: Condition

    @property
    def combo_id(self) -> str:
        return f"{self.host}__{'+'.join(self.clients)}"


class MetricsRecord(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    method: str
    condition: str
    combo_id: str
    n_hosts: int
    success: bool
    failure: Optional[str] = None
    total_interactable: float = 0.0
    total_obstacle: float = 0.0
    per_client_interactable: List[float] = []
    per_client_obstacle: List[float] = []


class RunOutput(pydantic.BaseModel):
    """What one run writes to disk: the record plus the mutual space it was measured on."""

    metrics: MetricsRecord
    mutual_space: MutualSpace

    def dumps(self) -> str:
        return self.model_dump_json(indent=2) + "\n"


class MatchOutcome(pydantic.BaseModel):
    """Cached client match, or why there is none."""

    model_config = pydantic.ConfigDict(frozen=True)

    result: Optional[MatchResult] = None
    failure: Optional[str] = None


# (weights, context, host id, client id)
MatchKey = Tuple[Tuple[float, ...], str, str, str]


def match_key(weights: ContextWeights, context: Context, host_id: str, client_id: str) -> MatchKey:
    return weights.as_tuple(), Context(context).value, host_id, client_id


def enumerate_combinations(corpus: Corpus, conditions: Optional[Sequence[Condition]] = None) -> List[Combination]:
    """Host x homes x offices, in condition order then lexicographic by id."""
    if not corpus.hosts or not corpus.homes or not corpus.offices:
        raise CorpusError(
            f"need hosts, homes and offices, got {len(corpus.hosts)}/{len(corpus.homes)}/{len(corpus.offices)}"
        )
    hosts = sorted(p.id for p in corpus.hosts)
    homes = sorted(p.id for p in corpus.homes)
    offices = sorted(p.id for p in corpus.offices)
    combos: List[Combination] = []
    for condition in conditions or list(Condition):
        for host in hosts:
            for home_set in itertools.combinations(homes, condition.per_kind):
                for office_set in itertools.combinations(offices, condition.per_kind):
                    combos.append(Combination(host=host, clients=home_set + office_set, condition=condition))
    return combos


def match_client(
    method: Method,
    host_fp: Floorplan,
    client_fp: Floorplan,
    cfg: RunConfig,
    context: Optional[Context] = None,
) -> MatchOutcome:
    """Target selection and pose optimization for one client, failures kept as values."""
    context = context or method.context
    try:
        targets = select_target(host_fp, client_fp, context)
        result = optimize_pose(host_fp, client_fp, context, cfg.method_weights(method), cfg.match_config(), targets)
    except (TargetNotFoundError, MatchFailedError) as exc:
        return MatchOutcome(failure=f"{client_fp.id}: {exc}")
    return MatchOutcome(result=result)


def _failed(method: Method, host_fp: Floorplan, context: Context, reason: str) -> MutualSpace:
    logger.debug("%s%s failed: %s", Y, method.value, reason)
    return MutualSpace(method=method.value, context=context, host=to_model(host_fp), success=False, failure=reason)


def _pair_of(context: Context, result: MatchResult) -> TargetPair:
    return TargetPair(
        context=context,
        host=TargetSelection(region_id=result.host_target),
        client=TargetSelection(region_id=result.client_target),
    )


def _target_zone(host_fp: Floorplan, context: Context, region_id: str) -> Optional[PolygonSet]:
    if context is Context.FLOOR:
        return None
    return PolygonSet(host_fp.region(region_id).shape)


def _common_space(host_map, matches: Sequence[MatchedSpace]) -> Tuple[PolygonSet, PolygonSet, PolygonSet]:
    """Per label intersection of the host and every moved client: (interactable, obstacle, walkable)."""
    common: Dict[str, PolygonSet] = dict(host_map.classes())
    footprint = host_map.boundary
    for match in matches:
        footprint = footprint & match.moved.boundary
        moved = match.moved.classes()
        common = {name: layer & moved.get(name, PolygonSet()) for name, layer in common.items()}
    matched = unite(common.values())
    obstacle = unite([common.get("obstacle", PolygonSet()), footprint - matched])
    names = ("floor", "chair") if host_map.context is Context.TABLE else ("floor",)
    walkable = unite(common[n] for n in names if n in common)
    return matched - common.get("obstacle", PolygonSet()), obstacle, walkable


def build_mutual_space(
    method: Method,
    host_fp: Floorplan,
    client_fps: Sequence[Floorplan],
    cfg: RunConfig,
    n_hosts: Optional[int] = None,
    outcomes: Optional[Sequence[MatchOutcome]] = None,
    context: Optional[Context] = None,
) -> MutualSpace:
    """Whole pipeline for one host and its clients: match, place users, then allocate subspaces or intersect."""
    context = Context(context or method.context)
    if outcomes is None:
        outcomes = [match_client(method, host_fp, fp, cfg, context) for fp in client_fps]
    for outcome in outcomes:
        if outcome.result is None:
            return _failed(method, host_fp, context, f"match: {outcome.failure}")
    results = [o.result for o in outcomes if o.result is not None]
    if not results:
        return _failed(method, host_fp, context, "no clients")
    host_map = semantic_map(host_fp, context)
    client_maps = [semantic_map(fp, context) for fp in client_fps]
    matches = [matched_space(host_map, cmap, r.pose, k) for k, (cmap, r) in enumerate(zip(client_maps, results))]
    targets = _pair_of(context, results[0])
    clients = [ClientSpace.of(client_owner(k), m, r) for k, (m, r) in enumerate(zip(matches, results))]
    placement_cfg = cfg.placement_config(len(client_fps), n_hosts)

    if not method.allocates_subspaces:
        interactable, obstacle, walkable = _common_space(host_map, matches)
        allowed = {HOST_OWNER: walkable, **{client_owner(m.client_index): walkable for m in matches}}
        placement, _ = place_users(
            host_fp, host_map, matches, targets, placement_cfg, allowed=allowed, fit_squares=False
        )
        if not placement.success:
            return _failed(method, host_fp, context, "placement: shared region cannot hold every user")
        return MutualSpace(
            method=method.value,
            context=context,
            host=to_model(host_fp),
            host_target=targets.host.region_id,
            clients=clients,
            positions=placement.positions,
            shared_region=interactable,
            shared_obstacle=obstacle,
            success=True,
        )

    placement, _ = place_users(host_fp, host_map, matches, targets, placement_cfg)
    if not placement.success:
        empty = ", ".join(placement.empty_users)
        return _failed(method, host_fp, context, f"placement: {'no candidates for ' + empty if empty else 'infeasible'}")
    sweep_cfg = cfg.sweep_config()
    subspaces = [
        extract_subspace(m, placement.positions[client_owner(m.client_index)], sweep_cfg, client_owner(m.client_index))
        for m in matches
    ]
    return allocate(
        to_model(host_fp),
        context,
        clients,
        subspaces,
        target_zone=_target_zone(host_fp, context, targets.host.region_id),
        positions=placement.positions,
        method=method.value,
        host_target=targets.host.region_id,
    )


def measure(space: MutualSpace, n_clients: int) -> Dict[str, Any]:
    """Area metrics recomputed from a mutual space alone."""
    if not space.success:
        return {"total_interactable": 0.0, "total_obstacle": 0.0, "per_client_interactable": [], "per_client_obstacle": []}
    if space.shared_region is not None:
        shared = space.shared_region.area
        obstacle = space.shared_obstacle.area if space.shared_obstacle is not None else 0.0
        return {
            "total_interactable": shared,
            "total_obstacle": obstacle,
            "per_client_interactable": [shared] * n_clients,
            "per_client_obstacle": [obstacle] * n_clients,
        }
    subspaces = space.subspaces()
    return {
        "total_interactable": total_interactable(space),
        "total_obstacle": float(sum(s.obstacle_area for s in subspaces)),
        "per_client_interactable": [s.interactable_area for s in subspaces],
        "per_client_obstacle": [s.obstacle_area for s in subspaces],
    }


def run_combination(
    method: Method,
    combo: Combination,
    n_hosts: int,
    cfg: RunConfig,
    corpus: Corpus,
    outcomes: Optional[Dict[MatchKey, MatchOutcome]] = None,
) -> RunOutput:
    host_fp = corpus.plan(combo.host)
    client_fps = [corpus.plan(c) for c in combo.clients]
    picked = None
    if outcomes is not None:
        weights, context = cfg.method_weights(method), method.context
        picked = [outcomes[match_key(weights, context, combo.host, c)] for c in combo.clients]
    space = build_mutual_space(method, host_fp, client_fps, cfg, n_hosts, picked)
    record = MetricsRecord(
        method=method.value,
        condition=combo.condition.value,
        combo_id=combo.combo_id,
        n_hosts=n_hosts,
        success=space.success,
        failure=space.failure,
        **measure(space, len(client_fps)),
    )
    return RunOutput(metrics=record, mutual_space=space)


def run_method(method: Method, combo: Combination, n_hosts: int, cfg: RunConfig, corpus: Corpus) -> MetricsRecord:
    """Metrics of one method on one combination. Failures come back as success=False."""
    return run_combination(method, combo, n_hosts, cfg, corpus).metrics


def output_path(out_dir: pathlib.Path, method: Method, combo: Combination, n_hosts: int) -> pathlib.Path:
    return out_dir / method.value / combo.condition.value / combo.combo_id / f"mutual_space_h{n_hosts}.json"


def _write(path: pathlib.Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _existing(path: pathlib.Path) -> Optional[MetricsRecord]:
    if not path.is_file():
        return None
    try:
        return RunOutput.model_validate_json(path.read_text(encoding="utf-8")).metrics
    except (pydantic.ValidationError, ValueError):
        logger.warning("%sIgnoring unreadable output %s", Y, path)
        return None


# Worker state, set once per process so the corpus is not pickled for every task.
_WORKER: Dict[str, Any] = {}


def _init_worker(corpus: Corpus, cfg: RunConfig) -> None:
    _WORKER["corpus"], _WORKER["cfg"] = corpus, cfg


def _init_pool_worker(corpus: Corpus, cfg: RunConfig) -> None:
    _init_worker(corpus, cfg)
    logging.getLogger("mutualspace").setLevel(logging.WARNING)


def _match_job(key: MatchKey, method: Method) -> Tuple[MatchKey, MatchOutcome]:
    corpus: Corpus = _WORKER["corpus"]
    _, context, host_id, client_id = key
    outcome = match_client(method, corpus.plan(host_id), corpus.plan(client_id), _WORKER["cfg"], Context(context))
    return key, outcome


def _combination_job(
    method: Method,
    combo: Combination,
    n_hosts: int,
    outcomes: Dict[MatchKey, MatchOutcome],
) -> RunOutput:
    return run_combination(method, combo, n_hosts, _WORKER["cfg"], _WORKER["corpus"], outcomes)


def _run_jobs(jobs: int, corpus: Corpus, cfg: RunConfig, fn, args: List[tuple], desc: str) -> List[Any]:
    """Run fn over args on up to jobs processes, results in argument order."""
    if jobs <= 1:
        _init_worker(corpus, cfg)
        return [fn(*a) for a in tqdm.tqdm(args, desc=desc)]
    results: List[Any] = [None] * len(args)
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs, initializer=_init_pool_worker, initargs=(corpus, cfg)) as pool:
        futures = {pool.submit(fn, *a): i for i, a in enumerate(args)}
        for future in tqdm.tqdm(concurrent.futures.as_completed(futures), total=len(futures), desc=desc):
            results[futures[future]] = future.result()
    return results


def run_batch(
    corpus: Corpus,
    cfg: RunConfig,
    methods: Optional[Sequence[Method]] = None,
    conditions: Optional[Sequence[Condition]] = None,
    host_counts: Sequence[int] = HOST_COUNTS,
    out_dir: Optional[pathlib.Path] = None,
    jobs: int = 1,
) -> List[MetricsRecord]:
    """Every (method, combination, host count) run, skipping runs whose output already exists."""
    methods = list(methods or Method)
    combos = enumerate_combinations(corpus, conditions)
    tasks = [(m, c, n) for m in methods for c in combos for n in host_counts]
    records: Dict[int, MetricsRecord] = {}
    pending: List[int] = []
    for i, (method, combo, n_hosts) in enumerate(tasks):
        done = _existing(output_path(out_dir, method, combo, n_hosts)) if out_dir is not None else None
        if done is not None:
            records[i] = done
        else:
            pending.append(i)
    if records:
        logger.info("%sResuming, %s of %s runs already done", C, len(records), len(tasks))

    needed: Dict[MatchKey, Method] = {}
    for i in pending:
        method, combo, _ = tasks[i]
        for client in combo.clients:
            key = match_key(cfg.method_weights(method), method.context, combo.host, client)
            needed.setdefault(key, method)
    keys = sorted(needed)
    matched = _run_jobs(jobs, corpus, cfg, _match_job, [(k, needed[k]) for k in keys], "Matching spaces")
    outcomes = dict(matched)

    args = []
    for i in pending:
        method, combo, n_hosts = tasks[i]
        weights = cfg.method_weights(method)
        subset = {match_key(weights, method.context, combo.host, c): None for c in combo.clients}
        args.append((method, combo, n_hosts, {k: outcomes[k] for k in subset}))
    outputs = _run_jobs(jobs, corpus, cfg, _combination_job, args, "Evaluating combinations")
    for i, output in zip(pending, outputs):
        records[i] = output.metrics
        if out_dir is not None:
            method, combo, n_hosts = tasks[i]
            _write(output_path(out_dir, method, combo, n_hosts), output.dumps())
    return [records[i] for i in range(len(tasks))]


class AggregateReport(pydantic.BaseModel):
    """One row per (method, condition, n_hosts); area columns are None where no record qualifies."""

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    rows: List[Dict[str, Any]] = []

    @staticmethod
    def columns() -> List[str]:
        cols = ["method", "condition", "n_hosts", "combinations", "successes", "success_rate"]
        for metric in AREA_METRICS:
            cols.extend(f"{metric}_{stat}" for stat in ("n", "mean", "sd", "sem"))
        return cols

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.columns())

    def row(self, method: str, condition: str, n_hosts: int) -> Dict[str, Any]:
        for row in self.rows:
            if (row["method"], row["condition"], row["n_hosts"]) == (method, condition, n_hosts):
                return row
        raise KeyError((method, condition, n_hosts))


def _stats(values: Iterable[float]) -> Dict[str, Optional[float]]:
    data = np.asarray(list(values), dtype=float)
    if not len(data):
        return {"n": 0, "mean": None, "sd": None, "sem": None}
    sd = float(np.std(data, ddof=1)) if len(data) > 1 else 0.0
    return {"n": int(len(data)), "mean": float(data.mean()), "sd": sd, "sem": sd / math.sqrt(len(data))}


def _sort_key(method: str, condition: str, n_hosts: int) -> Tuple[int, int, int]:
    method_order = {m.value: i for i, m in enumerate(Method)}
    condition_order = {c.value: i for i, c in enumerate(Condition)}
    return method_order.get(method, len(method_order)), condition_order.get(condition, len(condition_order)), n_hosts


def aggregate(records: Sequence[MetricsRecord]) -> AggregateReport:
    """Success rate per cell; area statistics over successful one host runs only."""
    if not records:
        return AggregateReport()
    df = pd.DataFrame([r.model_dump() for r in records])
    rows = []
    for (method, condition, n_hosts), cell in df.groupby(["method", "condition", "n_hosts"], sort=False):
        n_hosts = int(n_hosts)
        row: Dict[str, Any] = {
            "method": method,
            "condition": condition,
            "n_hosts": n_hosts,
            "combinations": int(len(cell)),
            "successes": int(cell["success"].sum()),
            "success_rate": float(cell["success"].mean()),
        }
        good = cell[cell["success"]] if n_hosts == 1 else cell.iloc[0:0]
        series = {
            "total_interactable": good["total_interactable"],
            "total_obstacle": good["total_obstacle"],
            "client_interactable": good["per_client_interactable"].explode().dropna(),
            "client_obstacle": good["per_client_obstacle"].explode().dropna(),
        }
        for metric, values in series.items():
            for stat, value in _stats(values).items():
                row[f"{metric}_{stat}"] = value
        rows.append(row)
    rows.sort(key=lambda r: _sort_key(r["method"], r["condition"], r["n_hosts"]))
    return AggregateReport(rows=rows)


def report_csv(report: AggregateReport, path: pathlib.Path) -> pathlib.Path:
    """Write the aggregate as CSV, one row per cell, absent values left empty."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report.frame().to_csv(path, index=False, quoting=csv.QUOTE_MINIMAL, float_format="%.10g", na_rep="", lineterminator="\n")
    return path


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.2f}"


def log_summary(report: AggregateReport) -> None:
    """Print the aggregate, with the published means beside the one host area cells."""
    for row in report.rows:
        rate = row["success_rate"]
        color = GB if rate >= 1.0 else (RB if rate <= 0.0 else Y)
        line = f"{row['method']:>9} {row['condition']} hosts={row['n_hosts']} success {color}{rate:6.2%}{RST}"
        if row["n_hosts"] == 1:
            reference = REFERENCE_MEANS.get((row["method"], row["condition"]))
            line += (
                f"  interactable {_fmt(row['total_interactable_mean'])}"
                f" obstacle {_fmt(row['total_obstacle_mean'])}"
            )
            if reference is not None:
                line += f"  {C}(published {reference[0]:.2f} / {reference[1]:.2f}){RST}"
        logger.info("%s%s", CB, line)
