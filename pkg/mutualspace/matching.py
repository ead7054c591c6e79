"""Context aware spatial matching: the five match terms, the weighted objective and the pose optimizer."""

import enum
import logging
import math
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
import pydantic
from scipy.optimize import differential_evolution
from shapely.geometry import Polygon

from mutualspace.floorplan import Context, Floorplan, SemanticLabel, SemanticMap, WallFace, semantic_map, wall_face, wall_faces
from mutualspace.geometry import (
    PolygonSet,
    Pose,
    aligned_boundary_length,
    aligned_segment_length,
    perimeter,
    segments_of,
    transform_geometry,
    unite,
)
from mutualspace.misc import AREA_EPS, BOUNDARY_EPSILON, GEOMETRIC_WEIGHT, INTERACTION_WEIGHT, B, MatchFailedError, Y
from mutualspace.scenegraph import TargetPair, select_target

logger = logging.getLogger(__name__)

NO_OVERLAP = -1.0
TERM_NAMES = ("sem", "size", "hor", "ver", "mov")
# Label classes a user can touch or walk on once matched; everything else that is matched is an obstacle.
INTERACTABLE_CLASSES = ("table", "wall", "floor", "chair")


class ContextWeights(pydantic.BaseModel):
    """Weights of the semantic, size, horizontal, vertical and movable floor terms."""

    model_config = pydantic.ConfigDict(frozen=True)

    w1: float = GEOMETRIC_WEIGHT
    w2: float = GEOMETRIC_WEIGHT
    w3: float = 0.0
    w4: float = 0.0
    w5: float = 0.0

    @pydantic.field_validator("w1", "w2", "w3", "w4", "w5")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if value < 0 or not math.isfinite(value):
            raise ValueError(f"weights must be finite and >= 0, got {value}")
        return value

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "ContextWeights":
        if len(values) != 5:
            raise ValueError(f"need 5 weights, got {len(values)}")
        return cls(**{f"w{i + 1}": float(v) for i, v in enumerate(values)})

    @classmethod
    def sa_table(cls) -> "ContextWeights":
        return cls(w3=INTERACTION_WEIGHT)

    @classmethod
    def sa_wall(cls) -> "ContextWeights":
        return cls(w4=INTERACTION_WEIGHT)

    @classmethod
    def sa_floor(cls) -> "ContextWeights":
        return cls(w5=INTERACTION_WEIGHT)

    @classmethod
    def geometric(cls) -> "ContextWeights":
        """Geometric terms only, shared by both baselines."""
        return cls()

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return self.w1, self.w2, self.w3, self.w4, self.w5

    def active_terms(self) -> Set[str]:
        return {name for name, w in zip(TERM_NAMES, self.as_tuple()) if w > 0}

    def combine(self, terms: "MatchTerms") -> float:
        return float(sum(w * t for w, t in zip(self.as_tuple(), terms.as_tuple())))


class RotationMode(enum.Enum):
    QUARTER_TURNS = "quarter-turns"
    CONTINUOUS = "continuous"


class MatchConfig(pydantic.BaseModel):
    """Optimizer settings. translation_bounds default to the host box grown by the client diagonal."""

    model_config = pydantic.ConfigDict(frozen=True)

    rotation_mode: RotationMode = RotationMode.QUARTER_TURNS
    population: int = pydantic.Field(default=16, ge=8)
    generations: int = pydantic.Field(default=40, ge=20)
    seed: int = 0
    boundary_epsilon: float = pydantic.Field(default=BOUNDARY_EPSILON, gt=0)
    translation_bounds: Optional[Tuple[float, float, float, float]] = None


class MatchTerms(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    sem: float = 0.0
    size: float = 0.0
    hor: float = 0.0
    ver: float = 0.0
    mov: float = 0.0

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return self.sem, self.size, self.hor, self.ver, self.mov


class MatchResult(pydantic.BaseModel):
    """Pose of one client in host coordinates with its objective and individual terms."""

    model_config = pydantic.ConfigDict(frozen=True)

    pose: Pose
    objective: float
    terms: MatchTerms
    host_target: str
    client_target: str
    flags: Tuple[str, ...] = ()


def _ratio(numerator: float, denominator: float) -> float:
    if denominator <= AREA_EPS:
        return 0.0
    return min(1.0, max(0.0, numerator / denominator))


def _sem(host_map: SemanticMap, moved: SemanticMap) -> float:
    overlap = host_map.boundary.geom.intersection(moved.boundary.geom).area
    if overlap <= AREA_EPS:
        return 0.0
    host_classes, moved_classes = host_map.classes(), moved.classes()
    matched = 0.0
    for name, layer in host_classes.items():
        other = moved_classes.get(name)
        if other is None or layer.is_empty or other.is_empty:
            continue
        matched += layer.geom.intersection(other.geom).area
    return _ratio(matched, overlap)


def _size(host_map: SemanticMap, moved: SemanticMap) -> float:
    return _ratio(host_map.boundary.geom.intersection(moved.boundary.geom).area, host_map.boundary.area)


def _mov(host_map: SemanticMap, moved: SemanticMap) -> float:
    if host_map.movable_floor.is_empty or moved.movable_floor.is_empty:
        return 0.0
    shared = host_map.movable_floor.geom.intersection(moved.movable_floor.geom).area
    return _ratio(shared, host_map.movable_floor.area)


def psi_g_sem(host_map: SemanticMap, client_map: SemanticMap, pose: Pose) -> float:
    """Share of the host/client overlap where both plans carry the same label class."""
    return _sem(host_map, client_map.transformed(pose))


def psi_g_size(host_map: SemanticMap, client_map: SemanticMap, pose: Pose) -> float:
    """Share of the host boundary covered by the client boundary."""
    return _size(host_map, client_map.transformed(pose))


def psi_i_hor(host_table: Polygon, client_table: Polygon, pose: Pose, eps: float = BOUNDARY_EPSILON) -> float:
    """Share of the host table perimeter that the client table's edge follows."""
    moved = transform_geometry(client_table, pose)
    return _ratio(aligned_boundary_length(host_table, moved, eps), perimeter(host_table))


def psi_i_ver(
    host_wall: WallFace,
    client_walls: Sequence[WallFace],
    pose: Pose,
    eps: float = BOUNDARY_EPSILON,
) -> float:
    """Share of the host target wall's inner face backed by a parallel client wall face."""
    moved = [w.face.transformed(pose) for w in client_walls]
    covered = aligned_segment_length(segments_of(host_wall.face), segments_of(moved), eps)
    return _ratio(covered, host_wall.face.length)


def psi_i_mov(host_map: SemanticMap, client_map: SemanticMap, pose: Pose) -> float:
    """Share of host movable floor that lands on client movable floor."""
    return _mov(host_map, client_map.transformed(pose))


class MatchProblem(object):
    """One host/client pair under a context, with targets resolved and term evaluation ready."""

    def __init__(
        self,
        host_fp: Floorplan,
        client_fp: Floorplan,
        context: Context,
        weights: ContextWeights,
        targets: TargetPair,
        boundary_epsilon: float = BOUNDARY_EPSILON,
        host_map: Optional[SemanticMap] = None,
        client_map: Optional[SemanticMap] = None,
    ) -> None:
        self.host_fp = host_fp
        self.client_fp = client_fp
        self.context = Context(context)
        self.weights = weights
        self.targets = targets
        self.eps = boundary_epsilon
        self.host_map = host_map or semantic_map(host_fp, self.context)
        self.client_map = client_map or semantic_map(client_fp, self.context)
        self.flags: List[str] = []
        self.host_table = self._target_shape(host_fp, targets.host.region_id, SemanticLabel.TABLE)
        self.client_table = self._target_shape(client_fp, targets.client.region_id, SemanticLabel.TABLE)
        self.host_wall: Optional[WallFace] = None
        if self._is_label(host_fp, targets.host.region_id, SemanticLabel.WALL):
            self.host_wall = wall_face(host_fp, targets.host.region_id)
        self.client_walls = wall_faces(client_fp)
        if weights.w3 > 0 and (self.host_table is None or self.client_table is None):
            self.flags.append("hor-target-missing")
        if weights.w4 > 0 and (self.host_wall is None or not self.client_walls):
            self.flags.append("ver-target-missing")

    @staticmethod
    def _is_label(fp: Floorplan, region_id: str, label: SemanticLabel) -> bool:
        return any(r.id == region_id and r.label is label for r in fp.regions)

    def _target_shape(self, fp: Floorplan, region_id: str, label: SemanticLabel) -> Optional[Polygon]:
        return fp.region(region_id).shape if self._is_label(fp, region_id, label) else None

    @property
    def pivot(self) -> Tuple[float, float]:
        """Client boundary centroid, the point the optimizer moves around."""
        centroid = self.client_fp.boundary.centroid
        return centroid.x, centroid.y

    def terms(self, pose: Pose, needed: Optional[Set[str]] = None) -> MatchTerms:
        """Evaluate terms at a pose; terms not in needed stay 0."""
        needed = set(TERM_NAMES) if needed is None else needed
        moved = self.client_map.transformed(pose)
        values: Dict[str, float] = {}
        if "sem" in needed:
            values["sem"] = _sem(self.host_map, moved)
        if "size" in needed:
            values["size"] = _size(self.host_map, moved)
        if "hor" in needed and self.host_table is not None and self.client_table is not None:
            values["hor"] = psi_i_hor(self.host_table, self.client_table, pose, self.eps)
        if "ver" in needed and self.host_wall is not None and self.client_walls:
            values["ver"] = psi_i_ver(self.host_wall, self.client_walls, pose, self.eps)
        if "mov" in needed:
            values["mov"] = _mov(self.host_map, moved)
        return MatchTerms(**values)

    def overlaps(self, pose: Pose) -> bool:
        moved = transform_geometry(self.client_fp.boundary, pose)
        return self.host_fp.boundary.intersection(moved).area > AREA_EPS

    def search_value(self, pose: Pose) -> float:
        """Objective seen by the optimizer: weighted sum, or -1 when the plans do not overlap."""
        if not self.overlaps(pose):
            return NO_OVERLAP
        return self.weights.combine(self.terms(pose, self.weights.active_terms()))

    def result(self, pose: Pose) -> MatchResult:
        terms = self.terms(pose)
        return MatchResult(
            pose=pose,
            objective=self.weights.combine(terms),
            terms=terms,
            host_target=self.targets.host.region_id,
            client_target=self.targets.client.region_id,
            flags=tuple(self.flags),
        )


def objective(
    host_fp: Floorplan,
    client_fp: Floorplan,
    pose: Pose,
    weights: ContextWeights,
    context: Context,
    targets: Optional[TargetPair] = None,
    boundary_epsilon: float = BOUNDARY_EPSILON,
) -> MatchResult:
    """Weighted sum of all five terms at one pose, no search."""
    if targets is None:
        targets = select_target(host_fp, client_fp, context)
    return MatchProblem(host_fp, client_fp, context, weights, targets, boundary_epsilon).result(pose)


class _BestTracker(object):
    """Objective callable for the optimizer that remembers the best pose it was ever asked about."""

    def __init__(self, problem: MatchProblem, theta: Optional[float]) -> None:
        self.problem = problem
        self.theta = theta
        self.best_value = -math.inf
        self.best_pose: Optional[Pose] = None
        self.evaluations = 0

    def pose_of(self, x: np.ndarray) -> Pose:
        theta = self.theta if self.theta is not None else float(x[2])
        return Pose.about(self.problem.pivot, theta, (float(x[0]), float(x[1])))

    def __call__(self, x: np.ndarray) -> float:
        pose = self.pose_of(x)
        value = self.problem.search_value(pose)
        self.evaluations += 1
        if value > self.best_value:
            self.best_value, self.best_pose = value, pose
        return -value


def _bounds(problem: MatchProblem, cfg: MatchConfig) -> Tuple[float, float, float, float]:
    if cfg.translation_bounds is not None:
        return cfg.translation_bounds
    minx, miny, maxx, maxy = problem.host_fp.boundary.bounds
    cminx, cminy, cmaxx, cmaxy = problem.client_fp.boundary.bounds
    diagonal = math.hypot(cmaxx - cminx, cmaxy - cminy)
    return minx - diagonal, miny - diagonal, maxx + diagonal, maxy + diagonal


def _rotate(vec: Tuple[float, float], theta: float) -> Tuple[float, float]:
    landing = Pose(theta=theta).apply(*vec)
    return landing[0], landing[1]


def seed_landings(problem: MatchProblem, theta: float) -> List[Tuple[float, float]]:
    """Landing points of the client pivot that line up targets, centroids and box corners."""
    px, py = problem.pivot
    host = problem.host_fp.boundary
    seeds: List[Tuple[float, float]] = []

    def land(host_point: Tuple[float, float], client_point: Tuple[float, float]) -> None:
        ox, oy = _rotate((client_point[0] - px, client_point[1] - py), theta)
        seeds.append((host_point[0] - ox, host_point[1] - oy))

    if problem.host_table is not None and problem.client_table is not None:
        land(problem.host_table.centroid.coords[0], problem.client_table.centroid.coords[0])
    if problem.host_wall is not None:
        client_id = problem.targets.client.region_id
        client_face = next((w for w in problem.client_walls if w.region_id == client_id), None)
        if client_face is not None:
            land(problem.host_wall.face.midpoint.as_tuple(), client_face.face.midpoint.as_tuple())
    land(host.centroid.coords[0], (px, py))
    moved = transform_geometry(problem.client_fp.boundary, Pose(theta=theta))
    hminx, hminy, hmaxx, hmaxy = host.bounds
    cminx, cminy, cmaxx, cmaxy = moved.bounds
    for hx, cx in ((hminx, cminx), (hmaxx, cmaxx)):
        for hy, cy in ((hminy, cminy), (hmaxy, cmaxy)):
            # Moved box corner (cx, cy) is the pivot image offset by (cx - pivot image).
            pivot_image = _rotate((px, py), theta)
            seeds.append((hx - (cx - pivot_image[0]), hy - (cy - pivot_image[1])))
    return seeds


def _initial_population(
    seeds: List[Tuple[float, ...]],
    lower: np.ndarray,
    upper: np.ndarray,
    size: int,
    seed: int,
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    population = lower + rng.random((size, len(lower))) * (upper - lower)
    for i, point in enumerate(seeds[:size]):
        population[i] = np.clip(np.asarray(point, dtype=float), lower, upper)
    return population


def _run_search(tracker: _BestTracker, seeds: List[Tuple[float, ...]], lower: np.ndarray, upper: np.ndarray, cfg: MatchConfig) -> None:
    init = _initial_population(seeds, lower, upper, cfg.population, cfg.seed)
    differential_evolution(
        tracker,
        bounds=list(zip(lower, upper)),
        init=init,
        maxiter=cfg.generations,
        seed=cfg.seed,
        polish=False,
        tol=0.0,
        mutation=(0.5, 1.0),
        recombination=0.7,
        updating="immediate",
        workers=1,
    )


def optimize_pose(
    host_fp: Floorplan,
    client_fp: Floorplan,
    context: Context,
    weights: ContextWeights,
    cfg: Optional[MatchConfig] = None,
    targets: Optional[TargetPair] = None,
    host_target_id: Optional[str] = None,
) -> MatchResult:
    """Best client pose relative to the host by seeded differential evolution.

    The search variables are the landing point of the client boundary centroid and, in continuous mode, the angle.
    In quarter turn mode every quarter turn gets its own start with the same seed, starting at the target's turn.
    """
    cfg = cfg or MatchConfig()
    context = Context(context)
    if targets is None:
        targets = select_target(host_fp, client_fp, context, host_target_id)
    problem = MatchProblem(host_fp, client_fp, context, weights, targets, cfg.boundary_epsilon)
    minx, miny, maxx, maxy = _bounds(problem, cfg)
    first_turn = targets.client.quarter_turns
    best: Optional[_BestTracker] = None
    if cfg.rotation_mode is RotationMode.QUARTER_TURNS:
        for offset in range(4):
            theta = ((first_turn + offset) % 4) * math.pi / 2
            tracker = _BestTracker(problem, theta)
            lower, upper = np.array([minx, miny]), np.array([maxx, maxy])
            _run_search(tracker, seed_landings(problem, theta), lower, upper, cfg)
            if best is None or tracker.best_value > best.best_value:
                best = tracker
    else:
        tracker = _BestTracker(problem, None)
        seeds: List[Tuple[float, ...]] = []
        for offset in range(4):
            theta = ((first_turn + offset) % 4) * math.pi / 2
            seeds.extend((x, y, theta) for x, y in seed_landings(problem, theta)[:2])
        lower, upper = np.array([minx, miny, 0.0]), np.array([maxx, maxy, 2 * math.pi])
        _run_search(tracker, seeds, lower, upper, cfg)
        best = tracker
    assert best is not None
    if best.best_pose is None or best.best_value <= NO_OVERLAP:
        raise MatchFailedError(f"no overlapping pose of {client_fp.id} over {host_fp.id}")
    result = problem.result(best.best_pose)
    logger.debug(
        "%s%s -> %s: objective %.3f at (%.3f, %.3f, %.1f deg)",
        B,
        client_fp.id,
        host_fp.id,
        result.objective,
        result.pose.tx,
        result.pose.ty,
        math.degrees(result.pose.theta),
    )
    if result.flags:
        logger.warning("%s%s -> %s flagged: %s", Y, client_fp.id, host_fp.id, ", ".join(result.flags))
    return result


class MatchedSpace(pydantic.BaseModel):
    """A matched client laid over the host: footprint, matched and unmatched parts."""

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    client_index: int
    plan_id: str
    pose: Pose
    moved: SemanticMap
    footprint: PolygonSet
    matched: Dict[str, PolygonSet]
    unmatched: PolygonSet

    @property
    def matched_obstacle(self) -> PolygonSet:
        return self.matched.get("obstacle", PolygonSet())

    @property
    def obstacle(self) -> PolygonSet:
        """Matched obstacles plus semantically unmatched area."""
        return unite([self.matched_obstacle, self.unmatched])

    @property
    def interactable(self) -> PolygonSet:
        return unite(layer for name, layer in self.matched.items() if name in INTERACTABLE_CLASSES)

    @property
    def allowed(self) -> PolygonSet:
        """Where the client may stand: floor on both sides, or chair on both sides in table context."""
        names = ("floor", "chair") if self.moved.context is Context.TABLE else ("floor",)
        return unite(self.matched[n] for n in names if n in self.matched)


def matched_space(host_map: SemanticMap, client_map: SemanticMap, pose: Pose, client_index: int = 0) -> MatchedSpace:
    moved = client_map.transformed(pose)
    footprint = host_map.boundary & moved.boundary
    host_classes, moved_classes = host_map.classes(), moved.classes()
    matched = {name: layer & moved_classes[name] for name, layer in host_classes.items() if name in moved_classes}
    unmatched = footprint - unite(matched.values())
    return MatchedSpace(
        client_index=client_index,
        plan_id=client_map.plan_id,
        pose=pose,
        moved=moved,
        footprint=footprint,
        matched=matched,
        unmatched=unmatched,
    )
