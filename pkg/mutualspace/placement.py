"""Instantiate host and client users: sample positions around the target, filter by clearance, pick a joint seating."""

import itertools
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pydantic
import shapely
from shapely.geometry import Polygon, box

from mutualspace.floorplan import Context, Floorplan, SemanticMap, WallFace, wall_face
from mutualspace.geometry import PolygonSet, Point2, clearance_mask, offset_path, squares_inside
from mutualspace.matching import MatchedSpace
from mutualspace.misc import D_STEP, PERSONAL_DIAMETER, SURFACE_OFFSET, C, Y
from mutualspace.scenegraph import TargetPair

logger = logging.getLogger(__name__)

HOST_OWNER = "host"
ENVELOPE_MARGIN = 1.0
GAP_TOLERANCE = 1e-9
PRUNE_INFLATION = 1.5
PRUNE_BACKOFF = 0.9
PRUNE_MIN_CANDIDATES = 10
SEARCH_NODE_LIMIT = 20_000


def client_owner(index: int) -> str:
    """Owner key of the client with 0 based match index."""
    return f"C{index + 1}"


class PlacementConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    d_step: float = pydantic.Field(default=D_STEP, gt=0, le=0.5)
    personal_diameter: float = pydantic.Field(default=PERSONAL_DIAMETER, ge=0.3)
    surface_offset: float = pydantic.Field(default=SURFACE_OFFSET, gt=0)
    n_hosts: int = pydantic.Field(default=1, ge=1, le=3)
    n_clients: int = pydantic.Field(default=1, ge=0)

    @property
    def radius(self) -> float:
        return self.personal_diameter / 2

    def users(self) -> List[Tuple[str, str]]:
        """(user id, owner) for every user, hosts first."""
        hosts = [(f"H{i + 1}", HOST_OWNER) for i in range(self.n_hosts)]
        return hosts + [(client_owner(k), client_owner(k)) for k in range(self.n_clients)]


class Candidate(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    position: Point2
    owner: str
    on_sittable: bool = False


class Placement(pydantic.BaseModel):
    """Chosen position per user id. A failed placement is a value, empty_users names who had no candidate."""

    model_config = pydantic.ConfigDict(frozen=True)

    positions: Dict[str, Point2] = {}
    success: bool = False
    min_pairwise_gap: Optional[float] = None
    total_distance: Optional[float] = None
    empty_users: Tuple[str, ...] = ()


class InteractionTarget(pydantic.BaseModel):
    """Host geometry users gather around: a table, a wall face, or floor anchors per owner."""

    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True, frozen=True)

    context: Context
    table: Optional[Polygon] = None
    wall: Optional[WallFace] = None
    anchors: Dict[str, Tuple[float, float]] = {}

    def distances(self, owner: str, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.context is Context.TABLE and self.table is not None:
            return shapely.distance(shapely.points(points), self.table.exterior)
        if self.context is Context.WALL and self.wall is not None:
            return shapely.distance(shapely.points(points), self.wall.face.as_line())
        anchor = self.anchors.get(owner)
        if anchor is None:
            return np.zeros(len(points))
        return np.hypot(points[:, 0] - anchor[0], points[:, 1] - anchor[1])


def interaction_target(
    host_fp: Floorplan,
    targets: TargetPair,
    allowed: Optional[Dict[str, PolygonSet]] = None,
) -> InteractionTarget:
    """Resolve the host side of a target pair. Floor anchors are the centroids of each owner's allowed region."""
    context = Context(targets.context)
    if context is Context.TABLE:
        return InteractionTarget(context=context, table=host_fp.region(targets.host.region_id).shape)
    if context is Context.WALL:
        return InteractionTarget(context=context, wall=wall_face(host_fp, targets.host.region_id))
    anchors = {}
    for owner, region in (allowed or {}).items():
        if not region.is_empty:
            centroid = region.geom.centroid
            anchors[owner] = (centroid.x, centroid.y)
    return InteractionTarget(context=context, anchors=anchors)


def allowed_regions(host_map: SemanticMap, matches: Sequence[MatchedSpace]) -> Dict[str, PolygonSet]:
    """Where each owner may stand: the host on its own walkable area, clients on their matched walkable area."""
    allowed = {HOST_OWNER: host_map.walkable()}
    for match in matches:
        allowed[client_owner(match.client_index)] = match.allowed
    return allowed


def sittable_regions(host_map: SemanticMap, matches: Sequence[MatchedSpace]) -> Dict[str, PolygonSet]:
    sittable = {HOST_OWNER: host_map.sittable}
    for match in matches:
        chairs = match.matched.get("chair", PolygonSet()) if host_map.context is Context.TABLE else PolygonSet()
        sittable[client_owner(match.client_index)] = chairs
    return sittable


def forbidden_regions(host_map: SemanticMap, allowed: Dict[str, PolygonSet]) -> Dict[str, PolygonSet]:
    """Everything around the host plan that an owner may not stand on.

    This is tables, walls, obstacles, unmatched area and outside, with sittable chairs carved out in table context.
    """
    envelope = PolygonSet(box(*host_map.boundary.bounds).buffer(ENVELOPE_MARGIN, join_style="mitre"))
    return {owner: envelope - region for owner, region in allowed.items()}


def _ring_points(ring, step: float) -> np.ndarray:
    length = ring.length
    count = max(1, int(round(length / step)))
    spacing = length / count
    points = [ring.interpolate(i * spacing) for i in range(count)]
    return np.array([(p.x, p.y) for p in points])


def _wall_points(face: WallFace, offset: float, step: float) -> np.ndarray:
    (ax, ay), (bx, by) = face.face.a.as_tuple(), face.face.b.as_tuple()
    length = face.face.length
    count = int(math.floor(length / step + 1e-9)) + 1
    ux, uy = (bx - ax) / length, (by - ay) / length
    nx, ny = face.normal
    ts = np.arange(count) * step
    return np.column_stack([ax + ux * ts + nx * offset, ay + uy * ts + ny * offset])


def _grid_points(region: PolygonSet, step: float) -> np.ndarray:
    if region.is_empty:
        return np.zeros((0, 2))
    minx, miny, maxx, maxy = region.bounds
    xs = minx + np.arange(int(math.floor((maxx - minx) / step + 1e-9)) + 1) * step
    ys = miny + np.arange(int(math.floor((maxy - miny) / step + 1e-9)) + 1) * step
    grid_x, grid_y = np.meshgrid(xs, ys)
    inside = shapely.intersects_xy(region.geom, grid_x, grid_y)
    return np.column_stack([grid_x[inside], grid_y[inside]])


def sample_points(target: InteractionTarget, host_map: SemanticMap, cfg: PlacementConfig) -> np.ndarray:
    """Raw positions before owner restriction: ring around the table, line along the wall, grid over floor."""
    if target.context is Context.TABLE and target.table is not None:
        return _ring_points(offset_path(target.table, cfg.surface_offset), cfg.d_step)
    if target.context is Context.WALL and target.wall is not None:
        return _wall_points(target.wall, cfg.surface_offset, cfg.d_step)
    return _grid_points(host_map.movable_floor, cfg.d_step)


def sample_candidates(
    context: Context,
    host_map: SemanticMap,
    matches: Sequence[MatchedSpace],
    cfg: PlacementConfig,
    target: InteractionTarget,
    allowed: Optional[Dict[str, PolygonSet]] = None,
) -> List[Candidate]:
    """Sample positions and keep, per owner, the ones inside that owner's allowed region."""
    if Context(context) is not target.context:
        raise ValueError(f"target is for {target.context.value}, not {Context(context).value}")
    allowed = allowed if allowed is not None else allowed_regions(host_map, matches)
    sittable = sittable_regions(host_map, matches)
    points = sample_points(target, host_map, cfg)
    candidates: List[Candidate] = []
    for owner, region in allowed.items():
        if region.is_empty or not len(points):
            continue
        inside = shapely.intersects_xy(region.geom, points[:, 0], points[:, 1])
        chairs = sittable.get(owner, PolygonSet())
        on_chair = (
            shapely.intersects_xy(chairs.geom, points[:, 0], points[:, 1])
            if not chairs.is_empty
            else np.zeros(len(points), dtype=bool)
        )
        for (x, y), sits in zip(points[inside], on_chair[inside]):
            candidates.append(Candidate(position=Point2(x=float(x), y=float(y)), owner=owner, on_sittable=bool(sits)))
    logger.debug("%sSampled %s points, %s owner candidates", C, len(points), len(candidates))
    return candidates


def filter_candidates(
    cands: Sequence[Candidate],
    forbidden: Dict[str, PolygonSet],
    cfg: PlacementConfig,
    diameter: Optional[float] = None,
    squares: Optional[Dict[str, Tuple[PolygonSet, float]]] = None,
) -> List[Candidate]:
    """Drop candidates whose personal disk overlaps their owner's forbidden set.

    With squares, an owner's candidates must also fit the personal square, turned by the given angle, inside
    the given region.
    """
    radius = (diameter or cfg.personal_diameter) / 2
    keep = np.zeros(len(cands), dtype=bool)
    for owner in {c.owner for c in cands}:
        idx = np.array([i for i, c in enumerate(cands) if c.owner == owner])
        points = np.array([cands[i].position.as_tuple() for i in idx])
        keep[idx] = clearance_mask(points, radius, forbidden.get(owner, PolygonSet()))
        if squares and owner in squares:
            region, theta = squares[owner]
            keep[idx] &= squares_inside(points, cfg.personal_diameter, theta, region)
    return [c for c, ok in zip(cands, keep) if ok]


class _Assignment(object):
    """Per-user candidate arrays sorted by distance to the target."""

    def __init__(self, cands: Sequence[Candidate], cfg: PlacementConfig, target: InteractionTarget) -> None:
        self.cfg = cfg
        self.users = cfg.users()
        self.min_gap_sq = cfg.personal_diameter**2 + GAP_TOLERANCE
        self.points: List[np.ndarray] = []
        self.costs: List[np.ndarray] = []
        for _, owner in self.users:
            own = [c.position.as_tuple() for c in cands if c.owner == owner]
            points = np.array(own, dtype=float).reshape(-1, 2)
            costs = target.distances(owner, points) if len(points) else np.zeros(0)
            order = np.lexsort((points[:, 1], points[:, 0], costs)) if len(points) else np.zeros(0, dtype=int)
            self.points.append(points[order])
            self.costs.append(costs[order])

    @property
    def empty_users(self) -> Tuple[str, ...]:
        return tuple(user for (user, _), pts in zip(self.users, self.points) if not len(pts))

    def compatible(self, user: int, choice: Dict[int, int], skip: Sequence[int] = ()) -> np.ndarray:
        """Mask of user's candidates keeping the personal gap to every other chosen user."""
        ok = np.ones(len(self.points[user]), dtype=bool)
        for other, idx in choice.items():
            if other == user or other in skip:
                continue
            delta = self.points[user] - self.points[other][idx]
            ok &= (delta**2).sum(axis=1) >= self.min_gap_sq
        return ok

    def cost(self, choice: Dict[int, int]) -> float:
        return float(sum(self.costs[u][i] for u, i in choice.items()))

    def scarcity_order(self) -> List[int]:
        return sorted(range(len(self.users)), key=lambda u: (len(self.points[u]), u))

    def greedy(self) -> Optional[Dict[int, int]]:
        choice: Dict[int, int] = {}
        for user in self.scarcity_order():
            ok = np.nonzero(self.compatible(user, choice))[0]
            if not len(ok):
                return None
            choice[user] = int(ok[0])
        return choice

    def branch_and_bound(
        self, incumbent: Optional[Dict[int, int]] = None, limit: int = SEARCH_NODE_LIMIT
    ) -> Optional[Dict[int, int]]:
        """Cheapest feasible assignment, starting from incumbent as upper bound.

        Stops at the node limit and returns the best assignment seen so far, None when none was found.
        """
        order = self.scarcity_order()
        floor = [float(self.costs[u][0]) for u in order]
        rest = [sum(floor[d:]) for d in range(len(order) + 1)]
        best: Dict[str, object] = {
            "choice": dict(incumbent) if incumbent is not None else None,
            "cost": self.cost(incumbent) if incumbent is not None else math.inf,
        }
        visited = 0

        def visit(depth: int, choice: Dict[int, int], partial: float) -> bool:
            nonlocal visited
            if depth == len(order):
                if partial < best["cost"] - 1e-12:
                    best["choice"], best["cost"] = dict(choice), partial
                return True
            user = order[depth]
            for idx in np.nonzero(self.compatible(user, choice))[0]:
                cost = partial + float(self.costs[user][idx])
                if cost + rest[depth + 1] >= best["cost"] - 1e-12:
                    break
                visited += 1
                if visited > limit:
                    return False
                choice[user] = int(idx)
                if not visit(depth + 1, choice, cost):
                    return False
                del choice[user]
            return True

        if not visit(0, {}, 0.0):
            logger.warning("%sPlacement search stopped after %s nodes", Y, limit)
        return best["choice"]  # type: ignore[return-value]

    def improve(self, choice: Dict[int, int]) -> Dict[int, int]:
        """Single moves and pair moves until no move lowers the total distance."""
        choice = dict(choice)
        improved = True
        while improved:
            improved = False
            for user in range(len(self.users)):
                ok = np.nonzero(self.compatible(user, choice))[0]
                if len(ok) and self.costs[user][ok[0]] < self.costs[user][choice[user]] - 1e-12:
                    choice[user] = int(ok[0])
                    improved = True
            for first, second in itertools.combinations(range(len(self.users)), 2):
                current = self.costs[first][choice[first]] + self.costs[second][choice[second]]
                best: Optional[Tuple[float, int, int]] = None
                first_ok = np.nonzero(self.compatible(first, choice, skip=(second,)))[0]
                second_ok = self.compatible(second, choice, skip=(first,))
                for a in first_ok:
                    if best is not None and self.costs[first][a] >= best[0]:
                        break
                    delta = self.points[second] - self.points[first][a]
                    ok = np.nonzero(second_ok & ((delta**2).sum(axis=1) >= self.min_gap_sq))[0]
                    if not len(ok):
                        continue
                    total = self.costs[first][a] + self.costs[second][ok[0]]
                    if best is None or total < best[0]:
                        best = (total, int(a), int(ok[0]))
                if best is not None and best[0] < current - 1e-12:
                    choice[first], choice[second] = best[1], best[2]
                    improved = True
        return choice

    def placement(self, choice: Optional[Dict[int, int]]) -> Placement:
        if choice is None:
            return Placement(success=False, empty_users=self.empty_users)
        positions = {}
        for user, idx in sorted(choice.items()):
            x, y = self.points[user][idx]
            positions[self.users[user][0]] = Point2(x=float(x), y=float(y))
        gaps = [a.distance(b) for a, b in itertools.combinations(positions.values(), 2)]
        return Placement(
            positions=positions,
            success=True,
            min_pairwise_gap=min(gaps) if gaps else None,
            total_distance=self.cost(choice),
        )

    def solve(self) -> Optional[Dict[int, int]]:
        if self.empty_users:
            return None
        choice = self.greedy()
        if choice is not None:
            choice = self.improve(choice)
        return self.branch_and_bound(choice)


def prune_candidates(
    cands: Sequence[Candidate],
    forbidden: Dict[str, PolygonSet],
    cfg: PlacementConfig,
) -> Tuple[List[Candidate], float]:
    """Re-filter with an inflated personal diameter, backing off until every owner keeps enough candidates."""
    n_users = cfg.n_hosts + cfg.n_clients
    needed = max(PRUNE_MIN_CANDIDATES, n_users * 3)
    owners = {owner for _, owner in cfg.users()}
    inflation = PRUNE_INFLATION
    while inflation > 1.0:
        pruned = filter_candidates(cands, forbidden, cfg, diameter=cfg.personal_diameter * inflation)
        counts = {owner: 0 for owner in owners}
        for cand in pruned:
            if cand.owner in counts:
                counts[cand.owner] += 1
        if min(counts.values()) >= needed:
            return pruned, inflation
        inflation *= PRUNE_BACKOFF
    return list(cands), 1.0


def select_positions(
    cands: Sequence[Candidate],
    cfg: PlacementConfig,
    target: InteractionTarget,
    forbidden: Optional[Dict[str, PolygonSet]] = None,
) -> Placement:
    """Joint seating with every pair at least a personal diameter apart and minimal summed target distance.

    With forbidden sets the candidates are pruned by an inflated personal space first, falling back to the full
    sets when the pruned ones have no solution.
    """
    if forbidden is not None:
        pruned, inflation = prune_candidates(cands, forbidden, cfg)
        if inflation > 1.0:
            assignment = _Assignment(pruned, cfg, target)
            choice = assignment.solve()
            if choice is not None:
                logger.debug("%sPlaced on pruned candidates, inflation %.3f", C, inflation)
                return assignment.placement(choice)
    assignment = _Assignment(cands, cfg, target)
    placement = assignment.placement(assignment.solve())
    if not placement.success:
        logger.info("%sPlacement failed, empty candidate sets: %s", Y, ", ".join(placement.empty_users) or "none")
    return placement


def brute_force_positions(cands: Sequence[Candidate], cfg: PlacementConfig, target: InteractionTarget) -> Placement:
    """Exhaustive optimum over every combination. Only meant for small instances."""
    assignment = _Assignment(cands, cfg, target)
    if assignment.empty_users:
        return assignment.placement(None)
    best: Optional[Dict[int, int]] = None
    best_cost = math.inf
    for combo in itertools.product(*(range(len(p)) for p in assignment.points)):
        choice = dict(enumerate(combo))
        feasible = all(
            ((assignment.points[a][choice[a]] - assignment.points[b][choice[b]]) ** 2).sum() >= assignment.min_gap_sq
            for a, b in itertools.combinations(choice, 2)
        )
        if feasible and assignment.cost(choice) < best_cost - 1e-12:
            best, best_cost = choice, assignment.cost(choice)
    return assignment.placement(best)


def place_users(
    host_fp: Floorplan,
    host_map: SemanticMap,
    matches: Sequence[MatchedSpace],
    targets: TargetPair,
    cfg: PlacementConfig,
    allowed: Optional[Dict[str, PolygonSet]] = None,
    fit_squares: bool = True,
) -> Tuple[Placement, Dict[str, PolygonSet]]:
    """Sample, filter and select in one go. Returns the placement and the forbidden set per owner.

    With fit_squares every client user keeps the personal square inside that client's footprint, so the
    subspace swept around the user contains it.
    """
    allowed = allowed if allowed is not None else allowed_regions(host_map, matches)
    target = interaction_target(host_fp, targets, allowed)
    forbidden = forbidden_regions(host_map, allowed)
    sampled = sample_candidates(targets.context, host_map, matches, cfg, target, allowed)
    squares = {client_owner(m.client_index): (m.footprint, m.pose.theta) for m in matches} if fit_squares else None
    kept = filter_candidates(sampled, forbidden, cfg, squares=squares)
    return select_positions(kept, cfg, target, forbidden), forbidden

