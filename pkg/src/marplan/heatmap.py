"""Ground-truth scoring heatmaps for object selection and placement, and their fusion.

Heatmaps are plain ``(H_l, W_l)`` float arrays indexed ``[row, col]`` in patch units,
with values in [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .grid import astar, dijkstra, reachable_mask
from .scene import ObjectState, RasterConfig, Scene
from .workspace import Workspace

PLACED_FACTOR = 0.1
DENSITY_FACTOR = 0.5
DENSITY_THRESHOLD = 0.3
PICK_FLOOR = 0.1
SUCCESS_TOLERANCE = 0.1


@dataclass(frozen=True)
class FusionWeights:
    w_f: float = 0.2
    w_q: float = 0.8

    def __post_init__(self):
        if not (0.0 < self.w_f < 1.0 and 0.0 < self.w_q < 1.0):
            raise ValueError("fusion weights must lie in (0, 1)")


class Pick(NamedTuple):
    agent_id: int
    object_id: int
    confidence: float


def distance_score(d, d_min: float, d_max: float, floor: float = 0.0):
    """Map path lengths to (floor, 1]: 1 at ``d_min``, decreasing linearly, with a one-cell
    margin past ``d_max`` so the farthest reachable cell still scores above ``floor``."""
    span = d_max + 1.0 - d_min
    # written as 1 minus a drop so d_min maps to exactly 1
    return np.clip(1.0 - (1.0 - floor) * (np.asarray(d, dtype=float) - d_min) / span, 0.0, 1.0)


# -- target bookkeeping -------------------------------------------------------------------

def placed_objects(scene: Scene, target_scene: Scene, tolerance: float = SUCCESS_TOLERANCE) -> dict[int, int]:
    """Map object id -> index of the target it satisfies (same class, within tolerance).
    Each target is claimed by at most one object."""
    claimed: dict[int, int] = {}
    taken: set[int] = set()
    for k, tgt in enumerate(target_scene.objects):
        for obj in scene.objects:
            if obj.id in claimed or obj.class_label != tgt.class_label:
                continue
            if math.dist(obj.position, tgt.position) <= tolerance:
                claimed[obj.id] = k
                taken.add(k)
                break
    return claimed


def free_targets(ws: Workspace, target_scene: Scene, class_label: str, ignore_object: int | None = None) -> list[int]:
    """Indices of class targets whose cell is outside every object zone (besides the
    ignored object's), i.e. where an object could be set down right now."""
    exclude = () if ignore_object is None else (ignore_object,)
    occupied = ws.objects_blocked(exclude)
    out = []
    for k, tgt in enumerate(target_scene.objects):
        if tgt.class_label == class_label and not occupied[ws.spec.cell_of(tgt.position)]:
            out.append(k)
    return out


def _progress_without(ws: Workspace, target_scene: Scene, obj: ObjectState, removed=()) -> bool:
    """True if the object could be carried straight to a free target of its class once
    the ``removed`` objects are gone."""
    exclude = sorted({obj.id, *removed})
    occupied = ws.objects_blocked(exclude)
    cells = [
        ws.spec.cell_of(t.position)
        for t in target_scene.objects
        if t.class_label == obj.class_label and not occupied[ws.spec.cell_of(t.position)]
    ]
    if not cells:
        return False
    blocked = ws.static | occupied
    reach = reachable_mask(blocked, ws.object_cells[obj.id])
    return any(reach[c] and not blocked[c] for c in cells)


def object_progress(ws: Workspace, target_scene: Scene, obj: ObjectState) -> bool:
    """True if the object can be carried straight to a free target of its class."""
    return _progress_without(ws, target_scene, obj)


@dataclass(frozen=True)
class ObjectRoles:
    placed: dict  # object id -> index of the target it satisfies
    progress: frozenset  # misplaced, with a free class target reachable now
    obstructing: dict  # object id -> stuck objects that could progress once it moves

    def is_useful(self, oid: int) -> bool:
        if oid in self.placed:
            return oid in self.obstructing
        return oid in self.progress or oid in self.obstructing


def object_roles(ws: Workspace, target_scene: Scene, tolerance: float = SUCCESS_TOLERANCE) -> ObjectRoles:
    key = (id(target_scene), tolerance)
    cache = ws.__dict__.setdefault("_roles", {})
    if key in cache:
        return cache[key][1]
    scene = ws.scene
    placed = placed_objects(scene, target_scene, tolerance)
    progress = {o.id for o in scene.objects if o.id not in placed and object_progress(ws, target_scene, o)}
    stuck = [o for o in scene.objects if o.id not in placed and o.id not in progress]
    obstructing: dict[int, tuple[int, ...]] = {}
    for other in scene.objects:
        helped = tuple(s.id for s in stuck if s.id != other.id and _progress_without(ws, target_scene, s, (other.id,)))
        if helped:
            obstructing[other.id] = helped
    roles = ObjectRoles(placed, frozenset(progress), obstructing)
    cache[key] = (target_scene, roles)
    return roles


def freed_routes(ws: Workspace, target_scene: Scene, obstructor: int, beneficiaries) -> np.ndarray:
    """Cells the obstructor must not be set down near: shortest routes the beneficiaries
    would take to their nearest free class target once the obstructor is gone."""
    route: list[tuple[int, int]] = []
    for b in beneficiaries:
        obj = ws.scene.object(b)
        occupied = ws.objects_blocked(sorted({b, obstructor}))
        blocked = ws.static | occupied
        best = None
        for t in target_scene.objects:
            cell = ws.spec.cell_of(t.position)
            if t.class_label != obj.class_label or occupied[cell]:
                continue
            cost, path = astar(blocked, ws.object_cells[b], cell)
            if path is not None and (best is None or cost < best[0]):
                best = (cost, path)
        if best is not None:
            route.extend(best[1])
    if not route:
        return np.zeros(ws.spec.shape, dtype=bool)
    reach = ws.agent_radius + ws.scene.object(obstructor).radius
    return ws.agent_zone([ws.spec.center(c) for c in route], reach)


# -- object selection ---------------------------------------------------------------------

def pick_heatmap(
    scene: Scene,
    target_scene: Scene,
    agent_id: int,
    raster: RasterConfig = RasterConfig(),
    tolerance: float = SUCCESS_TOLERANCE,
    ws: Workspace | None = None,
) -> np.ndarray:
    """Per-patch confidence that ``agent_id`` should pick the object in that patch.

    A* path length from the agent to each object sets the base score; objects already on
    a target of their class are scaled by 0.1. A misplaced object that can neither reach
    a free target nor unblock another object scores 0.
    """
    ws = ws or Workspace(scene, raster)
    n = ws.spec.n
    values = np.zeros((n, n))
    start = ws.agent_cell(agent_id)
    exempt = set(ws.exempt_objects(agent_id))
    base_count = ws.objects_blocked(sorted(exempt))
    dist: dict[int, float] = {}
    for obj in scene.objects:
        grid = ws.static | (base_count if obj.id in exempt else ws.objects_blocked(sorted(exempt | {obj.id})))
        d, _ = astar(grid, start, ws.object_cells[obj.id])
        if math.isfinite(d):
            dist[obj.id] = d
    if not dist:
        return values
    roles = object_roles(ws, target_scene, tolerance)
    d_min, d_max = min(dist.values()), max(dist.values())
    for oid, d in dist.items():
        score = float(distance_score(d, d_min, d_max, PICK_FLOOR))
        if oid in roles.placed:
            score *= PLACED_FACTOR
        elif not roles.is_useful(oid):
            score = 0.0
        values[ws.object_cells[oid]] = score
    return values


def assign_picks(heatmaps: Mapping[int, np.ndarray], objects: Sequence[ObjectState], spec) -> list[Pick]:
    """Greedy unique assignment: repeatedly take the highest remaining (agent, object)
    confidence, then drop that agent and object. Zero confidence is never assigned."""
    cell_to_obj = {spec.cell_of(o.position): o.id for o in objects}
    options = []
    for agent_id, hm in heatmaps.items():
        for cell, oid in cell_to_obj.items():
            v = float(hm[cell])
            if v > 0.0:
                options.append((-v, agent_id, oid))
    options.sort()
    used_agents: set[int] = set()
    used_objects: set[int] = set()
    picks: list[Pick] = []
    for neg_v, agent_id, oid in options:
        if agent_id in used_agents or oid in used_objects:
            continue
        picks.append(Pick(agent_id, oid, -neg_v))
        used_agents.add(agent_id)
        used_objects.add(oid)
    return picks


# -- placement ------------------------------------------------------------------------------

def feasibility_heatmap(
    blocked: np.ndarray,
    density: np.ndarray,
    pickup_cell: tuple[int, int],
    other_pickups: Iterable[tuple[int, int]] = (),
) -> np.ndarray:
    """Reachability score of every patch from the pickup patch, halved in dense areas."""
    values = np.zeros(blocked.shape)
    if blocked[pickup_cell]:
        return values
    d = dijkstra(blocked, pickup_cell)
    finite = np.isfinite(d)
    values[finite] = distance_score(d[finite], 0.0, float(d[finite].max()))
    values[finite & (density > DENSITY_THRESHOLD)] *= DENSITY_FACTOR
    for cell in other_pickups:
        values[tuple(cell)] = 0.0
    return values


def quality_heatmap(
    scene: Scene,
    target_scene: Scene,
    picked_object: int,
    raster: RasterConfig = RasterConfig(),
    tolerance: float = SUCCESS_TOLERANCE,
    ws: Workspace | None = None,
) -> np.ndarray:
    """1 - (distance to the nearest free class target) / arena diagonal, per patch."""
    ws = ws or Workspace(scene, raster)
    obj = scene.object(picked_object)
    class_idx = [k for k, t in enumerate(target_scene.objects) if t.class_label == obj.class_label]
    if not class_idx:
        raise ValueError(f"no target for class {obj.class_label!r}")
    claimed = placed_objects(scene, target_scene, tolerance)
    # a placed object being moved aside should not aim back at its own target
    own = claimed.get(picked_object)
    candidates = [k for k in free_targets(ws, target_scene, obj.class_label, obj.id) if k != own]
    if not candidates:
        taken = set(claimed.values())
        candidates = [k for k in class_idx if k not in taken] or class_idx
    n = ws.spec.n
    rows, cols = np.mgrid[0:n, 0:n]
    best = np.full((n, n), np.inf)
    for k in candidates:
        # target positions sit on patch centers, so offsets are whole cells
        tr, tc = ws.spec.cell_of(target_scene.objects[k].position)
        best = np.minimum(best, np.hypot(rows - tr, cols - tc))
    return 1.0 - best * ws.spec.cell / (ws.spec.arena_size * math.sqrt(2.0))


def fuse(feas: np.ndarray, qual: np.ndarray, weights: FusionWeights = FusionWeights()) -> np.ndarray:
    feas = np.asarray(feas, dtype=float)
    qual = np.asarray(qual, dtype=float)
    if feas.shape != qual.shape:
        raise ValueError(f"heatmap shapes differ: {feas.shape} vs {qual.shape}")
    return weights.w_f * feas + weights.w_q * qual


def to_pgm_levels(values: np.ndarray) -> np.ndarray:
    """8-bit export where darker means higher confidence."""
    return (255 - np.rint(np.clip(values, 0.0, 1.0) * 255)).astype(np.uint8)
