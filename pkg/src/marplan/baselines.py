"""Two classical comparison planners sharing the grid, collision model and metrics of the
main policy.

* random: each agent takes a uniformly drawn misplaced object to the closest free target
  of its class; blocking objects are moved to uniformly drawn free spots.
* greedy: per-class optimal matching of objects to targets on A* distances, agents take
  the nearest matched objects; blocking objects go to the closest free spots.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .grid import astar, reachable_mask
from .heatmap import SUCCESS_TOLERANCE, free_targets, placed_objects
from .mapf import PlannerConfig, PlanRequest, TimedPath, plan_joint
from .metrics import RunMetrics, StepRecord
from .policy import ActionTriple, apply_plan, class_target_cells, finish_metrics, make_record
from .scene import RasterConfig, Scenario, Scene
from .workspace import Workspace

VARIANTS = ("random", "greedy")
UNREACHABLE_COST = 1e6


@dataclass(frozen=True)
class BaselineConfig:
    variant: str = "greedy"
    resample_attempts: int = 20
    time_budget: float = 120.0
    max_iterations: int | None = None  # None means four times the object count
    max_failed_iterations: int = 5
    seed: int = 0
    success_tolerance: float = SUCCESS_TOLERANCE
    planner: PlannerConfig = PlannerConfig()
    raster: RasterConfig = RasterConfig()

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.resample_attempts < 1:
            raise ValueError("resample_attempts must be at least 1")


def hungarian(cost) -> tuple[np.ndarray, np.ndarray, float]:
    """Minimum-cost assignment of rows to columns (rectangular allowed)."""
    cost = np.asarray(cost, dtype=float)
    rows, cols = linear_sum_assignment(cost)
    return rows, cols, float(cost[rows, cols].sum())


@dataclass(frozen=True)
class _Task:
    agent_id: int
    object_id: int
    place: tuple[int, int]


def _closest_target(ws: Workspace, target: Scene, obj, taken: set, claimed: set) -> tuple[int, int] | None:
    """Closest (Euclidean) free class target; failing that, the closest one not already
    satisfied, even if something sits on it."""
    free = [k for k in free_targets(ws, target, obj.class_label, obj.id) if k not in taken]
    pool = free or [
        k for k, t in enumerate(target.objects) if t.class_label == obj.class_label and k not in taken and k not in claimed
    ]
    if not pool:
        return None
    k = min(pool, key=lambda k: (math.dist(obj.position, target.objects[k].position), k))
    taken.add(k)
    return k


def _random_tasks(ws: Workspace, target: Scene, misplaced, claimed, rng) -> list[_Task]:
    agents = [g.id for g in ws.scene.agents]
    order = rng.permutation(len(misplaced))[: len(agents)]
    taken: set[int] = set()
    tasks = []
    for agent_id, i in zip(agents, order):
        obj = misplaced[int(i)]
        k = _closest_target(ws, target, obj, taken, claimed)
        if k is not None:
            tasks.append(_Task(agent_id, obj.id, ws.spec.cell_of(target.objects[k].position)))
    return tasks


def match_objects(ws: Workspace, target: Scene, misplaced, claimed) -> dict[int, int]:
    """Per-class minimum total A* distance matching of misplaced objects to unclaimed
    targets (movable objects ignored). Returns object id -> target index."""
    out: dict[int, int] = {}
    for cls in sorted({o.class_label for o in misplaced}):
        objs = [o for o in misplaced if o.class_label == cls]
        tgts = [k for k, t in enumerate(target.objects) if t.class_label == cls and k not in claimed]
        if not tgts:
            continue
        cost = np.full((len(objs), len(tgts)), UNREACHABLE_COST)
        for i, o in enumerate(objs):
            for j, k in enumerate(tgts):
                d, _ = astar(ws.static, ws.object_cells[o.id], ws.spec.cell_of(target.objects[k].position))
                if math.isfinite(d):
                    cost[i, j] = d
        rows, cols, _ = hungarian(cost)
        for i, j in zip(rows, cols):
            out[objs[i].id] = tgts[j]
    return out


def _greedy_tasks(ws: Workspace, target: Scene, misplaced, claimed) -> list[_Task]:
    matched = match_objects(ws, target, misplaced, claimed)
    options = []
    for g in ws.scene.agents:
        for oid in matched:
            d, _ = astar(ws.static, ws.agent_cell(g.id), ws.object_cells[oid])
            options.append((d, g.id, oid))
    options.sort()
    used_a: set[int] = set()
    used_o: set[int] = set()
    tasks = []
    for d, a, oid in options:
        if a in used_a or oid in used_o:
            continue
        used_a.add(a)
        used_o.add(oid)
        tasks.append(_Task(a, oid, ws.spec.cell_of(target.objects[matched[oid]].position)))
    return sorted(tasks, key=lambda t: t.agent_id)


def _plan(ws: Workspace, tasks: Sequence[_Task], config: BaselineConfig) -> list[TimedPath] | None:
    reqs = [PlanRequest(t.agent_id, t.object_id, ws.object_cells[t.object_id], t.place) for t in tasks]
    if any(ws.blocked_for(None, (t.object_id,))[t.place] for t in tasks):
        return None
    return plan_joint(reqs, ws, config.planner)


def obstructing_objects(ws: Workspace, tasks: Sequence[_Task]) -> tuple[list[int], np.ndarray]:
    """Objects whose zone touches a task's shortest route computed with movable objects
    ignored, plus the union of those routes."""
    route = np.zeros(ws.spec.shape, dtype=bool)
    for t in tasks:
        pickup = ws.object_cells[t.object_id]
        for a, b in ((ws.agent_cell(t.agent_id), pickup), (pickup, t.place)):
            _, path = astar(ws.static, a, b)
            for c in path or ():
                route[c] = True
    carried = {t.object_id for t in tasks}
    # an agent standing on an object never needs it moved to get going
    for t in tasks:
        carried.update(ws.exempt_objects(t.agent_id))
    # objects sitting on a task's drop cell come first, carried or not
    occupants = []
    for t in tasks:
        for oid, m in sorted(ws.object_masks.items()):
            if oid != t.object_id and m[t.place] and oid not in occupants:
                occupants.append(oid)
    hits = [
        oid for oid, m in sorted(ws.object_masks.items())
        if oid not in carried and oid not in occupants and np.any(m & route)
    ]
    return occupants + hits, route


def _relocation_spots(ws: Workspace, target: Scene, oid: int, route: np.ndarray) -> np.ndarray:
    """Cells an obstructing object may be moved to: reachable, free, off every target
    and clear of the blocked routes."""
    blocked = ws.blocked_for(None, exclude_objects=(oid,))
    ok = reachable_mask(blocked, ws.object_cells[oid]) & ~blocked
    reach = ws.agent_radius + ws.scene.object(oid).radius
    ok &= ~ws.agent_zone([ws.spec.center(tuple(c)) for c in np.argwhere(route)], reach)
    for t in target.objects:
        ok[ws.spec.cell_of(t.position)] = False
    ok[ws.object_cells[oid]] = False
    return np.argwhere(ok)


def _relocate(ws, target, obstructors, route, config: BaselineConfig, rng) -> tuple[list[_Task], list[TimedPath]] | None:
    """Move obstructors aside: first as many as there are agents at once, then one at a
    time in order."""
    agents = [g.id for g in ws.scene.agents]
    spots = {oid: _relocation_spots(ws, target, oid, route) for oid in obstructors}
    movers = [oid for oid in obstructors if len(spots[oid])]
    groups = [movers[: len(agents)]] if len(movers) > 1 and len(agents) > 1 else []
    groups += [[oid] for oid in movers]
    for group in groups:
        chosen = _relocate_group(ws, group, agents, spots, config, rng)
        if chosen is not None:
            return chosen
    return None


def _relocate_group(ws, group, agents, spots, config: BaselineConfig, rng):
    # closest agent (by A*) takes each obstructor
    pairs: list[tuple[int, int]] = []
    free_agents = list(agents)
    for oid in group:
        best = min(free_agents, key=lambda a: (astar(ws.static, ws.agent_cell(a), ws.object_cells[oid])[0], a))
        pairs.append((best, oid))
        free_agents.remove(best)
    for attempt in range(config.resample_attempts):
        tasks = []
        for a, oid in pairs:
            cells = spots[oid]
            if config.variant == "random":
                cell = cells[rng.integers(len(cells))]
            else:
                d = np.hypot(*(cells - np.array(ws.object_cells[oid])).T)
                order = np.lexsort((cells[:, 1], cells[:, 0], d))
                if attempt >= len(order):
                    break
                cell = cells[order[attempt]]
            tasks.append(_Task(a, oid, (int(cell[0]), int(cell[1]))))
        if len(tasks) < len(pairs):
            break
        paths = _plan(ws, tasks, config)
        if paths is not None:
            return tasks, paths
    return None


def run_baseline(scenario: Scenario, config: BaselineConfig = BaselineConfig()) -> tuple[RunMetrics, list[StepRecord]]:
    target = scenario.target
    scene = scenario.start
    rng = np.random.default_rng([scenario.seed, config.seed])
    n = len(target.objects)
    max_iter = config.max_iterations if config.max_iterations is not None else 4 * n
    records: list[StepRecord] = []
    planning = 0.0
    failed = 0
    deferred: set[int] = set()
    reason = "iteration cap"
    for it in range(max_iter):
        claimed = placed_objects(scene, target, config.success_tolerance)
        if len(claimed) == n:
            break
        if planning > config.time_budget:
            reason = "time budget"
            break
        t0 = time.perf_counter()
        ws = Workspace(scene, config.raster)
        misplaced = [o for o in scene.objects if o.id not in claimed]
        claimed_k = set(claimed.values())
        if config.variant == "random":
            tasks = _random_tasks(ws, target, misplaced, claimed_k, rng)
        else:
            # objects that just failed sit out one round so others get a turn
            fresh = [o for o in misplaced if o.id not in deferred] or misplaced
            tasks = _greedy_tasks(ws, target, fresh, claimed_k)
        chosen = None
        if tasks:
            paths = _plan(ws, tasks, config)
            if paths is not None:
                chosen = (tasks, paths)
            else:
                obstructors, route = obstructing_objects(ws, tasks)
                if obstructors:
                    chosen = _relocate(ws, target, obstructors, route, config, rng)
                if chosen is None:
                    for t in tasks:
                        paths = _plan(ws, [t], config)
                        if paths is not None:
                            chosen = ([t], paths)
                            break
        planning += time.perf_counter() - t0
        if chosen is None:
            failed += 1
            deferred = {t.object_id for t in tasks} if failed < len(misplaced) else set()
            if failed >= config.max_failed_iterations:
                reason = "no feasible action"
                break
            continue
        failed = 0
        deferred = set()
        tasks, paths = chosen
        triples = [ActionTriple(t.agent_id, t.object_id, ws.spec.center(t.place)) for t in tasks]
        scene = apply_plan(scene, triples, paths)
        records.append(make_record(len(records), scene, triples, paths, class_target_cells(ws, ws.scene, target), ws.spec))
    return finish_metrics(scene, target, records, planning, config.success_tolerance, reason), records


def run_random(scenario: Scenario, config: BaselineConfig = BaselineConfig(variant="random")) -> tuple[RunMetrics, list[StepRecord]]:
    return run_baseline(scenario, _with_variant(config, "random"))


def run_greedy(scenario: Scenario, config: BaselineConfig = BaselineConfig()) -> tuple[RunMetrics, list[StepRecord]]:
    return run_baseline(scenario, _with_variant(config, "greedy"))


def _with_variant(config: BaselineConfig, variant: str) -> BaselineConfig:
    return config if config.variant == variant else replace(config, variant=variant)
