"""The rearrangement loop: pick assignment, placement scoring, region proposal,
joint planning and kinematic execution, repeated until every target is filled."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .heatmap import (
    SUCCESS_TOLERANCE,
    FusionWeights,
    Pick,
    assign_picks,
    feasibility_heatmap,
    freed_routes,
    fuse,
    object_roles,
    pick_heatmap,
    placed_objects,
    quality_heatmap,
)
from .grid import astar, dijkstra
from .mapf import PlannerConfig, Selection, TimedPath, select_regions
from .metrics import RunMetrics, StepRecord, accumulate
from .propose import ProposalConfig, RegionCandidate, propose_regions
from .scene import AgentState, RasterConfig, Scenario, Scene, SceneError, scene_hash, validate_scene, wrap_angle
from .workspace import Workspace


@dataclass(frozen=True)
class PolicyConfig:
    horizon: int | None = None  # steps; None means twice the object count
    success_tolerance: float = SUCCESS_TOLERANCE
    fusion: FusionWeights = FusionWeights()
    proposal: ProposalConfig = ProposalConfig()
    planner: PlannerConfig = PlannerConfig()
    raster: RasterConfig = RasterConfig()
    time_budget: float = 120.0

    def __post_init__(self):
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.success_tolerance <= 0:
            raise ValueError("success_tolerance must be positive")

    def horizon_for(self, n_objects: int) -> int:
        return self.horizon if self.horizon is not None else 2 * n_objects


@dataclass(frozen=True)
class ActionTriple:
    agent_id: int
    object_id: int
    region: tuple[float, float]

    def to_dict(self) -> dict:
        return {"agent": self.agent_id, "object": self.object_id, "region": list(self.region)}


@dataclass
class EpisodeState:
    scene: Scene
    t: int = 0
    history: list[StepRecord] = field(default_factory=list)


@dataclass
class StepPlan:
    triples: list[ActionTriple]
    paths: list[TimedPath]
    picks: list[Pick]
    candidates: dict[int, list[RegionCandidate]]
    selection: Selection


def is_solved(scene: Scene, target: Scene, tolerance: float = SUCCESS_TOLERANCE) -> bool:
    return len(placed_objects(scene, target, tolerance)) == len(target.objects)


def class_target_cells(ws: Workspace, scene: Scene, target: Scene) -> dict[int, set]:
    """Object id -> cells of the targets of its class."""
    by_class: dict[str, set] = {}
    for t in target.objects:
        by_class.setdefault(t.class_label, set()).add(ws.spec.cell_of(t.position))
    return {o.id: by_class.get(o.class_label, set()) for o in scene.objects}


def placement_heatmap(ws: Workspace, target: Scene, pick: Pick, other_pickups, config: PolicyConfig) -> np.ndarray:
    """Fused placement score with unreachable cells and the pickup cell itself zeroed.
    An object moved out of the way also avoids the routes it was blocking."""
    pickup = ws.object_cells[pick.object_id]
    blocked = ws.blocked_for(None, exclude_objects=(pick.object_id,))
    feas = feasibility_heatmap(blocked, ws.density(), pickup, other_pickups)
    qual = quality_heatmap(ws.scene, target, pick.object_id, config.raster, config.success_tolerance, ws)
    q = fuse(feas, qual, config.fusion)
    q[feas == 0.0] = 0.0
    q[pickup] = 0.0
    roles = object_roles(ws, target, config.success_tolerance)
    if pick.object_id in roles.obstructing:
        q[freed_routes(ws, target, pick.object_id, roles.obstructing[pick.object_id])] = 0.0
    return q


def park_cells(ws: Workspace, picks: Sequence[Pick], candidates) -> dict[int, tuple[int, int]]:
    """Nearest resting cell, clear of every route the active agents might take, for each
    idle agent currently standing on such a route."""
    spec = ws.spec
    corridor: set[tuple[int, int]] = set()
    for p in picks:
        blocked = ws.blocked_for(p.agent_id, exclude_objects=(p.object_id,))
        pickup = ws.object_cells[p.object_id]
        _, leg1 = astar(blocked, ws.agent_cell(p.agent_id), pickup)
        corridor.update(leg1 or ())
        for c in candidates[p.agent_id]:
            _, leg2 = astar(blocked, pickup, c.cell)
            corridor.update(leg2 or ())
    if not corridor:
        return {}
    reach = 2.0 * ws.agent_radius
    forbidden = ws.agent_zone([spec.center(c) for c in corridor], reach)
    active = {p.agent_id for p in picks}
    out: dict[int, tuple[int, int]] = {}
    for g in ws.scene.agents:
        if g.id in active or not forbidden[ws.agent_cell(g.id)]:
            continue
        others = [h.position for h in ws.scene.agents if h.id != g.id]
        blocked = ws.blocked_for(g.id) | ws.agent_zone(others, reach)
        d = dijkstra(blocked, ws.agent_cell(g.id))
        d[forbidden | blocked] = np.inf
        if out:
            d[ws.agent_zone([spec.center(c) for c in out.values()], reach)] = np.inf
        if np.isfinite(d).any():
            r, c = np.unravel_index(int(np.argmin(d)), d.shape)
            out[g.id] = (int(r), int(c))
    return out


def step(state: EpisodeState, target: Scene, config: PolicyConfig = PolicyConfig()) -> StepPlan | None:
    """Plan one round of simultaneous pick-and-place actions, or None when nothing can move.

    When no joint plan exists the lowest-confidence pair is dropped and the rest
    replanned; as a last resort every remaining pair is tried on its own.
    """
    scene = state.scene
    if is_solved(scene, target, config.success_tolerance):
        return None
    ws = Workspace(scene, config.raster)
    heatmaps = {g.id: pick_heatmap(scene, target, g.id, config.raster, config.success_tolerance, ws) for g in scene.agents}
    roles = object_roles(ws, target, config.success_tolerance)
    # placed objects are only worth moving when they block another object's way
    for hm in heatmaps.values():
        for oid, cell in ws.object_cells.items():
            if not roles.is_useful(oid):
                hm[cell] = 0.0
    # an object just set aside stays put for a step so the object it unblocked can pass
    resting = set(state.history[-1].intermediate) if state.history else set()
    picks = []
    if resting:
        rested = {a: hm.copy() for a, hm in heatmaps.items()}
        for hm in rested.values():
            for oid in resting:
                hm[ws.object_cells[oid]] = 0.0
        picks = assign_picks(rested, scene.objects, ws.spec)
    if not picks:
        picks = assign_picks(heatmaps, scene.objects, ws.spec)
    if not picks:
        return None
    targets = class_target_cells(ws, scene, target)
    candidates: dict[int, list[RegionCandidate]] = {}
    usable: list[Pick] = []
    for p in picks:
        others = [ws.object_cells[q.object_id] for q in picks if q.object_id != p.object_id]
        q_place = placement_heatmap(ws, target, p, others, config)
        cands = propose_regions(q_place, config.proposal, ws.spec)
        if cands:
            candidates[p.agent_id] = cands
            usable.append(p)
    usable.sort(key=lambda p: (-p.confidence, p.agent_id))

    def attempt(subset: Sequence[Pick]) -> StepPlan | None:
        pairs = [(p.agent_id, p.object_id) for p in subset]
        cands = {p.agent_id: candidates[p.agent_id] for p in subset}
        sel = select_regions(pairs, cands, ws, targets, config.planner)
        if sel is None or sel.n_targets < len(subset):
            # idle agents may be what is in the way; clear them aside and compare
            parked = park_cells(ws, subset, cands)
            if parked:
                alt = select_regions(pairs, cands, ws, targets, config.planner, parked)
                if alt is not None and (sel is None or alt.n_targets > sel.n_targets):
                    sel = alt
        if sel is None:
            return None
        triples = [ActionTriple(p.agent_id, p.object_id, sel.regions[p.agent_id].center) for p in sorted(subset)]
        return StepPlan(triples, sel.paths, list(subset), candidates, sel)

    for size in range(len(usable), 0, -1):
        plan = attempt(usable[:size])
        if plan is not None:
            return plan
    for p in usable[1:]:
        plan = attempt([p])
        if plan is not None:
            return plan
    return None


def _heading(path: TimedPath, default: float) -> float:
    w = path.waypoints
    for a, b in zip(reversed(w[:-1]), reversed(w[1:])):
        dx, dy = b[0] - a[0], b[1] - a[1]
        if dx or dy:
            return wrap_angle(math.atan2(dy, dx))
    return default


def apply_plan(scene: Scene, triples: Sequence[ActionTriple], paths: Sequence[TimedPath]) -> Scene:
    """Kinematic playback result: carried objects end at their regions, agents at their
    path ends. Raises RuntimeError if objects end up overlapping."""
    moved = {tr.object_id: tr.region for tr in triples}
    objects = [
        o if o.id not in moved else type(o)(o.id, o.class_label, tuple(moved[o.id]), o.radius) for o in scene.objects
    ]
    by_agent = {p.agent_id: p for p in paths}
    agents = []
    for g in scene.agents:
        p = by_agent.get(g.id)
        if p is None:
            agents.append(g)
        else:
            agents.append(AgentState(g.id, p.end_position, _heading(p, g.heading), g.radius))
    out = scene.replace_objects(objects).replace_agents(agents)
    try:
        validate_scene(out, check_agents=False)
    except SceneError as exc:
        raise RuntimeError(f"invariant violated after execution: {exc}") from exc
    return out


def make_record(t: int, scene_after: Scene, triples, paths, target_cells: dict[int, set], spec) -> StepRecord:
    intermediate = [tr.object_id for tr in triples if spec.cell_of(tr.region) not in target_cells.get(tr.object_id, set())]
    return StepRecord(
        t=t,
        triples=[tr.to_dict() for tr in triples],
        paths=[p.to_dict() for p in paths],
        step_F=float(sum(p.total_time for p in paths)),
        makespan=float(max((p.end_time for p in paths), default=0.0)),
        distance=float(sum(p.total_length for p in paths)),
        scene_hash=scene_hash(scene_after),
        intermediate=intermediate,
    )


def execute(state: EpisodeState, triples: Sequence[ActionTriple], paths: Sequence[TimedPath], target: Scene | None = None,
            raster: RasterConfig = RasterConfig()) -> EpisodeState:
    """Advance the episode by one step (an empty action leaves the scene unchanged)."""
    scene = apply_plan(state.scene, triples, paths)
    ws = Workspace(state.scene, raster)
    cells = class_target_cells(ws, state.scene, target) if target is not None else {}
    rec = make_record(state.t, scene, triples, paths, cells, ws.spec)
    return EpisodeState(scene, state.t + 1, state.history + [rec])


def finish_metrics(scene: Scene, target: Scene, records, planning_time: float, tolerance: float, reason: str) -> RunMetrics:
    n = len(target.objects)
    placed = len(placed_objects(scene, target, tolerance))
    m = RunMetrics(
        success_rate=placed / n if n else 1.0,
        inference_time=planning_time,
        succeeded=placed == n,
        n_objects=n,
        n_placed=placed,
        reason=reason if placed != n else "solved",
    )
    return accumulate(m, records)


def run(scenario: Scenario, config: PolicyConfig = PolicyConfig()) -> tuple[RunMetrics, list[StepRecord]]:
    """Roll the policy out until solved, out of steps, out of planning time, or stuck."""
    target = scenario.target
    state = EpisodeState(scenario.start)
    horizon = config.horizon_for(len(target.objects))
    planning = 0.0
    reason = "horizon"
    while not is_solved(state.scene, target, config.success_tolerance):
        if state.t >= horizon:
            reason = "horizon"
            break
        if planning > config.time_budget:
            reason = "time budget"
            break
        t0 = time.perf_counter()
        plan = step(state, target, config)
        planning += time.perf_counter() - t0
        if plan is None:
            reason = "no feasible action"
            break
        state = execute(state, plan.triples, plan.paths, target, config.raster)
    return finish_metrics(state.scene, target, state.history, planning, config.success_tolerance, reason), state.history


def replay(scenario: Scenario, log: Sequence[dict]) -> Scene:
    """Rebuild the final scene from a trajectory log, checking every recorded scene hash."""
    scene = scenario.start
    for rec in log:
        triples = [ActionTriple(d["agent"], d["object"], tuple(d["region"])) for d in rec["triples"]]
        paths = [
            TimedPath(d["agent"], tuple((w["x"], w["y"], w["t"]) for w in d["waypoints"]), scene.agent(d["agent"]).radius)
            for d in rec["paths"]
        ]
        scene = apply_plan(scene, triples, paths)
        if scene_hash(scene) != rec["scene_hash"]:
            raise ValueError(f"scene hash mismatch at step {rec['t']}")
    return scene
