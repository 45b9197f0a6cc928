"""Prioritized multi-agent path planning over safe intervals on the patch grid.

Conflict model: a cell is unsafe while any higher-priority agent's disc, grown by the
planning agent's radius, overlaps the cell square. A move between neighboring cells
occupies both cells for its whole duration, so a planned center never enters an unsafe
square and the two discs cannot overlap.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .grid import SQRT2, GridSpec, move_table, reachable_mask, segment_cells
from .workspace import Workspace

INF = math.inf
PAD = 1e-9  # widening of unsafe intervals, keeps float round-off on the safe side


class Infeasible(Exception):
    """No collision-free plan exists within the search budget."""


@dataclass(frozen=True)
class PlannerConfig:
    agent_speed: float = 0.3
    pick_dwell: float = 1.0
    place_dwell: float = 1.0
    max_expansions: int = 20_000
    max_permutations: int = 6
    smooth: bool = True

    def __post_init__(self):
        if self.agent_speed <= 0:
            raise ValueError("agent_speed must be positive")
        if self.pick_dwell < 0 or self.place_dwell < 0:
            raise ValueError("dwell times must be non-negative")


@dataclass(frozen=True)
class TimedPath:
    agent_id: int
    waypoints: tuple[tuple[float, float, float], ...]
    radius: float = 0.2
    pick_time: float | None = None  # end of the pick dwell, if the path carries an object

    def __post_init__(self):
        ts = [w[2] for w in self.waypoints]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("waypoint times must be strictly increasing")

    @property
    def start_time(self) -> float:
        return self.waypoints[0][2]

    @property
    def end_time(self) -> float:
        return self.waypoints[-1][2]

    @property
    def total_time(self) -> float:
        return self.end_time - self.start_time

    @property
    def total_length(self) -> float:
        w = self.waypoints
        return float(sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(w, w[1:])))

    @property
    def end_position(self) -> tuple[float, float]:
        return self.waypoints[-1][0], self.waypoints[-1][1]

    def position_at(self, t) -> np.ndarray:
        """Positions at times ``t`` (array), holding still before the start and after the end."""
        w = np.asarray(self.waypoints, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, w[:, 2], w[:, 0]), np.interp(t, w[:, 2], w[:, 1])], axis=-1)

    def max_speed(self) -> float:
        w = self.waypoints
        return max(
            (math.hypot(b[0] - a[0], b[1] - a[1]) / (b[2] - a[2]) for a, b in zip(w, w[1:])),
            default=0.0,
        )

    def to_dict(self) -> dict:
        return {
            "agent": self.agent_id,
            "waypoints": [{"x": x, "y": y, "t": t} for x, y, t in self.waypoints],
            "length": self.total_length,
            "duration": self.total_time,
        }


@dataclass(frozen=True)
class PlanRequest:
    agent_id: int
    object_id: int
    pick_cell: tuple[int, int]
    place_cell: tuple[int, int]
    priority: int = 0


# -- unsafe intervals --------------------------------------------------------------------

def _line_hits_rounded_boxes(px, py, dx, dy, x0, x1, y0, y1, R):
    """Parameter range s in [0, 1] where ``p + s*d`` is within R of each box (open set).
    Returns (lo, hi) arrays, empty where lo > hi."""

    def slab(p, d, lo_b, hi_b, s_lo, s_hi):
        if d == 0.0:
            inside = (p > lo_b) & (p < hi_b)
            return s_lo, np.where(inside, s_hi, -np.inf)
        ta = (lo_b - p) / d
        tb = (hi_b - p) / d
        return np.maximum(s_lo, np.minimum(ta, tb)), np.minimum(s_hi, np.maximum(ta, tb))

    shape = x0.shape
    zeros, ones = np.zeros(shape), np.ones(shape)
    los, his = [], []
    for ex, ey in ((R, 0.0), (0.0, R)):
        lo, hi = slab(px, dx, x0 - ex, x1 + ex, zeros, ones)
        lo, hi = slab(py, dy, y0 - ey, y1 + ey, lo, hi)
        los.append(lo)
        his.append(hi)
    a = dx * dx + dy * dy
    for cx, cy in ((x0, y0), (x0, y1), (x1, y0), (x1, y1)):
        ox, oy = px - cx, py - cy
        c = ox * ox + oy * oy - R * R
        if a == 0.0:
            lo = np.where(c < 0, 0.0, np.inf)
            hi = np.where(c < 0, 1.0, -np.inf)
        else:
            b = 2.0 * (dx * ox + dy * oy)
            disc = b * b - 4.0 * a * c
            root = np.sqrt(np.maximum(disc, 0.0))
            lo = np.where(disc > 0, (-b - root) / (2 * a), np.inf)
            hi = np.where(disc > 0, (-b + root) / (2 * a), -np.inf)
            lo, hi = np.maximum(lo, 0.0), np.minimum(hi, 1.0)
        los.append(lo)
        his.append(hi)
    lo_all = np.stack(los)
    hi_all = np.stack(his)
    empty = lo_all > hi_all
    lo_all[empty] = np.inf
    hi_all[empty] = -np.inf
    return lo_all.min(axis=0), hi_all.max(axis=0)


def path_unsafe_intervals(path: TimedPath, spec: GridSpec, radius_sum: float) -> dict[int, list[tuple[float, float]]]:
    """For each flat cell index, the open time intervals during which the path's disc of
    radius ``radius_sum`` overlaps the cell square (including the final rest, forever)."""
    out: dict[int, list[tuple[float, float]]] = {}
    cell = spec.cell
    n = spec.n
    w = path.waypoints
    segments = [(w[i], w[i + 1]) for i in range(len(w) - 1)]
    last = w[-1]
    segments.append(((last[0], last[1], last[2]), (last[0], last[1], INF)))
    for (ax, ay, ta), (bx, by, tb) in segments:
        c_lo = max(int(math.floor((min(ax, bx) - radius_sum) / cell)), 0)
        c_hi = min(int(math.floor((max(ax, bx) + radius_sum) / cell)), n - 1)
        r_lo = max(int(math.floor((min(ay, by) - radius_sum) / cell)), 0)
        r_hi = min(int(math.floor((max(ay, by) + radius_sum) / cell)), n - 1)
        R_, C_ = np.meshgrid(np.arange(r_lo, r_hi + 1), np.arange(c_lo, c_hi + 1), indexing="ij")
        x0, x1 = C_ * cell, (C_ + 1) * cell
        y0, y1 = R_ * cell, (R_ + 1) * cell
        lo, hi = _line_hits_rounded_boxes(ax, ay, bx - ax, by - ay, x0, x1, y0, y1, radius_sum)
        hit = lo <= hi
        if tb == INF:
            for r, c in zip(R_[hit], C_[hit]):
                out.setdefault(int(r) * n + int(c), []).append((ta - PAD, INF))
            continue
        span = tb - ta
        for r, c, s0, s1 in zip(R_[hit], C_[hit], lo[hit], hi[hit]):
            out.setdefault(int(r) * n + int(c), []).append((ta + s0 * span - PAD, ta + s1 * span + PAD))
    return out


def merge_intervals(intervals: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    merged: list[list[float]] = []
    for s, e in sorted(intervals):
        if merged and s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return [(s, e) for s, e in merged]


class IntervalTable:
    """Unsafe (open) and safe (closed) time intervals per flat cell index."""

    def __init__(self, unsafe: Mapping[int, list[tuple[float, float]]] | None = None):
        self.unsafe = {k: merge_intervals(v) for k, v in (unsafe or {}).items()}
        self._safe: dict[int, list[tuple[float, float]]] = {}

    @classmethod
    def from_parts(cls, parts: Sequence[Mapping[int, list[tuple[float, float]]]]) -> "IntervalTable":
        combined: dict[int, list[tuple[float, float]]] = {}
        for part in parts:
            for k, v in part.items():
                combined.setdefault(k, []).extend(v)
        return cls(combined)

    @classmethod
    def from_paths(cls, paths: Sequence[TimedPath], spec: GridSpec, radius: float) -> "IntervalTable":
        return cls.from_parts([path_unsafe_intervals(p, spec, radius + p.radius) for p in paths])

    def safe(self, cell: int) -> list[tuple[float, float]]:
        got = self._safe.get(cell)
        if got is not None:
            return got
        unsafe = self.unsafe.get(cell)
        if not unsafe:
            got = [(0.0, INF)]
        else:
            got = []
            t = 0.0
            for s, e in unsafe:
                if s > t:
                    got.append((t, s))
                t = max(t, e)
            if t < INF:
                got.append((t, INF))
        self._safe[cell] = got
        return got

    def is_free(self, cell: int, t0: float, t1: float) -> bool:
        """True if the cell is safe during the whole closed window [t0, t1]."""
        for s, e in self.unsafe.get(cell, ()):
            if s < t1 and e > t0:
                return False
        return True


# -- single-agent search -------------------------------------------------------------------

def sipp_search(
    start: tuple[int, int],
    goal: tuple[int, int],
    blocked: np.ndarray,
    table: IntervalTable,
    step_time: float,
    t_start: float = 0.0,
    hold: float = INF,
    max_expansions: int = 20_000,
):
    """Earliest-arrival search over (cell, safe interval) states.

    ``step_time`` is the duration of a straight move (diagonals take sqrt(2) times as
    long); waiting is free. The goal must stay safe for ``hold`` seconds after arrival.
    Returns a list of ``(cell, arrival_time, departure_time)`` or None.
    """
    n_rows, n_cols = blocked.shape
    free = ~blocked.ravel()
    s = start[0] * n_cols + start[1]
    g_cell = goal[0] * n_cols + goal[1]
    free = free.copy()
    free[s] = True
    if not free[g_cell]:
        return None
    # cheap exits for searches that would otherwise exhaust the whole space
    if not any(hi - max(lo, t_start) >= hold for lo, hi in table.safe(g_cell)):
        return None
    if not reachable_mask(blocked, start)[goal]:
        return None
    moves = move_table(blocked.shape)
    rows, cols = np.divmod(np.arange(n_rows * n_cols), n_cols)
    dr, dc = np.abs(rows - goal[0]), np.abs(cols - goal[1])
    h = ((np.maximum(dr, dc) - np.minimum(dr, dc)) + np.minimum(dr, dc) * SQRT2) * step_time
    h = h.tolist()
    diag_time = step_time * SQRT2

    start_iv = None
    for j, (lo, hi) in enumerate(table.safe(s)):
        if lo <= t_start <= hi:
            start_iv = j
            break
    if start_iv is None:
        return None
    state0 = (s, start_iv)
    best = {state0: t_start}
    parent: dict[tuple[int, int], tuple[tuple[int, int], float] | None] = {state0: None}
    counter = itertools.count()
    heap = [(t_start + h[s], t_start, next(counter), state0)]
    expansions = 0
    while heap:
        _, g, _, state = heapq.heappop(heap)
        if g > best[state]:
            continue
        cell, ivi = state
        lo, hi = table.safe(cell)[ivi]
        if cell == g_cell and hi >= g + hold:
            seq = []
            cur = state
            while cur is not None:
                seq.append(cur)
                cur = parent[cur][0] if parent[cur] else None
            seq.reverse()
            result = []
            for i, st in enumerate(seq):
                dep = parent[seq[i + 1]][1] if i + 1 < len(seq) else best[st]
                result.append((divmod(st[0], n_cols), best[st], dep))
            return result
        expansions += 1
        if expansions > max_expansions:
            return None
        for v, diag, sa, sb in moves[cell]:
            if not free[v]:
                continue
            if diag and not (free[sa] and free[sb]):
                continue
            dur = diag_time if diag else step_time
            for j, (vlo, vhi) in enumerate(table.safe(v)):
                if vlo + dur > hi:
                    break
                t0 = g if g > vlo else vlo
                arr = t0 + dur
                if arr > hi or arr > vhi:
                    continue
                key = (v, j)
                if arr < best.get(key, INF):
                    best[key] = arr
                    parent[key] = (state, t0)
                    heapq.heappush(heap, (arr + h[v], arr, next(counter), key))
    return None


def _cells_to_waypoints(seq, spec: GridSpec) -> list[tuple[float, float, float]]:
    pts: list[tuple[float, float, float]] = []
    for cell, arrival, depart in seq:
        x, y = spec.center(cell)
        if not pts or arrival > pts[-1][2]:
            pts.append((x, y, arrival))
        if depart > arrival:
            pts.append((x, y, depart))
    return pts


def smooth_waypoints(
    pts: list[tuple[float, float, float]],
    blocked: np.ndarray,
    table: IntervalTable,
    spec: GridSpec,
) -> list[tuple[float, float, float]]:
    """Forward string pulling. A chain ``i..j`` becomes one constant-speed segment over
    the same time window when every cell the segment touches is statically free and
    dynamically safe for the whole window. Endpoint times are kept, so duration is
    unchanged and length never grows."""
    if len(pts) <= 2:
        return list(pts)
    n = spec.n

    def ok(a, b) -> bool:
        (ax, ay, ta), (bx, by, tb) = a, b
        for r, c in segment_cells(spec, (ax, ay), (bx, by)):
            if blocked[r, c] or not table.is_free(r * n + c, ta, tb):
                return False
        return True

    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = i + 1
        while j + 1 < len(pts) and ok(pts[i], pts[j + 1]):
            j += 1
        out.append(pts[j])
        i = j
    return out


def sipp_plan(
    start: tuple[int, int],
    goal: tuple[int, int],
    static_grid: np.ndarray,
    dynamic_obstacles: Sequence[TimedPath] = (),
    agent_speed: float = 0.3,
    spec: GridSpec | None = None,
    radius: float = 0.2,
    t_start: float = 0.0,
    hold: float = INF,
    smooth: bool = True,
    max_expansions: int = 20_000,
    agent_id: int = 0,
) -> TimedPath:
    """Time-optimal single-agent path among moving discs; raises Infeasible."""
    spec = spec or GridSpec(static_grid.shape[0] * 0.2, static_grid.shape[0])
    table = IntervalTable.from_paths(dynamic_obstacles, spec, radius)
    seq = sipp_search(start, goal, static_grid, table, spec.cell / agent_speed, t_start, hold, max_expansions)
    if seq is None:
        raise Infeasible(f"no path from {start} to {goal}")
    pts = _cells_to_waypoints(seq, spec)
    if smooth:
        blocked = static_grid.copy()
        blocked[start] = False
        pts = smooth_waypoints(pts, blocked, table, spec)
    return TimedPath(agent_id, tuple(pts), radius)


# -- joint planning ---------------------------------------------------------------------------

class _AgentPlanner:
    """Plans the two legs for one agent given the paths of higher-priority agents."""

    def __init__(self, ws: Workspace, config: PlannerConfig):
        self.ws = ws
        self.config = config
        self.spec = ws.spec
        self.step_time = ws.spec.cell / config.agent_speed
        self._parts: dict[int, dict] = {}

    def parts_for(self, path: TimedPath, radius: float):
        # keyed by identity; the path is kept alive in the value so ids are not reused
        key = (id(path), radius)
        got = self._parts.get(key)
        if got is None:
            got = (path, path_unsafe_intervals(path, self.spec, radius + path.radius))
            self._parts[key] = got
        return got[1]

    def grid(self, req: PlanRequest, blockers: Sequence[tuple[float, float]]) -> np.ndarray:
        blocked = self.ws.blocked_for(req.agent_id, exclude_objects=(req.object_id,))
        if blockers:
            blocked = blocked | self.ws.agent_zone(blockers, 2.0 * self.ws.agent_radius)
        blocked = blocked.copy()
        blocked[self.ws.agent_cell(req.agent_id)] = False
        return blocked

    def table(self, higher: Sequence[TimedPath], radius: float) -> IntervalTable:
        return IntervalTable.from_parts([self.parts_for(p, radius) for p in higher])

    def leg(self, start, goal, blocked, table, t_start, hold):
        cfg = self.config
        seq = sipp_search(start, goal, blocked, table, self.step_time, t_start, hold, cfg.max_expansions)
        if seq is None:
            return None
        pts = _cells_to_waypoints(seq, self.spec)
        if cfg.smooth:
            pts = smooth_waypoints(pts, blocked, table, self.spec)
        return pts

    def leg1(self, req: PlanRequest, blocked, table):
        pts = self.leg(self.ws.agent_cell(req.agent_id), req.pick_cell, blocked, table, 0.0, self.config.pick_dwell)
        return pts

    def leg2(self, req: PlanRequest, blocked, table, leg1_pts):
        t_pick = leg1_pts[-1][2] + self.config.pick_dwell
        pts = self.leg(req.pick_cell, req.place_cell, blocked, table, t_pick, INF)
        if pts is None:
            return None
        return self.compose(req, leg1_pts, pts, t_pick)

    def compose(self, req, leg1_pts, leg2_pts, t_pick) -> TimedPath:
        cfg = self.config
        pts = list(leg1_pts)
        if cfg.pick_dwell > 0:
            x, y, _ = pts[-1]
            pts.append((x, y, t_pick))
        pts.extend(leg2_pts[1:] if leg2_pts[0][2] <= pts[-1][2] else leg2_pts)
        if cfg.place_dwell > 0:
            x, y, t = pts[-1]
            pts.append((x, y, t + cfg.place_dwell))
        radius = self.ws.scene.agent(req.agent_id).radius
        return TimedPath(req.agent_id, tuple(pts), radius, t_pick)


    def park(self, agent_id: int, goal, blockers) -> TimedPath | None:
        """Move an idle agent out of the way; it rests at ``goal`` afterwards."""
        blocked = self.ws.blocked_for(agent_id)
        if blockers:
            blocked = blocked | self.ws.agent_zone(blockers, 2.0 * self.ws.agent_radius)
        start = self.ws.agent_cell(agent_id)
        blocked = blocked.copy()
        blocked[start] = False
        pts = self.leg(start, goal, blocked, IntervalTable(), 0.0, INF)
        if pts is None or len(pts) < 2:
            return None
        return TimedPath(agent_id, tuple(pts), self.ws.scene.agent(agent_id).radius)


def _ordered(requests: Sequence[PlanRequest]) -> list[PlanRequest]:
    return sorted(requests, key=lambda r: (r.priority, r.agent_id))


def plan_joint(
    requests: Sequence[PlanRequest],
    ws: Workspace,
    config: PlannerConfig = PlannerConfig(),
) -> list[TimedPath] | None:
    """Prioritized planning in ascending priority; returns paths in request order or None.

    Agents without a request stand still and are static obstacles; agents that have not
    been planned yet are static obstacles for the ones planned before them.
    """
    agent_ids = [r.agent_id for r in requests]
    if len(set(agent_ids)) != len(agent_ids):
        raise ValueError("requests must have distinct agents")
    planner = _AgentPlanner(ws, config)
    ordered = _ordered(requests)
    idle = [g.position for g in ws.scene.agents if g.id not in set(agent_ids)]
    done: dict[int, TimedPath] = {}
    higher: list[TimedPath] = []
    for i, req in enumerate(ordered):
        blockers = idle + [ws.scene.agent(r.agent_id).position for r in ordered[i + 1:]]
        blocked = planner.grid(req, blockers)
        table = planner.table(higher, ws.scene.agent(req.agent_id).radius)
        l1 = planner.leg1(req, blocked, table)
        if l1 is None:
            return None
        path = planner.leg2(req, blocked, table, l1)
        if path is None:
            return None
        done[req.agent_id] = path
        higher.append(path)
    return [done[r.agent_id] for r in requests]


@dataclass
class Selection:
    regions: dict[int, object]  # agent id -> RegionCandidate
    paths: list[TimedPath]
    total_time: float  # F: sum of agent durations
    n_targets: int
    order: tuple[int, ...]


def select_regions(
    assignments: Sequence[tuple[int, int]],
    candidates: Mapping[int, Sequence],
    ws: Workspace,
    target_cells: Mapping[int, set],
    config: PlannerConfig = PlannerConfig(),
    parked: Mapping[int, tuple[int, int]] | None = None,
) -> Selection | None:
    """Pick one region per (agent, object) pair.

    Every region combination is planned (ascending agent id first, other priority
    orders only for combinations that failed). Feasible combinations are ranked by the
    number of regions on a target of the carried object's class, then by the summed
    traversal time, then lexicographically. Combinations that cannot reach the best
    target count found so far are skipped unplanned, which leaves the result unchanged.
    ``target_cells`` maps object id -> cells of targets of that object's class.
    ``parked`` maps idle agents to cells they clear out to before everyone else moves.
    """
    pairs = sorted(assignments)
    if not pairs:
        return None
    agents = [a for a, _ in pairs]
    obj_of = dict(pairs)
    for a in agents:
        if not candidates.get(a):
            raise ValueError(f"agent {a} has no candidate regions")
    planner = _AgentPlanner(ws, config)
    parked = dict(parked or {})
    idle = [g.position for g in ws.scene.agents if g.id not in set(agents) and g.id not in parked]
    park_paths: list[TimedPath] = []
    for a in sorted(parked):
        others = idle + [g.position for g in ws.scene.agents if g.id in set(agents) or (g.id in parked and g.id > a)]
        path = planner.park(a, parked[a], others)
        if path is None:
            return None
        park_paths.append(path)
    n_cand = {a: len(candidates[a]) for a in agents}
    all_keys = list(itertools.product(*[range(n_cand[a]) for a in agents]))
    solved: dict[tuple[int, ...], tuple[list[TimedPath], tuple[int, ...]]] = {}
    on_target = {a: [c.cell in target_cells.get(obj_of[a], set()) for c in candidates[a]] for a in agents}

    def key_hits(key) -> int:
        return sum(on_target[a][ci] for a, ci in zip(agents, key))

    best_hits = -1  # target count of the best feasible combination so far

    perms = list(itertools.islice(itertools.permutations(agents), config.max_permutations))
    for order in perms:
        pending = [k for k in all_keys if k not in solved and key_hits(k) >= best_hits]
        if not pending:
            break
        pos = {a: i for i, a in enumerate(agents)}
        pending_set = set(pending)
        spare = [sum(any(on_target[b]) for b in order[d:]) for d in range(len(order) + 1)]

        def dfs(depth: int, choice: dict[int, int], higher: list[TimedPath], hits: int):
            nonlocal best_hits
            if depth == len(order):
                key = tuple(choice[a] for a in agents)
                solved[key] = (list(higher), order)
                best_hits = max(best_hits, hits)
                return
            a = order[depth]
            # skip subtrees whose combinations are all solved already
            prefix = {b: choice[b] for b in order[:depth]}
            blockers = idle + [ws.scene.agent(b).position for b in order[depth + 1:]]
            req0 = PlanRequest(a, obj_of[a], ws.object_cells[obj_of[a]], candidates[a][0].cell)
            blocked = planner.grid(req0, blockers)
            table = planner.table(higher, ws.scene.agent(a).radius)
            l1 = None
            # on-target regions first so a strong bound turns up early
            for ci in sorted(range(n_cand[a]), key=lambda ci: (not on_target[a][ci], ci)):
                h = hits + on_target[a][ci]
                if h + spare[depth + 1] < best_hits:
                    continue
                choice_ci = dict(prefix)
                choice_ci[a] = ci
                if not any(all(k[pos[b]] == v for b, v in choice_ci.items()) for k in pending_set):
                    continue
                if l1 is None:
                    l1 = planner.leg1(req0, blocked, table)
                    if l1 is None:
                        return
                req = PlanRequest(a, obj_of[a], req0.pick_cell, candidates[a][ci].cell)
                path = planner.leg2(req, blocked, table, l1)
                if path is None:
                    continue
                dfs(depth + 1, choice_ci, higher + [path], h)

        dfs(0, {}, list(park_paths), 0)

    best = None
    best_rank = None
    for key in all_keys:
        if key not in solved:
            continue
        paths, order = solved[key]
        by_agent = {p.agent_id: p for p in paths}
        ordered_paths = [by_agent[a] for a in agents] + park_paths
        F = sum(p.total_time for p in ordered_paths)
        hits = key_hits(key)
        rank = (-hits, F, key)
        if best_rank is None or rank < best_rank:
            best_rank = rank
            best = Selection({a: candidates[a][ci] for a, ci in zip(agents, key)}, ordered_paths, F, hits, order)
    return best


# -- verification helpers ---------------------------------------------------------------------

def audit_agents(paths: Sequence[TimedPath], dt: float = 0.05, tol: float = 1e-9) -> list[tuple[float, int, int, float]]:
    """Dense-time check of pairwise disc overlap; returns (t, agent_a, agent_b, distance)."""
    if len(paths) < 2:
        return []
    t_end = max(p.end_time for p in paths)
    ts = np.arange(0.0, t_end + dt, dt)
    pos = [p.position_at(ts) for p in paths]
    bad = []
    for i in range(len(paths)):
        for j in range(i + 1, len(paths)):
            d = np.linalg.norm(pos[i] - pos[j], axis=1)
            lim = paths[i].radius + paths[j].radius - tol
            for k in np.nonzero(d < lim)[0]:
                bad.append((float(ts[k]), paths[i].agent_id, paths[j].agent_id, float(d[k])))
    return bad


def audit_static(paths: Sequence[TimedPath], obstacles, arena_size: float, dt: float = 0.05, tol: float = 1e-9):
    """Dense-time check of agent discs against static obstacles and the arena walls."""
    bad = []
    for p in paths:
        ts = np.arange(0.0, p.end_time + dt, dt)
        xy = p.position_at(ts)
        r = p.radius - tol
        out = (xy[:, 0] < r) | (xy[:, 1] < r) | (xy[:, 0] > arena_size - r) | (xy[:, 1] > arena_size - r)
        for obs in obstacles:
            out |= obs.distance_to_points(xy[:, 0], xy[:, 1]) < r
        for k in np.nonzero(out)[0]:
            bad.append((float(ts[k]), p.agent_id))
    return bad
