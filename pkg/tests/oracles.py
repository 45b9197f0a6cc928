"""Independent reference implementations used to check the package."""
from __future__ import annotations

import heapq
import itertools
import math
from collections import deque

import numpy as np

SQRT2 = math.sqrt(2.0)


def unsafe_free(unsafe: dict, cell: int, t0: float, t1: float) -> bool:
    """Closed window [t0, t1] misses every open unsafe interval of the cell."""
    return all(not (s < t1 and e > t0) for s, e in unsafe.get(cell, ()))


def time_expanded_arrival(start, goal, blocked, unsafe, step_time, t_start=0.0, hold=math.inf, t_max=500.0):
    """Earliest goal arrival by uniform-cost search over (cell, exact time) states.

    From a state the agent may leave now or at any later instant at which some unsafe
    interval ends, provided its cell stays free while it waits, toward any of its 8
    neighbours (diagonals need both side cells statically free). Every stretch of
    feasible departure times starts at such an instant, so this enumeration is complete. A state is dropped
    when an earlier visit to the same cell could have waited until now. ``unsafe`` is
    {flat cell: [(s, e)]} with raw, possibly overlapping, open intervals.
    """
    n_rows, n_cols = blocked.shape
    free = ~blocked.copy()
    free[start] = True
    if not free[goal]:
        return None
    ends = sorted({e for iv in unsafe.values() for _, e in iv if math.isfinite(e)})
    s = start[0] * n_cols + start[1]
    g = goal[0] * n_cols + goal[1]
    if not unsafe_free(unsafe, s, t_start, t_start):
        return None
    heap = [(t_start, s)]
    visits: dict[int, list[float]] = {}
    while heap:
        t, u = heapq.heappop(heap)
        if t > t_max or any(unsafe_free(unsafe, u, t0, t) for t0 in visits.get(u, ())):
            continue
        visits.setdefault(u, []).append(t)
        if u == g and unsafe_free(unsafe, g, t, t + hold):
            return t
        departures = [t]
        for e in ends:
            if e > t:
                if not unsafe_free(unsafe, u, t, e):
                    break
                departures.append(e)
        r, c = divmod(u, n_cols)
        for dr, dc in itertools.product((-1, 0, 1), repeat=2):
            if dr == dc == 0:
                continue
            rr, cc = r + dr, c + dc
            if not (0 <= rr < n_rows and 0 <= cc < n_cols) or not free[rr, cc]:
                continue
            diag = dr != 0 and dc != 0
            if diag and not (free[r, cc] and free[rr, c]):
                continue
            v = rr * n_cols + cc
            dur = step_time * SQRT2 if diag else step_time
            for t0 in departures:
                if unsafe_free(unsafe, u, t0, t0 + dur) and unsafe_free(unsafe, v, t0, t0 + dur):
                    heapq.heappush(heap, (t0 + dur, v))
    return None


def brute_force_assignment(cost) -> float:
    """Minimum over every injective row-to-column map (rows <= cols)."""
    cost = np.asarray(cost, dtype=float)
    n, m = cost.shape
    best = math.inf
    for cols in itertools.permutations(range(m), n):
        best = min(best, sum(cost[i, j] for i, j in enumerate(cols)))
    return best


def flood_fill(blocked, source) -> np.ndarray:
    """8-connected reachability by breadth-first search; diagonals may not cut corners."""
    n_rows, n_cols = blocked.shape
    seen = np.zeros(blocked.shape, dtype=bool)
    if blocked[source]:
        return seen
    seen[source] = True
    todo = deque([source])
    while todo:
        r, c = todo.popleft()
        for dr, dc in itertools.product((-1, 0, 1), repeat=2):
            rr, cc = r + dr, c + dc
            if (dr or dc) and 0 <= rr < n_rows and 0 <= cc < n_cols and not blocked[rr, cc] and not seen[rr, cc]:
                if dr and dc and (blocked[r, cc] or blocked[rr, c]):
                    continue
                seen[rr, cc] = True
                todo.append((rr, cc))
    return seen


def bfs_octile_distance(blocked, source) -> np.ndarray:
    """Shortest 8-connected path costs (1 straight, sqrt 2 diagonal) by Bellman-Ford style
    relaxation until nothing changes."""
    d = np.full(blocked.shape, math.inf)
    if blocked[source]:
        return d
    d[source] = 0.0
    n_rows, n_cols = blocked.shape
    changed = True
    while changed:
        changed = False
        for r in range(n_rows):
            for c in range(n_cols):
                if blocked[r, c] or not math.isfinite(d[r, c]):
                    continue
                for dr, dc in itertools.product((-1, 0, 1), repeat=2):
                    rr, cc = r + dr, c + dc
                    if not (dr or dc) or not (0 <= rr < n_rows and 0 <= cc < n_cols) or blocked[rr, cc]:
                        continue
                    if dr and dc and (blocked[r, cc] or blocked[rr, c]):
                        continue
                    nd = d[r, c] + (SQRT2 if dr and dc else 1.0)
                    if nd < d[rr, cc] - 1e-12:
                        d[rr, cc] = nd
                        changed = True
    return d


def sampled_overlaps(paths, dt=0.05):
    """Dense-time disc overlap check between every pair of timed paths. Each path is held
    at its last waypoint after it ends. Returns (t, i, j, penetration) tuples."""
    if not paths:
        return []
    t_end = max(p.end_time for p in paths)
    ts = np.arange(0.0, t_end + dt, dt)
    pos = [p.position_at(ts) for p in paths]
    out = []
    for i, j in itertools.combinations(range(len(paths)), 2):
        gap = np.hypot(*(pos[i] - pos[j]).T) - (paths[i].radius + paths[j].radius)
        k = int(np.argmin(gap))
        if gap[k] < -1e-9:
            out.append((float(ts[k]), i, j, float(-gap[k])))
    return out


def sampled_obstacle_hits(paths, obstacles, dt=0.05):
    """Dense-time check that no agent disc overlaps a static obstacle."""
    out = []
    for p in paths:
        ts = np.arange(p.start_time, p.end_time + dt, dt)
        xy = p.position_at(ts)
        for obs in obstacles:
            d = obs.distance_to_points(xy[:, 0], xy[:, 1]) - p.radius
            if d.min() < -1e-9:
                out.append((p.agent_id, obs, float(-d.min())))
    return out
