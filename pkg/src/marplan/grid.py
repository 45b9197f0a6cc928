"""Patch-resolution navigation grid: obstacle inflation, octile A*/Dijkstra, flood fill.

Cells are indexed ``(row, col)`` with ``row = floor(y / cell)`` and ``col = floor(x / cell)``.
Path costs are accumulated as (straight, diagonal) move counts and evaluated as
``a + b * sqrt(2)`` so equal move multisets give bit-identical distances regardless of
expansion order (needed for exact symmetry under flips and rotations).
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .scene import Obstacle, RasterConfig

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class GridSpec:
    arena_size: float
    n: int = 24

    @classmethod
    def from_raster(cls, arena_size: float, raster: RasterConfig = RasterConfig()) -> "GridSpec":
        return cls(float(arena_size), raster.n_patches)

    @property
    def cell(self) -> float:
        return self.arena_size / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def center(self, cell: tuple[int, int]) -> tuple[float, float]:
        r, c = cell
        return ((c + 0.5) * self.cell, (r + 0.5) * self.cell)

    def cell_of(self, position: Sequence[float]) -> tuple[int, int]:
        x, y = position
        c = min(max(int(math.floor(x / self.cell)), 0), self.n - 1)
        r = min(max(int(math.floor(y / self.cell)), 0), self.n - 1)
        return (r, c)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinate arrays ``(X, Y)`` of shape ``(n, n)``."""
        ax = (np.arange(self.n) + 0.5) * self.cell
        return np.meshgrid(ax, ax)

    def box_bounds(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        idx = np.arange(self.n)
        lo = idx * self.cell
        hi = (idx + 1) * self.cell
        x0, y0 = np.meshgrid(lo, lo)
        x1, y1 = np.meshgrid(hi, hi)
        return x0, x1, y0, y1


def static_mask(spec: GridSpec, obstacles: Iterable[Obstacle], clearance: float) -> np.ndarray:
    """Cells whose square comes closer than ``clearance`` to an obstacle or the arena wall.

    Any point of a free cell therefore keeps a disc of radius ``clearance`` collision-free.
    """
    x0, x1, y0, y1 = spec.box_bounds()
    a = spec.arena_size
    blocked = (x0 < clearance) | (y0 < clearance) | (a - x1 < clearance) | (a - y1 < clearance)
    for obs in obstacles:
        blocked |= obs.distance_to_boxes(x0, x1, y0, y1) < clearance
    return blocked


def disc_mask(spec: GridSpec, centers: Sequence[Sequence[float]], radius: float) -> np.ndarray:
    """Cells whose center lies strictly within ``radius`` of any given point."""
    X, Y = spec.centers()
    out = np.zeros(spec.shape, dtype=bool)
    for x, y in centers:
        out |= (X - x) ** 2 + (Y - y) ** 2 < radius * radius
    return out


def disc_mask_squares(spec: GridSpec, centers: Sequence[Sequence[float]], radius: float) -> np.ndarray:
    """Cells whose square comes strictly within ``radius`` of any given point."""
    x0, x1, y0, y1 = spec.box_bounds()
    out = np.zeros(spec.shape, dtype=bool)
    for x, y in centers:
        dx = np.maximum(np.maximum(x0 - x, x - x1), 0.0)
        dy = np.maximum(np.maximum(y0 - y, y - y1), 0.0)
        out |= dx * dx + dy * dy < radius * radius
    return out


@lru_cache(maxsize=16)
def _move_table(n_rows: int, n_cols: int):
    """Per flat cell: tuple of (neighbor, is_diagonal, side_a, side_b)."""
    table = []
    for r in range(n_rows):
        for c in range(n_cols):
            moves = []
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dr == 0 and dc == 0:
                        continue
                    rr, cc = r + dr, c + dc
                    if not (0 <= rr < n_rows and 0 <= cc < n_cols):
                        continue
                    diag = dr != 0 and dc != 0
                    side_a = r * n_cols + cc if diag else -1
                    side_b = rr * n_cols + c if diag else -1
                    moves.append((rr * n_cols + cc, diag, side_a, side_b))
            table.append(tuple(moves))
    return tuple(table)


def move_table(shape: tuple[int, int]):
    return _move_table(int(shape[0]), int(shape[1]))


def octile(a: tuple[int, int], b: tuple[int, int]) -> float:
    dr, dc = abs(a[0] - b[0]), abs(a[1] - b[1])
    lo, hi = min(dr, dc), max(dr, dc)
    return (hi - lo) + lo * SQRT2


def dijkstra(blocked: np.ndarray, source: tuple[int, int]) -> np.ndarray:
    """Octile shortest-path distance (in cells) from ``source`` to every cell.

    Moves are 8-connected without corner cutting. The source itself is never treated as
    blocked; unreachable cells get ``inf``.
    """
    n_rows, n_cols = blocked.shape
    free = ~blocked.ravel()
    table = move_table(blocked.shape)
    size = n_rows * n_cols
    a_cnt = [-1] * size
    b_cnt = [-1] * size
    dist = [math.inf] * size
    done = [False] * size
    s = source[0] * n_cols + source[1]
    a_cnt[s] = b_cnt[s] = 0
    dist[s] = 0.0
    heap = [(0.0, s)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        au, bu = a_cnt[u], b_cnt[u]
        for v, diag, sa, sb in table[u]:
            if done[v] or not free[v]:
                continue
            if diag:
                if not (free[sa] and free[sb]):
                    continue
                na, nb = au, bu + 1
            else:
                na, nb = au + 1, bu
            nd = na + nb * SQRT2
            if nd < dist[v]:
                dist[v] = nd
                a_cnt[v], b_cnt[v] = na, nb
                heapq.heappush(heap, (nd, v))
    return np.asarray(dist, dtype=float).reshape(n_rows, n_cols)


def astar(blocked: np.ndarray, start: tuple[int, int], goal: tuple[int, int]):
    """Octile A* from ``start`` to ``goal``. Returns ``(cost, path)``; ``(inf, None)`` if
    the goal is blocked or unreachable. ``path`` is a list of (row, col) cells."""
    n_rows, n_cols = blocked.shape
    if blocked[goal] and goal != start:
        return math.inf, None
    free = ~blocked.ravel()
    table = move_table(blocked.shape)
    s = start[0] * n_cols + start[1]
    g_idx = goal[0] * n_cols + goal[1]
    gr, gc = goal
    best = {s: (0, 0)}
    parent = {s: -1}
    closed = set()
    heap = [(octile(start, goal), 0.0, s)]
    while heap:
        _, g, u = heapq.heappop(heap)
        if u in closed:
            continue
        if u == g_idx:
            path = []
            while u != -1:
                path.append(divmod(u, n_cols))
                u = parent[u]
            return g, path[::-1]
        closed.add(u)
        au, bu = best[u]
        for v, diag, sa, sb in table[u]:
            if v in closed or not free[v]:
                continue
            if diag:
                if not (free[sa] and free[sb]):
                    continue
                na, nb = au, bu + 1
            else:
                na, nb = au + 1, bu
            ng = na + nb * SQRT2
            prev = best.get(v)
            if prev is None or ng < prev[0] + prev[1] * SQRT2:
                best[v] = (na, nb)
                parent[v] = u
                vr, vc = divmod(v, n_cols)
                dr, dc = abs(vr - gr), abs(vc - gc)
                h = abs(dr - dc) + min(dr, dc) * SQRT2
                heapq.heappush(heap, (ng + h, ng, v))
    return math.inf, None


def reachable_mask(blocked: np.ndarray, source: tuple[int, int]) -> np.ndarray:
    """Flood fill of free cells connected to ``source``.

    Without corner cutting every diagonal move implies a 4-connected detour, so
    4-connectivity gives exactly the 8-connected reachable set.
    """
    free = ~blocked
    free = free.copy()
    free[source] = True
    labels, _ = ndimage.label(free)
    return labels == labels[source]


def segment_cells(spec: GridSpec, p: Sequence[float], q: Sequence[float], eps: float = 1e-9) -> list[tuple[int, int]]:
    """Cells whose closed square (grown by ``eps``) intersects the segment ``p -> q``."""
    cell = spec.cell
    (px, py), (qx, qy) = p, q
    c_lo = max(int(math.floor(min(px, qx) / cell - eps)) - 1, 0)
    c_hi = min(int(math.floor(max(px, qx) / cell + eps)) + 1, spec.n - 1)
    r_lo = max(int(math.floor(min(py, qy) / cell - eps)) - 1, 0)
    r_hi = min(int(math.floor(max(py, qy) / cell + eps)) + 1, spec.n - 1)
    rows = np.arange(r_lo, r_hi + 1)
    cols = np.arange(c_lo, c_hi + 1)
    R, C = np.meshgrid(rows, cols, indexing="ij")
    x0 = C * cell - eps
    x1 = (C + 1) * cell + eps
    y0 = R * cell - eps
    y1 = (R + 1) * cell + eps
    lo, hi = _slab(px, qx - px, x0, x1, 0.0, 1.0)
    lo2, hi2 = _slab(py, qy - py, y0, y1, lo, hi)
    hit = lo2 <= hi2
    return [(int(r), int(c)) for r, c in zip(R[hit], C[hit])]


def _slab(p0, d, lo_b, hi_b, t_lo, t_hi):
    """Clip parameter range [t_lo, t_hi] of ``p0 + t*d`` to the slab [lo_b, hi_b]."""
    lo_b = np.asarray(lo_b, dtype=float)
    hi_b = np.asarray(hi_b, dtype=float)
    t_lo = np.broadcast_to(np.asarray(t_lo, dtype=float), lo_b.shape).copy()
    t_hi = np.broadcast_to(np.asarray(t_hi, dtype=float), lo_b.shape).copy()
    if d == 0.0:
        outside = (p0 < lo_b) | (p0 > hi_b)
        t_hi[outside] = -np.inf
        return t_lo, t_hi
    ta = (lo_b - p0) / d
    tb = (hi_b - p0) / d
    return np.maximum(t_lo, np.minimum(ta, tb)), np.minimum(t_hi, np.maximum(ta, tb))
