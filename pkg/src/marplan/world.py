"""Scenario generation with domain randomization, bird's-eye rasterization and
simulation-exact segmentation.

All objects and agents are generated on patch centers of the default 24x24 patch grid,
so every heatmap patch holds at most one object and placement regions coincide exactly
with target positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .grid import GridSpec, static_mask
from .scene import (
    AGENT_RADIUS,
    CLASSES,
    OBJECT_RADIUS,
    AgentState,
    ObjectState,
    Obstacle,
    RasterConfig,
    Scenario,
    Scene,
    wrap_angle,
)

MAX_ATTEMPTS = 10_000
OBJECT_GAP = 0.45  # min center distance between generated objects
AGENT_OBJECT_GAP = 0.5
AGENT_GAP = 1.0
OBSTACLE_GAP = 0.1
LINE_SPACING = 3  # cells between targets in a sorted line
CLUSTER_SPACING = 4  # Chebyshev cells between targets in a sorted cluster
COLOR_NOISE_SIGMA = 10.0

CLASS_RGB = {"red": (200, 30, 30), "green": (30, 170, 40), "blue": (30, 50, 200)}
AGENT_RGB = (250, 200, 0)
OBSTACLE_RGB = (40, 40, 40)


class ArenaTooCrowded(RuntimeError):
    def __init__(self, what: str):
        super().__init__(f"arena too crowded: could not place {what}")


@dataclass(frozen=True)
class RandomizationRanges:
    """Sampling ranges. Tuples of two floats are inclusive ranges; ``n_agents`` and
    ``n_objects`` are sets of choices."""

    arena_size: tuple[float, float] = (4.5, 5.5)
    n_agents: tuple[int, ...] = (2, 3)
    n_objects: tuple[int, ...] = (8, 12, 16)
    n_obstacles: tuple[int, int] = (5, 14)
    arena_gray: tuple[int, int] = (128, 255)
    rect_half_size: tuple[float, float] = (0.08, 0.25)
    disc_radius: tuple[float, float] = (0.08, 0.2)
    raster: RasterConfig = field(default_factory=RasterConfig)

    def validate(self) -> None:
        for name in ("arena_size", "n_obstacles", "arena_gray", "rect_half_size", "disc_radius"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range {lo}..{hi}")
        if self.arena_size[0] <= 0 or self.rect_half_size[0] <= 0 or self.disc_radius[0] <= 0:
            raise ValueError("sizes must be positive")
        if self.n_obstacles[0] < 0:
            raise ValueError("n_obstacles must be non-negative")
        if not (0 <= self.arena_gray[0] and self.arena_gray[1] <= 255):
            raise ValueError("arena_gray must lie in 0..255")
        if not self.n_agents or not self.n_objects or min(self.n_agents) < 1:
            raise ValueError("need at least one agent and object count")
        if min(self.n_objects) <= max(self.n_agents):
            raise ValueError("object count must exceed agent count (m < n)")


def generate_scenario(task_kind: str, ranges: RandomizationRanges | None = None, seed: int = 0) -> Scenario:
    """Sample a start scene and derive its target per ``task_kind``. Pure in ``seed``."""
    ranges = ranges or RandomizationRanges()
    ranges.validate()
    rng = np.random.default_rng(seed)
    arena = float(rng.uniform(*ranges.arena_size))
    gray = int(rng.integers(ranges.arena_gray[0], ranges.arena_gray[1] + 1))
    n_objects = int(rng.choice(ranges.n_objects))
    n_agents = int(rng.choice(ranges.n_agents))
    n_obstacles = int(rng.integers(ranges.n_obstacles[0], ranges.n_obstacles[1] + 1))

    spec = GridSpec.from_raster(arena, ranges.raster)
    obstacles = _place_obstacles(rng, arena, n_obstacles, ranges)
    free = np.argwhere(largest_free_component(~static_mask(spec, obstacles, AGENT_RADIUS)))
    if len(free) == 0:
        raise ArenaTooCrowded("any entity")

    labels = [CLASSES[i % len(CLASSES)] for i in range(n_objects)]
    labels = [labels[i] for i in rng.permutation(n_objects)]
    positions = _place_points(rng, spec, free, n_objects, [], OBJECT_GAP, "objects")
    objects = tuple(ObjectState(i, labels[i], positions[i]) for i in range(n_objects))

    agent_pos: list[tuple[float, float]] = []
    for _ in range(n_agents):
        for _attempt in range(MAX_ATTEMPTS):
            cand = spec.center(tuple(free[rng.integers(len(free))]))
            if all(math.dist(cand, o.position) >= AGENT_OBJECT_GAP for o in objects) and all(
                math.dist(cand, p) >= AGENT_GAP for p in agent_pos
            ):
                agent_pos.append(cand)
                break
        else:
            raise ArenaTooCrowded("agents")
    agents = tuple(
        AgentState(i, p, wrap_angle(float(rng.uniform(-math.pi, math.pi)))) for i, p in enumerate(agent_pos)
    )
    start = Scene(arena, objects, agents, tuple(obstacles), gray)

    if task_kind == "shuffle":
        perm = rng.permutation(n_objects)
        target_pos = [objects[int(j)].position for j in perm]
    elif task_kind == "random":
        target_pos = _place_points(rng, spec, free, n_objects, [], OBJECT_GAP, "targets")
    elif task_kind == "sort":
        target_pos = _sorted_targets(rng, spec, free, labels)
    else:
        raise ValueError(f"unknown task kind {task_kind!r}")
    target = Scene(
        arena,
        tuple(ObjectState(o.id, o.class_label, target_pos[o.id]) for o in objects),
        (),
        tuple(obstacles),
        gray,
    )
    return Scenario(start, target, task_kind, int(seed))


def largest_free_component(free: np.ndarray) -> np.ndarray:
    """Keep the biggest connected free area so every generated entity can reach every other."""
    labels, count = ndimage.label(free)
    if count == 0:
        return free
    sizes = np.bincount(labels.ravel())[1:]
    return labels == 1 + int(np.argmax(sizes))


def _place_obstacles(rng, arena: float, count: int, ranges: RandomizationRanges) -> list[Obstacle]:
    placed: list[Obstacle] = []
    for _ in range(count):
        for _attempt in range(MAX_ATTEMPTS):
            if rng.random() < 0.5:
                hw, hh = rng.uniform(*ranges.rect_half_size, size=2)
                cx = rng.uniform(hw, arena - hw)
                cy = rng.uniform(hh, arena - hh)
                cand = Obstacle.rect(cx, cy, hw, hh)
            else:
                r = rng.uniform(*ranges.disc_radius)
                cand = Obstacle.disc(rng.uniform(r, arena - r), rng.uniform(r, arena - r), r)
            if all(_obstacle_gap(cand, o) >= OBSTACLE_GAP for o in placed):
                placed.append(cand)
                break
        else:
            raise ArenaTooCrowded("obstacles")
    return placed


def _obstacle_gap(a: Obstacle, b: Obstacle) -> float:
    if a.kind == "disc" and b.kind == "disc":
        return math.dist(a.center, b.center) - a.size[0] - b.size[0]
    if a.kind == "disc":
        a, b = b, a
    # a is a rectangle here
    x0, x1, y0, y1 = a.bounds
    return float(b.distance_to_boxes(x0, x1, y0, y1))


def _place_points(rng, spec: GridSpec, free: np.ndarray, count: int, existing, gap: float, what: str):
    out: list[tuple[float, float]] = []
    taken = list(existing)
    for _ in range(count):
        for _attempt in range(MAX_ATTEMPTS):
            cand = spec.center(tuple(free[rng.integers(len(free))]))
            if all(math.dist(cand, p) >= gap for p in taken):
                out.append(cand)
                taken.append(cand)
                break
        else:
            raise ArenaTooCrowded(what)
    return out


def _sorted_targets(rng, spec: GridSpec, free: np.ndarray, labels: Sequence[str]):
    """Per-class target layouts: compact clusters or evenly spaced lines."""
    pattern = "line" if rng.random() < 0.5 else "cluster"
    free_set = {tuple(map(int, c)) for c in free}
    per_class = {c: [i for i, lab in enumerate(labels) if lab == c] for c in CLASSES}
    for _attempt in range(200):
        cells: dict[int, tuple[int, int]] = {}
        anchors: list[tuple[int, int]] = []
        ok = True
        for cls in CLASSES:
            ids = per_class[cls]
            if not ids:
                continue
            anchor = _pick_anchor(rng, spec, free, anchors)
            if anchor is None:
                ok = False
                break
            anchors.append(anchor)
            chosen = None
            if pattern == "line":
                chosen = _line_layout(rng, anchor, len(ids), free_set, list(cells.values()), spec)
            if chosen is None:
                chosen = _cluster_layout(anchor, len(ids), free, list(cells.values()), spec)
            if chosen is None:
                ok = False
                break
            for i, c in zip(ids, chosen):
                cells[i] = c
        if ok:
            return [spec.center(cells[i]) for i in range(len(labels))]
    raise ArenaTooCrowded("sorted targets")


def _pick_anchor(rng, spec: GridSpec, free: np.ndarray, anchors):
    min_sep = spec.n / 3.0
    for _ in range(1000):
        cand = tuple(map(int, free[rng.integers(len(free))]))
        if all(math.hypot(cand[0] - a[0], cand[1] - a[1]) >= min_sep for a in anchors):
            return cand
    return None


def _spaced(cell, others, spec: GridSpec, cheb: int) -> bool:
    for o in others:
        if max(abs(cell[0] - o[0]), abs(cell[1] - o[1])) < cheb:
            return False
        if math.dist(spec.center(cell), spec.center(o)) < OBJECT_GAP:
            return False
    return True


def _line_layout(rng, anchor, count, free_set, taken, spec):
    directions = [(0, 1), (0, -1), (1, 0), (-1, 0)]
    for k in rng.permutation(4):
        dr, dc = directions[int(k)]
        cells = [(anchor[0] + dr * LINE_SPACING * j, anchor[1] + dc * LINE_SPACING * j) for j in range(count)]
        if all(c in free_set for c in cells) and all(_spaced(c, taken, spec, CLUSTER_SPACING) for c in cells):
            return cells
    return None


def _cluster_layout(anchor, count, free, taken, spec):
    d2 = (free[:, 0] - anchor[0]) ** 2 + (free[:, 1] - anchor[1]) ** 2
    order = np.lexsort((free[:, 1], free[:, 0], d2))
    chosen: list[tuple[int, int]] = []
    for k in order:
        cell = (int(free[k, 0]), int(free[k, 1]))
        if _spaced(cell, taken + chosen, spec, CLUSTER_SPACING):
            chosen.append(cell)
            if len(chosen) == count:
                return chosen
    return None


# -- rasterization ------------------------------------------------------------------

def _pixel_centers(arena_size: float, raster: RasterConfig) -> np.ndarray:
    return (np.arange(raster.image_size) + 0.5) * raster.meters_per_pixel(arena_size)


def _disc_pixels(center, radius, arena_size, raster):
    """Row/col slices of the bounding box and the boolean disc mask inside it."""
    mpp = raster.meters_per_pixel(arena_size)
    n = raster.image_size
    x, y = center
    c0 = max(int(math.floor((x - radius) / mpp)) - 1, 0)
    c1 = min(int(math.ceil((x + radius) / mpp)) + 1, n)
    r0 = max(int(math.floor((y - radius) / mpp)) - 1, 0)
    r1 = min(int(math.ceil((y + radius) / mpp)) + 1, n)
    px = (np.arange(c0, c1) + 0.5) * mpp
    py = (np.arange(r0, r1) + 0.5) * mpp
    mask = (px[None, :] - x) ** 2 + (py[:, None] - y) ** 2 <= radius * radius
    return slice(r0, r1), slice(c0, c1), mask


def _obstacle_pixels(obs: Obstacle, arena_size: float, raster: RasterConfig) -> np.ndarray:
    centers = _pixel_centers(arena_size, raster)
    return obs.covers(centers[None, :], centers[:, None])


def object_color(obj: ObjectState, noise_seed: int = 0, sigma: float = COLOR_NOISE_SIGMA) -> np.ndarray:
    base = np.asarray(CLASS_RGB[obj.class_label], dtype=float)
    jitter = np.random.default_rng((int(noise_seed), int(obj.id))).normal(0.0, sigma, size=3)
    return np.clip(np.rint(base + jitter), 0, 255).astype(np.uint8)


def rasterize(scene: Scene, raster: RasterConfig = RasterConfig(), noise_seed: int = 0) -> np.ndarray:
    """Top-down RGB image (rows follow +y). Objects get per-object Gaussian color noise."""
    n = raster.image_size
    img = np.full((n, n, 3), scene.arena_gray, dtype=np.uint8)
    for obs in scene.obstacles:
        img[_obstacle_pixels(obs, scene.arena_size, raster)] = OBSTACLE_RGB
    for obj in scene.objects:
        rs, cs, mask = _disc_pixels(obj.position, obj.radius, scene.arena_size, raster)
        img[rs, cs][mask] = object_color(obj, noise_seed)
    for ag in scene.agents:
        rs, cs, mask = _disc_pixels(ag.position, ag.radius, scene.arena_size, raster)
        img[rs, cs][mask] = AGENT_RGB
    return img


def binary_occupancy(scene: Scene, raster: RasterConfig = RasterConfig()) -> np.ndarray:
    """Pixel grid with 1 where an obstacle or object covers the pixel center; agents excluded."""
    n = raster.image_size
    occ = np.zeros((n, n), dtype=np.uint8)
    for obs in scene.obstacles:
        occ[_obstacle_pixels(obs, scene.arena_size, raster)] = 1
    for obj in scene.objects:
        rs, cs, mask = _disc_pixels(obj.position, obj.radius, scene.arena_size, raster)
        occ[rs, cs][mask] = 1
    return occ


def segment(scene: Scene) -> tuple[tuple[ObjectState, ...], tuple[AgentState, ...]]:
    """Object and agent states read directly from simulator ground truth."""
    return tuple(scene.objects), tuple(scene.agents)


def extract_blobs(image: np.ndarray, arena_size: float, raster: RasterConfig = RasterConfig()) -> dict:
    """Color-blob segmentation of a rendered image.

    Returns ``{"objects": [(class_label, (x, y)), ...], "agents": [(x, y), ...]}`` with
    centroids in meters.
    """
    img = image.astype(float)
    palette = {**{c: CLASS_RGB[c] for c in CLASSES}, "agent": AGENT_RGB, "obstacle": OBSTACLE_RGB}
    names = list(palette)
    dists = np.stack([np.linalg.norm(img - np.asarray(palette[k], float), axis=-1) for k in names])
    gray_dist = np.linalg.norm(img - img.mean(axis=-1, keepdims=True), axis=-1)
    # background is any unsaturated pixel brighter than the obstacle shade
    bright = img.mean(axis=-1) > 100
    label_idx = np.argmin(dists, axis=0)
    background = bright & (gray_dist < dists.min(axis=0))
    mpp = raster.meters_per_pixel(arena_size)
    out = {"objects": [], "agents": []}
    for k, name in enumerate(names):
        if name == "obstacle":
            continue
        mask = (label_idx == k) & ~background
        labels, count = ndimage.label(mask)
        if count == 0:
            continue
        centroids = ndimage.center_of_mass(mask, labels, range(1, count + 1))
        for r, c in centroids:
            xy = ((c + 0.5) * mpp, (r + 0.5) * mpp)
            if name == "agent":
                out["agents"].append(xy)
            else:
                out["objects"].append((name, xy))
    return out


def _paint_discs(grid: np.ndarray, discs, value, arena_size, raster):
    for center, radius in discs:
        rs, cs, mask = _disc_pixels(center, radius, arena_size, raster)
        grid[rs, cs][mask] = value


def encode_agent_map(scene: Scene, agent_id: int, raster: RasterConfig = RasterConfig()) -> np.ndarray:
    """Single-channel agent map: 1.0 on the queried agent, 0.5 on every other agent."""
    n = raster.image_size
    grid = np.zeros((n, n), dtype=np.float32)
    others = [(g.position, g.radius) for g in scene.agents if g.id != agent_id]
    _paint_discs(grid, others, 0.5, scene.arena_size, raster)
    me = scene.agent(agent_id)
    _paint_discs(grid, [(me.position, me.radius)], 1.0, scene.arena_size, raster)
    return grid


def encode_object_map(
    scene: Scene,
    pick_assignments: Sequence[tuple[int, int]],
    current_object: int,
    raster: RasterConfig = RasterConfig(),
) -> np.ndarray:
    """+1 on the current pick, -1 on objects picked by the other agents, 0 elsewhere."""
    n = raster.image_size
    grid = np.zeros((n, n), dtype=np.float32)
    others = [scene.object(o) for _, o in pick_assignments if o != current_object]
    _paint_discs(grid, [(o.position, o.radius) for o in others], -1.0, scene.arena_size, raster)
    cur = scene.object(current_object)
    _paint_discs(grid, [(cur.position, cur.radius)], 1.0, scene.arena_size, raster)
    return grid


def segmentation_mask(scene: Scene, picked_object: int, raster: RasterConfig = RasterConfig()) -> np.ndarray:
    """Three channels: picked object, all other content, free space (uint8 0/1)."""
    n = raster.image_size
    picked = np.zeros((n, n), dtype=np.uint8)
    obj = scene.object(picked_object)
    _paint_discs(picked, [(obj.position, obj.radius)], 1, scene.arena_size, raster)
    other = binary_occupancy(scene, raster)
    _paint_discs(other, [(g.position, g.radius) for g in scene.agents], 1, scene.arena_size, raster)
    other[picked == 1] = 0
    free = ((picked == 0) & (other == 0)).astype(np.uint8)
    return np.stack([picked, other, free], axis=-1)


# -- image files ------------------------------------------------------------------------

def write_ppm(path, rgb: np.ndarray) -> None:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(rgb.tobytes())


def write_pgm(path, gray: np.ndarray) -> None:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    h, w = gray.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(gray.tobytes())


def read_pnm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    pos += 1  # single whitespace byte after maxval
    magic, w, h = tokens[0], int(tokens[1]), int(tokens[2])
    channels = 3 if magic == b"P6" else 1
    arr = np.frombuffer(data[pos: pos + w * h * channels], dtype=np.uint8)
    return arr.reshape((h, w, 3) if channels == 3 else (h, w))
