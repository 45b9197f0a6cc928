"""Domain types for the planar workspace and their JSON form."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

CLASSES = ("red", "green", "blue")
TASK_KINDS = ("shuffle", "sort", "random")

AGENT_RADIUS = 0.2  # 0.4 m footprint
OBJECT_RADIUS = 0.1


class SceneError(ValueError):
    pass


@dataclass(frozen=True)
class RasterConfig:
    image_size: int = 480
    patch_size: int = 20

    def __post_init__(self):
        if self.image_size <= 0 or self.patch_size <= 0:
            raise ValueError("image and patch sizes must be positive")
        if self.image_size % self.patch_size:
            raise ValueError(
                f"image_size {self.image_size} not divisible by patch_size {self.patch_size}"
            )

    @property
    def n_patches(self) -> int:
        return self.image_size // self.patch_size

    def meters_per_pixel(self, arena_size: float) -> float:
        return arena_size / self.image_size


@dataclass(frozen=True)
class ObjectState:
    id: int
    class_label: str
    position: tuple[float, float]
    radius: float = OBJECT_RADIUS

    def __post_init__(self):
        if self.radius <= 0:
            raise SceneError(f"object {self.id}: radius must be positive")
        if self.class_label not in CLASSES:
            raise SceneError(f"object {self.id}: unknown class {self.class_label!r}")


@dataclass(frozen=True)
class AgentState:
    id: int
    position: tuple[float, float]
    heading: float = 0.0
    radius: float = AGENT_RADIUS

    def __post_init__(self):
        if not -math.pi <= self.heading < math.pi:
            raise SceneError(f"agent {self.id}: heading {self.heading} outside [-pi, pi)")


def wrap_angle(theta: float) -> float:
    wrapped = (theta + math.pi) % (2.0 * math.pi) - math.pi
    # float modulo can land exactly on +pi
    return -math.pi if wrapped >= math.pi else wrapped


@dataclass(frozen=True)
class Obstacle:
    """Static obstacle: an axis-aligned rectangle (``size`` = half extents) or a disc
    (``size`` = (radius, radius))."""

    kind: str
    center: tuple[float, float]
    size: tuple[float, float]

    def __post_init__(self):
        if self.kind not in ("rect", "disc"):
            raise SceneError(f"unknown obstacle kind {self.kind!r}")
        if min(self.size) <= 0:
            raise SceneError("obstacle extent must be positive")

    @classmethod
    def rect(cls, cx, cy, half_w, half_h) -> "Obstacle":
        return cls("rect", (float(cx), float(cy)), (float(half_w), float(half_h)))

    @classmethod
    def disc(cls, cx, cy, radius) -> "Obstacle":
        return cls("disc", (float(cx), float(cy)), (float(radius), float(radius)))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        (cx, cy), (hx, hy) = self.center, self.size
        return cx - hx, cx + hx, cy - hy, cy + hy

    def distance_to_points(self, xs, ys):
        """Euclidean distance from points to the obstacle (0 inside)."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        cx, cy = self.center
        if self.kind == "disc":
            return np.maximum(np.hypot(xs - cx, ys - cy) - self.size[0], 0.0)
        hx, hy = self.size
        dx = np.maximum(np.abs(xs - cx) - hx, 0.0)
        dy = np.maximum(np.abs(ys - cy) - hy, 0.0)
        return np.hypot(dx, dy)

    def distance_to_boxes(self, x0, x1, y0, y1):
        """Distance from the obstacle to axis-aligned boxes given by bound arrays."""
        x0, x1, y0, y1 = (np.asarray(a, dtype=float) for a in (x0, x1, y0, y1))
        cx, cy = self.center
        if self.kind == "disc":
            dx = np.maximum(np.maximum(x0 - cx, cx - x1), 0.0)
            dy = np.maximum(np.maximum(y0 - cy, cy - y1), 0.0)
            return np.maximum(np.hypot(dx, dy) - self.size[0], 0.0)
        ox0, ox1, oy0, oy1 = self.bounds
        dx = np.maximum(np.maximum(x0 - ox1, ox0 - x1), 0.0)
        dy = np.maximum(np.maximum(y0 - oy1, oy0 - y1), 0.0)
        return np.hypot(dx, dy)

    def covers(self, xs, ys):
        """Point-in-shape test (closed)."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        cx, cy = self.center
        if self.kind == "disc":
            return (xs - cx) ** 2 + (ys - cy) ** 2 <= self.size[0] ** 2
        hx, hy = self.size
        return (np.abs(xs - cx) <= hx) & (np.abs(ys - cy) <= hy)


@dataclass(frozen=True)
class Scene:
    arena_size: float
    objects: tuple[ObjectState, ...] = ()
    agents: tuple[AgentState, ...] = ()
    obstacles: tuple[Obstacle, ...] = ()
    arena_gray: int = 200

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not 0 <= self.arena_gray <= 255:
            raise SceneError("arena_gray must be an 8-bit intensity")
        if self.arena_size <= 0:
            raise SceneError("arena_size must be positive")

    def object(self, object_id: int) -> ObjectState:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(f"no object {object_id}")

    def agent(self, agent_id: int) -> AgentState:
        for ag in self.agents:
            if ag.id == agent_id:
                return ag
        raise KeyError(f"no agent {agent_id}")

    def replace_objects(self, objects: Iterable[ObjectState]) -> "Scene":
        return replace(self, objects=tuple(objects))

    def replace_agents(self, agents: Iterable[AgentState]) -> "Scene":
        return replace(self, agents=tuple(agents))

    def without_agents(self) -> "Scene":
        return replace(self, agents=())


@dataclass(frozen=True)
class Scenario:
    start: Scene
    target: Scene
    task_kind: str
    seed: int

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise SceneError(f"unknown task kind {self.task_kind!r}")
        if self.target.agents:
            raise SceneError("target scene must not contain agents")
        if class_multiset(self.start) != class_multiset(self.target):
            raise SceneError("start and target object multisets differ")


def class_multiset(scene: Scene) -> list[tuple[str, float]]:
    return sorted((o.class_label, o.radius) for o in scene.objects)


def validate_scene(scene: Scene, check_agents: bool = True, tol: float = 1e-9) -> None:
    """Raise SceneError unless entities are pairwise disjoint and inside the arena."""
    a = scene.arena_size
    discs = [(f"object {o.id}", o.position, o.radius) for o in scene.objects]
    if check_agents:
        discs += [(f"agent {g.id}", g.position, g.radius) for g in scene.agents]
    for name, (x, y), r in discs:
        if not (r - tol <= x <= a - r + tol and r - tol <= y <= a - r + tol):
            raise SceneError(f"{name} not inside the arena")
    for i in range(len(discs)):
        for j in range(i + 1, len(discs)):
            (ni, pi, ri), (nj, pj, rj) = discs[i], discs[j]
            if math.dist(pi, pj) <= ri + rj:
                raise SceneError(f"{ni} overlaps {nj}")
    for k, obs in enumerate(scene.obstacles):
        x0, x1, y0, y1 = obs.bounds
        if x0 < -tol or y0 < -tol or x1 > a + tol or y1 > a + tol:
            raise SceneError(f"obstacle {k} not inside the arena")
        for name, (x, y), r in discs:
            if float(obs.distance_to_points(x, y)) <= r:
                raise SceneError(f"{name} overlaps obstacle {k}")


# -- serialization ---------------------------------------------------------------

def _object_to_dict(o: ObjectState) -> dict:
    return {"id": o.id, "class": o.class_label, "x": o.position[0], "y": o.position[1], "r": o.radius}


def _object_from_dict(d: dict) -> ObjectState:
    return ObjectState(int(d["id"]), d["class"], (float(d["x"]), float(d["y"])), float(d.get("r", OBJECT_RADIUS)))


def _agent_to_dict(g: AgentState) -> dict:
    return {"id": g.id, "x": g.position[0], "y": g.position[1], "theta": g.heading, "r": g.radius}


def _agent_from_dict(d: dict) -> AgentState:
    return AgentState(int(d["id"]), (float(d["x"]), float(d["y"])), float(d.get("theta", 0.0)),
                      float(d.get("r", AGENT_RADIUS)))


def _obstacle_to_dict(o: Obstacle) -> dict:
    if o.kind == "disc":
        return {"shape": "disc", "x": o.center[0], "y": o.center[1], "r": o.size[0]}
    return {"shape": "rect", "x": o.center[0], "y": o.center[1], "hw": o.size[0], "hh": o.size[1]}


def _obstacle_from_dict(d: dict) -> Obstacle:
    if d["shape"] == "disc":
        return Obstacle.disc(d["x"], d["y"], d["r"])
    return Obstacle.rect(d["x"], d["y"], d["hw"], d["hh"])


def scene_to_dict(scene: Scene) -> dict:
    return {
        "arena_size": scene.arena_size,
        "arena_gray": scene.arena_gray,
        "objects": [_object_to_dict(o) for o in scene.objects],
        "agents": [_agent_to_dict(g) for g in scene.agents],
        "obstacles": [_obstacle_to_dict(o) for o in scene.obstacles],
    }


def scene_from_dict(d: dict) -> Scene:
    return Scene(
        arena_size=float(d["arena_size"]),
        objects=tuple(_object_from_dict(o) for o in d.get("objects", [])),
        agents=tuple(_agent_from_dict(g) for g in d.get("agents", [])),
        obstacles=tuple(_obstacle_from_dict(o) for o in d.get("obstacles", [])),
        arena_gray=int(d.get("arena_gray", 200)),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    doc = {"seed": scenario.seed, "task_kind": scenario.task_kind}
    doc.update(scene_to_dict(scenario.start))
    doc["target"] = {"objects": [_object_to_dict(o) for o in scenario.target.objects]}
    return doc


def scenario_from_dict(d: dict) -> Scenario:
    start = scene_from_dict(d)
    target = Scene(
        arena_size=start.arena_size,
        objects=tuple(_object_from_dict(o) for o in d["target"]["objects"]),
        obstacles=start.obstacles,
        arena_gray=start.arena_gray,
    )
    return Scenario(start, target, d["task_kind"], int(d["seed"]))


def dumps(doc: dict) -> str:
    """Canonical JSON text (sorted keys, repr-exact floats)."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def scene_hash(scene: Scene) -> str:
    return hashlib.sha256(dumps(scene_to_dict(scene)).encode()).hexdigest()[:16]


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as f:
        f.write(json.dumps(scenario_to_dict(scenario), sort_keys=True, indent=1))
        f.write("\n")


def load_scenario(path) -> Scenario:
    with open(path) as f:
        return scenario_from_dict(json.load(f))


def objects_by_class(objects: Sequence[ObjectState]) -> dict[str, list[ObjectState]]:
    groups: dict[str, list[ObjectState]] = {c: [] for c in CLASSES}
    for o in objects:
        groups[o.class_label].append(o)
    return groups
