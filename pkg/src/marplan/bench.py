"""Benchmark sweeps over the (objects x agents) grid and the training-dataset exporter."""
from __future__ import annotations

import csv
import json
import logging
import math
import multiprocessing
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .baselines import BaselineConfig, run_greedy, run_random
from .heatmap import assign_picks, feasibility_heatmap, pick_heatmap, quality_heatmap, to_pgm_levels
from .metrics import RunMetrics, write_log
from .policy import EpisodeState, PolicyConfig, execute, run, step
from .scene import TASK_KINDS, AgentState, ObjectState, Obstacle, RasterConfig, Scenario, Scene, wrap_angle
from .workspace import Workspace
from .world import (
    ArenaTooCrowded,
    RandomizationRanges,
    binary_occupancy,
    encode_agent_map,
    encode_object_map,
    generate_scenario,
    rasterize,
    segmentation_mask,
    write_pgm,
    write_ppm,
)

__all__ = [
    "ALGORITHMS",
    "AUGMENTATIONS",
    "CSV_COLUMNS",
    "RunMetrics",
    "SweepSpec",
    "DatasetSpec",
    "aggregate",
    "episode_scenario",
    "export_dataset",
    "run_episode",
    "run_sweep",
    "sample_labels",
    "task_kinds",
    "transform_array",
    "transform_scenario",
    "write_sweep",
]

log = logging.getLogger(__name__)

ALGORITHMS = ("maner", "greedy", "random")
CSV_COLUMNS = ("algorithm", "n_objects", "n_agents", "task_kind", "seed", "SR", "DT_m", "CT_s", "IT_s", "succeeded")
AUGMENTATIONS = ("hflip", "vflip", "rot90cw", "rot90ccw")
SEED_RETRY_STRIDE = 100_003  # offset added to a scenario seed when generation fails
MAX_SEED_RETRIES = 20


@dataclass(frozen=True)
class SweepSpec:
    object_counts: tuple[int, ...] = (8,)
    agent_counts: tuple[int, ...] = (2,)
    seeds: int = 20
    algorithms: tuple[str, ...] = ALGORITHMS
    task_mix: tuple[float, float, float] = (0.4, 0.3, 0.3)  # shuffle, sort, random
    base_seed: int = 0
    policy: PolicyConfig = PolicyConfig()
    baseline: BaselineConfig = BaselineConfig()
    ranges: RandomizationRanges = field(default_factory=RandomizationRanges)

    def __post_init__(self):
        if len(self.task_mix) != len(TASK_KINDS) or min(self.task_mix) < 0:
            raise ValueError("task_mix needs one non-negative fraction per task kind")
        if not math.isclose(sum(self.task_mix), 1.0, abs_tol=1e-9):
            raise ValueError("task_mix fractions must sum to 1")
        if self.seeds < 1:
            raise ValueError("seeds must be at least 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")
        for n in self.object_counts:
            for m in self.agent_counts:
                if m >= n:
                    raise ValueError(f"cell ({n} objects, {m} agents) violates m < n")

    def cells(self) -> list[tuple[int, int]]:
        return [(n, m) for n in self.object_counts for m in self.agent_counts]


def task_kinds(seeds: int, mix: Sequence[float]) -> list[str]:
    """Task kind per seed index: largest-remainder counts, then kinds interleaved in a
    fixed order so any prefix of seeds keeps roughly the same mix."""
    raw = [f * seeds for f in mix]
    counts = [int(math.floor(r)) for r in raw]
    for i in sorted(range(len(raw)), key=lambda i: (counts[i] - raw[i], i))[: seeds - sum(counts)]:
        counts[i] += 1
    out: list[str] = []
    used = [0] * len(counts)
    for s in range(seeds):
        # the kind furthest behind its quota goes next
        i = min(range(len(counts)), key=lambda i: (used[i] / counts[i] if counts[i] else math.inf, i))
        used[i] += 1
        out.append(TASK_KINDS[i])
    return out


def episode_scenario(task_kind: str, n_objects: int, n_agents: int, seed: int,
                     ranges: RandomizationRanges = RandomizationRanges()) -> Scenario:
    """Generate a scenario, moving to a derived seed when the arena turns out too crowded."""
    ranges = replace(ranges, n_objects=(n_objects,), n_agents=(n_agents,))
    for attempt in range(MAX_SEED_RETRIES):
        try:
            return generate_scenario(task_kind, ranges, seed + attempt * SEED_RETRY_STRIDE)
        except ArenaTooCrowded:
            log.info("seed %d too crowded, retrying", seed + attempt * SEED_RETRY_STRIDE)
    raise ArenaTooCrowded(f"{n_objects} objects after {MAX_SEED_RETRIES} seeds")


def run_episode(algorithm: str, scenario: Scenario, policy: PolicyConfig = PolicyConfig(),
                baseline: BaselineConfig = BaselineConfig()):
    if algorithm == "maner":
        return run(scenario, policy)
    if algorithm == "greedy":
        return run_greedy(scenario, baseline)
    if algorithm == "random":
        return run_random(scenario, replace(baseline, variant="random"))
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _job(args):
    algorithm, n, m, kind, seed, spec, log_dir = args
    scenario = episode_scenario(kind, n, m, seed, spec.ranges)
    metrics, records = run_episode(algorithm, scenario, spec.policy, spec.baseline)
    if log_dir is not None:
        write_log(records, Path(log_dir) / f"{algorithm}_{n}x{m}_{seed}.jsonl")
    return {
        "algorithm": algorithm,
        "n_objects": n,
        "n_agents": m,
        "task_kind": kind,
        "seed": seed,
        "SR": metrics.success_rate,
        "DT_m": metrics.distance_traveled,
        "CT_s": metrics.completion_time,
        "IT_s": metrics.inference_time,
        "succeeded": metrics.succeeded,
    }


def run_sweep(spec: SweepSpec, jobs: int = 1, log_dir=None) -> list[dict]:
    """One row per episode, ordered by cell, seed, then algorithm."""
    kinds = task_kinds(spec.seeds, spec.task_mix)
    if log_dir is not None:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
    work = [
        (alg, n, m, kinds[i], spec.base_seed + i, spec, log_dir)
        for n, m in spec.cells()
        for i in range(spec.seeds)
        for alg in spec.algorithms
    ]
    if jobs > 1:
        with multiprocessing.Pool(jobs) as pool:
            return list(pool.imap(_job, work))
    rows = []
    for w in work:
        rows.append(_job(w))
        log.info("%s %dx%d seed %d SR %.3f", w[0], w[1], w[2], w[4], rows[-1]["SR"])
    return rows


def _mean(values) -> float | None:
    values = list(values)
    return float(np.mean(values)) if values else None


def aggregate(rows: Iterable[dict]) -> list[dict]:
    """Per (algorithm, objects, agents) cell: SR over every episode, DT/CT/IT over the
    successful ones only (None when none succeeded)."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["algorithm"], int(r["n_objects"]), int(r["n_agents"])), []).append(r)
    out = []
    for (alg, n, m), rs in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][2], ALGORITHMS.index(kv[0][0]))):
        ok = [r for r in rs if _truthy(r["succeeded"])]
        out.append({
            "algorithm": alg,
            "n_objects": n,
            "n_agents": m,
            "episodes": len(rs),
            "succeeded": len(ok),
            "SR": float(np.mean([float(r["SR"]) for r in rs])),
            "DT_m": _mean(float(r["DT_m"]) for r in ok),
            "CT_s": _mean(float(r["CT_s"]) for r in ok),
            "IT_s": _mean(float(r["IT_s"]) for r in ok),
            "IT_max_s": max(float(r["IT_s"]) for r in rs),
        })
    return out


def _truthy(v) -> bool:
    return v if isinstance(v, bool) else str(v).lower() in ("true", "1")


def write_sweep(rows: Sequence[dict], csv_path, json_path=None) -> list[dict]:
    with open(csv_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow(r)
    agg = aggregate(rows)
    if json_path is not None:
        Path(json_path).write_text(json.dumps(agg, indent=2, sort_keys=True) + "\n")
    return agg


def read_sweep(csv_path) -> list[dict]:
    with open(csv_path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- geometric augmentation ----------------------------------------------------------------

def transform_array(a: np.ndarray, aug: str) -> np.ndarray:
    """Image-space transform; rows follow +y, columns +x."""
    if aug == "hflip":
        return np.ascontiguousarray(a[:, ::-1])
    if aug == "vflip":
        return np.ascontiguousarray(a[::-1])
    if aug == "rot90cw":
        return np.ascontiguousarray(np.rot90(a, -1))
    if aug == "rot90ccw":
        return np.ascontiguousarray(np.rot90(a, 1))
    raise ValueError(f"unknown augmentation {aug!r}")


def _point(p, arena: float, aug: str) -> tuple[float, float]:
    x, y = float(p[0]), float(p[1])
    if aug == "hflip":
        return (arena - x, y)
    if aug == "vflip":
        return (x, arena - y)
    if aug == "rot90cw":
        return (arena - y, x)
    if aug == "rot90ccw":
        return (y, arena - x)
    raise ValueError(f"unknown augmentation {aug!r}")


_HEADING = {
    "hflip": lambda t: math.pi - t,
    "vflip": lambda t: -t,
    "rot90cw": lambda t: t + math.pi / 2,
    "rot90ccw": lambda t: t - math.pi / 2,
}


def _transform_scene(scene: Scene, aug: str) -> Scene:
    a = scene.arena_size
    swap = aug.startswith("rot")
    obstacles = tuple(
        Obstacle(o.kind, _point(o.center, a, aug), (o.size[1], o.size[0]) if swap else o.size) for o in scene.obstacles
    )
    objects = tuple(ObjectState(o.id, o.class_label, _point(o.position, a, aug), o.radius) for o in scene.objects)
    agents = tuple(
        AgentState(g.id, _point(g.position, a, aug), wrap_angle(_HEADING[aug](g.heading)), g.radius) for g in scene.agents
    )
    return Scene(a, objects, agents, obstacles, scene.arena_gray)


def transform_scenario(scenario: Scenario, aug: str) -> Scenario:
    return Scenario(_transform_scene(scenario.start, aug), _transform_scene(scenario.target, aug),
                    scenario.task_kind, scenario.seed)


# -- dataset export ------------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSpec:
    environments: int = 5
    configurations: int = 2  # scenes per environment, taken along an oracle rollout
    augment: bool = True
    train_fraction: float = 0.8
    base_seed: int = 0
    task_mix: tuple[float, float, float] = (0.4, 0.3, 0.3)
    ranges: RandomizationRanges = field(default_factory=RandomizationRanges)
    policy: PolicyConfig = PolicyConfig()

    def __post_init__(self):
        if self.environments < 1 or self.configurations < 1:
            raise ValueError("need at least one environment and configuration")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")


def sample_labels(scene: Scene, target: Scene, config: PolicyConfig = PolicyConfig()) -> dict[int, dict]:
    """Ground-truth labels per agent: its pick heatmap and, when it gets an object, the
    feasibility and quality heatmaps for that object. Also returns the pick pairs."""
    ws = Workspace(scene, config.raster)
    picks_hm = {g.id: pick_heatmap(scene, target, g.id, config.raster, config.success_tolerance, ws) for g in scene.agents}
    picks = assign_picks(picks_hm, scene.objects, ws.spec)
    by_agent = {p.agent_id: p for p in picks}
    out = {}
    for g in scene.agents:
        labels = {"pick": picks_hm[g.id], "feas": None, "qual": None, "object": None}
        p = by_agent.get(g.id)
        if p is not None:
            others = [ws.object_cells[q.object_id] for q in picks if q.object_id != p.object_id]
            blocked = ws.blocked_for(None, exclude_objects=(p.object_id,))
            labels["feas"] = feasibility_heatmap(blocked, ws.density(), ws.object_cells[p.object_id], others)
            labels["qual"] = quality_heatmap(scene, target, p.object_id, config.raster, config.success_tolerance, ws)
            labels["object"] = p.object_id
        out[g.id] = labels
    return {"agents": out, "picks": [(p.agent_id, p.object_id) for p in picks]}


def _configurations(scenario: Scenario, count: int, config: PolicyConfig) -> list[Scene]:
    """Start scene plus the scenes reached by rolling the oracle policy forward."""
    state = EpisodeState(scenario.start)
    scenes = [state.scene]
    while len(scenes) < count:
        plan = step(state, scenario.target, config)
        if plan is None:
            break
        state = execute(state, plan.triples, plan.paths, scenario.target, config.raster)
        scenes.append(state.scene)
    return scenes


def _gray(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return np.rint((np.asarray(values, dtype=float) - lo) / (hi - lo) * 255).astype(np.uint8)


def _write_sample(out: Path, name: str, scene: Scene, target: Scene, agent_id: int, picks, labels: dict,
                  raster: RasterConfig, aug: str | None) -> dict:
    t = (lambda a: a) if aug is None else (lambda a: transform_array(a, aug))
    out.mkdir(parents=True, exist_ok=True)
    files = {}

    def put(key, arr, writer, ext):
        path = out / f"{name}_{key}.{ext}"
        writer(path, t(arr))
        files[key] = path.name

    current = labels["object"]
    put("Z_t", rasterize(scene, raster), write_ppm, "ppm")
    put("Z_T", rasterize(target, raster), write_ppm, "ppm")
    put("M_r", _gray(encode_agent_map(scene, agent_id, raster), 0.0, 1.0), write_pgm, "pgm")
    put("B_t", binary_occupancy(scene, raster) * 255, write_pgm, "pgm")
    if current is not None:
        put("M_f", _gray(encode_object_map(scene, picks, current, raster), -1.0, 1.0), write_pgm, "pgm")
        put("M_seg", segmentation_mask(scene, current, raster) * 255, write_ppm, "ppm")
    label_json = {}
    for key in ("pick", "feas", "qual"):
        values = labels[key]
        if values is None:
            continue
        values = t(values)
        write_pgm(out / f"{name}_Q_{key}.pgm", to_pgm_levels(values))
        files[f"Q_{key}"] = f"{name}_Q_{key}.pgm"
        label_json[f"Q_{key}"] = values.tolist()
    (out / f"{name}_labels.json").write_text(json.dumps(label_json) + "\n")
    files["labels"] = f"{name}_labels.json"
    return files


def export_dataset(spec: DatasetSpec, output_dir) -> dict:
    """Write input maps and label heatmaps for every (environment, configuration, agent)
    sample plus its augmented copies, and a manifest with an environment-level split."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    kinds = task_kinds(spec.environments, spec.task_mix)
    raster = spec.policy.raster
    samples = []
    for e in range(spec.environments):
        seed = spec.base_seed + e
        scenario = _export_scenario(kinds[e], seed, spec.ranges)
        for c, scene in enumerate(_configurations(scenario, spec.configurations, spec.policy)):
            labels = sample_labels(scene, scenario.target, spec.policy)
            for g in scene.agents:
                for aug in (None, *AUGMENTATIONS) if spec.augment else (None,):
                    name = f"env{e:04d}_cfg{c:02d}_agent{g.id}_{aug or 'orig'}"
                    files = _write_sample(out / f"env{e:04d}", name, scene, scenario.target, g.id, labels["picks"],
                                          labels["agents"][g.id], raster, aug)
                    samples.append({
                        "environment": e,
                        "configuration": c,
                        "agent": g.id,
                        "augmentation": aug or "none",
                        "seed": scenario.seed,
                        "task_kind": scenario.task_kind,
                        "object": labels["agents"][g.id]["object"],
                        "files": {k: f"env{e:04d}/{v}" for k, v in files.items()},
                    })
    _split(samples, spec.train_fraction, spec.base_seed)
    manifest = {
        "environments": spec.environments,
        "configurations": spec.configurations,
        "augmentations": list(AUGMENTATIONS) if spec.augment else [],
        "train_fraction": spec.train_fraction,
        "samples": samples,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def _export_scenario(kind: str, seed: int, ranges: RandomizationRanges) -> Scenario:
    for attempt in range(MAX_SEED_RETRIES):
        try:
            return generate_scenario(kind, ranges, seed + attempt * SEED_RETRY_STRIDE)
        except ArenaTooCrowded:
            continue
    raise ArenaTooCrowded(f"environment seed {seed}")


def _split(samples: list[dict], train_fraction: float, seed: int) -> None:
    """Tag exactly round(fraction * N) randomly chosen samples as train, the rest eval."""
    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = round(train_fraction * len(samples))
    for rank, i in enumerate(order):
        samples[int(i)]["split"] = "train" if rank < n_train else "eval"
