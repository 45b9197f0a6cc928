"""Command-line entry point: gen, plan, bench, export, render.

Machine-readable output goes to stdout or files; logs go to stderr. Exit codes: 0 on
success, 1 when a planner leaves objects misplaced, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .baselines import BaselineConfig
from .bench import ALGORITHMS, DatasetSpec, SweepSpec, export_dataset, run_episode, run_sweep, write_sweep
from .heatmap import FusionWeights
from .mapf import PlannerConfig, TimedPath
from .metrics import write_log
from .policy import ActionTriple, PolicyConfig, apply_plan, replay
from .propose import ProposalConfig
from .scene import TASK_KINDS, RasterConfig, SceneError, load_scenario, save_scenario
from .world import RandomizationRanges, generate_scenario, rasterize, write_ppm

OUTPUT_ENV = "MARPLAN_OUTPUT_DIR"
EXIT_OK, EXIT_PLANNER, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("marplan")


class UsageError(Exception):
    pass


def _output_dir(args) -> Path:
    out = Path(args.output_dir or os.environ.get(OUTPUT_ENV, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_constants(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model constants")
    g.add_argument("--w-f", type=float, default=0.2, help="feasibility weight in the placement fusion")
    g.add_argument("--w-q", type=float, default=0.8, help="quality weight in the placement fusion")
    g.add_argument("--k", type=int, default=3, help="k-means clusters per placement heatmap")
    g.add_argument("--alpha", type=float, default=0.8, help="placement threshold as a fraction of the peak")
    g.add_argument("--snap", choices=("peak", "centroid"), default="peak", help="region cell inside each cluster")
    g.add_argument("--patch", type=int, default=20, help="patch size in pixels")
    g.add_argument("--image", type=int, default=480, help="bird's-eye image size in pixels")
    g.add_argument("--budget", type=float, default=120.0, help="planning time budget in seconds")
    g.add_argument("--horizon", type=int, default=None, help="step limit (default twice the object count)")
    g.add_argument("--speed", type=float, default=0.3, help="agent speed in m/s")
    g.add_argument("--dwell", type=float, default=1.0, help="pick and place dwell time in seconds")
    g.add_argument("--tolerance", type=float, default=0.1, help="placement success tolerance in meters")
    g.add_argument("--resample", type=int, default=20, help="baseline relocation attempts per obstruction")


def _configs(args) -> tuple[PolicyConfig, BaselineConfig]:
    try:
        raster = RasterConfig(args.image, args.patch)
        planner = PlannerConfig(agent_speed=args.speed, pick_dwell=args.dwell, place_dwell=args.dwell)
        policy = PolicyConfig(
            horizon=args.horizon,
            success_tolerance=args.tolerance,
            fusion=FusionWeights(args.w_f, args.w_q),
            proposal=ProposalConfig(k=args.k, alpha=args.alpha, snap=args.snap),
            planner=planner,
            raster=raster,
            time_budget=args.budget,
        )
        baseline = BaselineConfig(
            resample_attempts=args.resample,
            time_budget=args.budget,
            success_tolerance=args.tolerance,
            planner=planner,
            raster=raster,
            seed=getattr(args, "seed", 0) or 0,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return policy, baseline


def _ranges(args, raster: RasterConfig) -> RandomizationRanges:
    ranges = RandomizationRanges(n_objects=tuple(args.objects), n_agents=tuple(args.agents), raster=raster)
    try:
        ranges.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return ranges


# -- subcommands ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    policy, _ = _configs(args)
    scenario = generate_scenario(args.task, _ranges(args, policy.raster), args.seed)
    out = Path(args.output) if args.output else _output_dir(args) / f"scenario_{args.seed}.json"
    save_scenario(scenario, out)
    if args.render:
        write_ppm(args.render, rasterize(scenario.start, policy.raster))
    print(json.dumps({"scenario": str(out), "objects": len(scenario.start.objects),
                      "agents": len(scenario.start.agents), "task": scenario.task_kind}))
    return EXIT_OK


def cmd_plan(args) -> int:
    policy, baseline = _configs(args)
    scenario = load_scenario(args.input)
    metrics, records = run_episode(args.algo, scenario, policy, baseline)
    out = _output_dir(args)
    log_path = Path(args.log) if args.log else out / f"{Path(args.input).stem}_{args.algo}.jsonl"
    write_log(records, log_path)
    if args.render_frames:
        frames = Path(args.render_frames)
        frames.mkdir(parents=True, exist_ok=True)
        scene = scenario.start
        for rec in records:
            triples = [ActionTriple(d["agent"], d["object"], tuple(d["region"])) for d in rec.triples]
            paths = _paths_from_dicts(rec.paths, scene)
            scene = apply_plan(scene, triples, paths)
            write_ppm(frames / f"step_{rec.t:03d}.ppm", render_step(scene, rec.paths, policy.raster))
    doc = {"log": str(log_path), **metrics.to_dict()}
    print(json.dumps(doc))
    if not metrics.succeeded:
        log.warning("%d of %d objects placed (%s)", metrics.n_placed, metrics.n_objects, metrics.reason)
        return EXIT_PLANNER
    return EXIT_OK


def cmd_bench(args) -> int:
    policy, baseline = _configs(args)
    try:
        spec = SweepSpec(
            object_counts=tuple(args.objects),
            agent_counts=tuple(args.agents),
            seeds=args.seeds,
            algorithms=tuple(args.algos),
            task_mix=tuple(args.task_mix),
            base_seed=args.seed,
            policy=policy,
            baseline=baseline,
            ranges=RandomizationRanges(raster=policy.raster),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _output_dir(args)
    rows = run_sweep(spec, jobs=args.jobs, log_dir=args.log_dir)
    agg = write_sweep(rows, args.csv or out / "sweep.csv", args.json or out / "sweep.json")
    for row in agg:
        log.info("%s", json.dumps(row))
    print(json.dumps(agg))
    return EXIT_OK


def cmd_export(args) -> int:
    policy, _ = _configs(args)
    try:
        spec = DatasetSpec(
            environments=args.environments,
            configurations=args.configurations,
            augment=not args.no_augment,
            train_fraction=args.train_fraction,
            base_seed=args.seed,
            ranges=_ranges(args, policy.raster),
            policy=policy,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.output) if args.output else _output_dir(args) / "dataset"
    manifest = export_dataset(spec, out)
    n_train = sum(s["split"] == "train" for s in manifest["samples"])
    print(json.dumps({"dataset": str(out), "samples": len(manifest["samples"]), "train": n_train}))
    return EXIT_OK


def cmd_render(args) -> int:
    policy, _ = _configs(args)
    if args.target and args.log:
        raise UsageError("--target and --log are mutually exclusive")
    scenario = load_scenario(args.input)
    if args.target:
        scene = scenario.target
    elif args.log:
        with open(args.log) as fh:
            scene = replay(scenario, [json.loads(line) for line in fh if line.strip()])
    else:
        scene = scenario.start
    out = Path(args.output) if args.output else _output_dir(args) / f"{Path(args.input).stem}.ppm"
    write_ppm(out, rasterize(scene, policy.raster))
    print(json.dumps({"image": str(out)}))
    return EXIT_OK


# -- rendering helpers ---------------------------------------------------------------------

def _paths_from_dicts(path_dicts, scene):
    return [
        TimedPath(d["agent"], tuple((w["x"], w["y"], w["t"]) for w in d["waypoints"]), scene.agent(d["agent"]).radius)
        for d in path_dicts
    ]


def render_step(scene, path_dicts, raster: RasterConfig) -> np.ndarray:
    """The scene after a step with each agent's route drawn in white."""
    img = rasterize(scene, raster)
    scale = raster.image_size / scene.arena_size
    n = raster.image_size
    for d in path_dicts:
        pts = np.array([(w["x"], w["y"]) for w in d["waypoints"]])
        for a, b in zip(pts[:-1], pts[1:]):
            steps = max(2, int(np.ceil(np.linalg.norm(b - a) * scale)) + 1)
            for x, y in np.linspace(a, b, steps):
                r, c = int(y * scale), int(x * scale)
                if 0 <= r < n and 0 <= c < n:
                    img[r, c] = 255
    return img


# -- parser --------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marplan", description="Multi-agent object rearrangement planning")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--output-dir", default=None, help=f"default output directory (else ${OUTPUT_ENV} or .)")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        _add_constants(p)

    p = sub.add_parser("gen", help="generate a scenario")
    p.add_argument("--task", choices=TASK_KINDS, default="random")
    p.add_argument("--objects", type=int, nargs="+", default=[8])
    p.add_argument("--agents", type=int, nargs="+", default=[2])
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--render", default=None, metavar="PPM", help="also write a preview image")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("plan", help="solve a scenario and write its trajectory log")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--algo", choices=ALGORITHMS, default="maner")
    p.add_argument("--log", default=None, help="trajectory log path (JSON lines)")
    p.add_argument("--render-frames", default=None, metavar="DIR", help="write one PPM per step")
    common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="run a benchmark sweep")
    p.add_argument("--objects", type=int, nargs="+", default=[8, 12, 16])
    p.add_argument("--agents", type=int, nargs="+", default=[2, 3])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--algos", nargs="+", choices=ALGORITHMS, default=list(ALGORITHMS))
    p.add_argument("--task-mix", type=float, nargs=3, default=[0.4, 0.3, 0.3], metavar=("SHUFFLE", "SORT", "RANDOM"))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--csv", default=None)
    p.add_argument("--json", default=None)
    p.add_argument("--log-dir", default=None, help="keep every episode's trajectory log here")
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export", help="export a training dataset")
    p.add_argument("--environments", type=int, default=5)
    p.add_argument("--configurations", type=int, default=2)
    p.add_argument("--objects", type=int, nargs="+", default=[8, 12, 16])
    p.add_argument("--agents", type=int, nargs="+", default=[2, 3])
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("-o", "--output", default=None)
    common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("render", help="render a scenario (start, target, or end of a log)")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--log", default=None, help="render the scene at the end of this trajectory log")
    p.add_argument("--target", action="store_true", help="render the target scene")
    p.add_argument("-o", "--output", default=None)
    common(p, seed=False)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"marplan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, json.JSONDecodeError, SceneError) as exc:
        print(f"marplan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
