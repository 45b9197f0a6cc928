"""Write the pick, feasibility, quality and fused heatmaps of one scene as PGM images
(darker is higher) next to a render of the scene.

    python3 demos/heatmaps.py --seed 5 -o /tmp/heat
"""
import argparse
from pathlib import Path

from marplan.heatmap import assign_picks, feasibility_heatmap, fuse, pick_heatmap, quality_heatmap, to_pgm_levels
from marplan.workspace import Workspace
from marplan.world import generate_scenario, rasterize, write_pgm, write_ppm


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="heatmaps")
    args = p.parse_args()
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    s = generate_scenario("sort", seed=args.seed)
    ws = Workspace(s.start)
    write_ppm(out / "scene.ppm", rasterize(s.start))
    write_ppm(out / "target.ppm", rasterize(s.target))
    picks_maps = {g.id: pick_heatmap(s.start, s.target, g.id, ws=ws) for g in s.start.agents}
    picks = assign_picks(picks_maps, s.start.objects, ws.spec)
    for pick in picks:
        cell = ws.object_cells[pick.object_id]
        blocked = ws.blocked_for(pick.agent_id, (pick.object_id,))
        feas = feasibility_heatmap(blocked, ws.density(), cell)
        qual = quality_heatmap(s.start, s.target, pick.object_id, ws=ws)
        for name, m in (("pick", picks_maps[pick.agent_id]), ("feas", feas), ("qual", qual), ("fused", fuse(feas, qual))):
            write_pgm(out / f"agent{pick.agent_id}_{name}.pgm", to_pgm_levels(m))
        print(f"agent {pick.agent_id} picks object {pick.object_id} ({pick.confidence:.2f})")
    print(f"images in {out}")


if __name__ == "__main__":
    main()
