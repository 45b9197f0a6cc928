"""Generate one scenario, solve it with every planner and print the metrics.

    python3 demos/solve_one.py --seed 3 --objects 8 --agents 2
"""
import argparse
import json

from marplan.bench import ALGORITHMS, episode_scenario, run_episode


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--task", default="shuffle", choices=["shuffle", "sort", "random"])
    p.add_argument("--objects", type=int, default=8)
    p.add_argument("--agents", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    scenario = episode_scenario(args.task, args.objects, args.agents, args.seed)
    for alg in ALGORITHMS:
        metrics, records = run_episode(alg, scenario)
        row = {k: v for k, v in metrics.to_dict().items() if k in ("success_rate", "distance_traveled", "completion_time", "inference_time", "steps")}
        print(alg, json.dumps({k: round(v, 3) if isinstance(v, float) else v for k, v in row.items()}))


if __name__ == "__main__":
    main()
