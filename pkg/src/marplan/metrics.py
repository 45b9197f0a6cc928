"""Episode metrics shared by the policy loop and the baselines."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .scene import dumps


@dataclass
class RunMetrics:
    success_rate: float = 0.0  # placed objects / n
    distance_traveled: float = 0.0  # meters, summed over agents and steps
    completion_time: float = 0.0  # seconds, per-step makespans summed
    inference_time: float = 0.0  # planning wall-clock seconds
    succeeded: bool = False
    n_objects: int = 0
    n_placed: int = 0
    steps: int = 0
    total_F: float = 0.0  # summed agent durations
    reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StepRecord:
    """One executed step: the action triples, the motion plan, and the resulting scene."""

    t: int
    triples: list[dict]
    paths: list[dict]
    step_F: float
    makespan: float
    distance: float
    scene_hash: str
    intermediate: list[int] = field(default_factory=list)  # object ids set down off-target

    def to_json(self) -> str:
        # wall-clock never enters the log so replays are byte-identical
        return dumps(
            {
                "t": self.t,
                "triples": self.triples,
                "paths": self.paths,
                "step_F": self.step_F,
                "scene_hash": self.scene_hash,
            }
        )


def accumulate(metrics: RunMetrics, records: Sequence[StepRecord]) -> RunMetrics:
    metrics.distance_traveled = float(sum(r.distance for r in records))
    metrics.completion_time = float(sum(r.makespan for r in records))
    metrics.total_F = float(sum(r.step_F for r in records))
    metrics.steps = len(records)
    return metrics


def write_log(records: Sequence[StepRecord], path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def read_log(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
