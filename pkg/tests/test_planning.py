import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from marplan.baselines import obstructing_objects, run_greedy, run_random
from marplan.grid import GridSpec
from marplan.mapf import (
    IntervalTable,
    PlanRequest,
    TimedPath,
    audit_agents,
    merge_intervals,
    path_unsafe_intervals,
    plan_joint,
)
from marplan.metrics import read_log, write_log
from marplan.policy import is_solved, replay, run
from marplan.scene import AgentState, ObjectState, Scene, Scenario
from marplan.workspace import Workspace
from marplan.world import generate_scenario

SPEC = GridSpec(2.4, 12)


def overlaps_square(x, y, r, c, radius):
    cell = SPEC.cell
    dx = max(c * cell - x, 0.0, x - (c + 1) * cell)
    dy = max(r * cell - y, 0.0, y - (r + 1) * cell)
    return math.hypot(dx, dy) < radius


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 2.3), st.floats(0.1, 2.3)), min_size=2, max_size=4))
def test_unsafe_intervals_cover_dense_samples(pts):
    wps = tuple((x, y, 1.0 + 2.0 * i) for i, (x, y) in enumerate(pts))
    path = TimedPath(0, wps, 0.2)
    unsafe = path_unsafe_intervals(path, SPEC, 0.4)
    for t in np.linspace(wps[0][2], wps[-1][2] + 1.0, 400):
        x, y = path.position_at(np.array([t]))[0]
        for r in range(SPEC.n):
            for c in range(SPEC.n):
                inside = any(s < t < e for s, e in unsafe.get(r * SPEC.n + c, ()))
                if overlaps_square(x, y, r, c, 0.4 - 1e-6):
                    assert inside, (t, r, c)


def test_merge_and_safe_intervals():
    assert merge_intervals([(3, 4), (0, 1), (0.5, 2)]) == [(0, 2), (3, 4)]
    table = IntervalTable({5: [(1.0, 2.0), (1.5, 3.0)]})
    assert table.safe(5) == [(0.0, 1.0), (3.0, math.inf)]
    assert table.is_free(5, 0.0, 1.0) and not table.is_free(5, 0.0, 1.1)
    assert table.safe(6) == [(0.0, math.inf)]


def open_scene(objects, agents, arena=3.0):
    return Scene(arena, tuple(objects), tuple(agents))


def test_crossing_agents_do_not_collide():
    objs = [ObjectState(0, "red", (0.45, 1.5)), ObjectState(1, "blue", (2.55, 1.5)), ObjectState(2, "green", (1.5, 0.3))]
    agents = [AgentState(0, (0.45, 0.45)), AgentState(1, (2.55, 0.45))]
    ws = Workspace(open_scene(objs, agents))
    c = ws.spec.cell_of
    reqs = [
        PlanRequest(0, 0, c((0.45, 1.5)), c((2.55, 2.55))),
        PlanRequest(1, 1, c((2.55, 1.5)), c((0.45, 2.55))),
    ]
    paths = plan_joint(reqs, ws)
    assert paths is not None
    assert audit_agents(paths) == []


def swap_scenario():
    """Two objects of different classes must trade places with one agent, so one has to be
    parked somewhere first."""
    a, b = (1.05, 1.5), (1.95, 1.5)
    start = open_scene([ObjectState(0, "red", a), ObjectState(1, "blue", b)], [AgentState(0, (1.5, 0.45))])
    target = open_scene([ObjectState(0, "red", b), ObjectState(1, "blue", a)], [])
    return Scenario(start, target, "shuffle", 0)


def test_occupied_drop_cell_counts_as_obstruction():
    s = swap_scenario()
    ws = Workspace(s.start)
    from marplan.baselines import _Task
    obstructors, _ = obstructing_objects(ws, [_Task(0, 0, ws.spec.cell_of((1.95, 1.5)))])
    assert obstructors[0] == 1


@pytest.mark.parametrize("runner", [run_greedy, run_random, run])
def test_swap_needs_an_intermediate_move(runner):
    metrics, records = runner(swap_scenario())
    assert metrics.succeeded
    assert len(records) >= 3


@pytest.mark.parametrize("runner", [run_greedy, run_random, run])
def test_rollouts_are_deterministic_and_replayable(runner, tmp_path):
    s = generate_scenario("random", seed=21)
    m1, r1 = runner(s)
    m2, r2 = runner(s)
    write_log(r1, tmp_path / "a.jsonl")
    write_log(r2, tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    end = replay(s, read_log(tmp_path / "a.jsonl"))
    assert is_solved(end, s.target) == m1.succeeded
    assert m1.distance_traveled == m2.distance_traveled


def test_replay_detects_tampering(tmp_path):
    s = generate_scenario("shuffle", seed=2)
    _, records = run(s)
    write_log(records, tmp_path / "a.jsonl")
    log = read_log(tmp_path / "a.jsonl")
    log[0]["scene_hash"] = "0" * len(log[0]["scene_hash"])
    with pytest.raises(ValueError):
        replay(s, log)
