"""Region selection skips combinations that cannot win; check it against planning every
combination under every priority order."""
import itertools

import numpy as np
import pytest

from marplan.mapf import PlannerConfig, PlanRequest, plan_joint, select_regions
from marplan.policy import class_target_cells
from marplan.propose import RegionCandidate
from marplan.workspace import Workspace
from marplan.world import generate_scenario


def enumerate_all(pairs, candidates, ws, targets, config):
    agents = [a for a, _ in pairs]
    obj_of = dict(pairs)
    perms = list(itertools.islice(itertools.permutations(agents), config.max_permutations))
    best = None
    for key in itertools.product(*[range(len(candidates[a])) for a in agents]):
        for order in perms:
            reqs = [
                PlanRequest(a, obj_of[a], ws.object_cells[obj_of[a]], candidates[a][ci].cell, order.index(a))
                for a, ci in zip(agents, key)
            ]
            paths = plan_joint(reqs, ws, config)
            if paths is not None:
                hits = sum(candidates[a][ci].cell in targets.get(obj_of[a], set()) for a, ci in zip(agents, key))
                rank = (-hits, sum(p.total_time for p in paths), key)
                if best is None or rank < best:
                    best = rank
                break
    return best


def instance(seed):
    s = generate_scenario("shuffle", seed=seed)
    scene = s.start
    ws = Workspace(scene)
    rng = np.random.default_rng(seed)
    targets = class_target_cells(ws, scene, s.target)
    free = np.argwhere(~ws.blocked_for(None))
    objs = rng.choice(len(scene.objects), len(scene.agents), replace=False)
    pairs = [(g.id, scene.objects[int(i)].id) for g, i in zip(scene.agents, objs)]
    candidates = {}
    for a, oid in pairs:
        cells = [tuple(int(v) for v in free[j]) for j in rng.choice(len(free), 3, replace=False)]
        on = sorted(targets.get(oid, set()))
        if on and rng.random() < 0.7:
            cells[int(rng.integers(3))] = on[int(rng.integers(len(on)))]
        candidates[a] = [RegionCandidate(ws.spec.center(c), c, (c,), 1.0) for c in cells]
    return pairs, candidates, ws, targets


@pytest.mark.parametrize("seed", range(8))
def test_selection_matches_full_enumeration(seed):
    config = PlannerConfig()
    pairs, candidates, ws, targets = instance(seed)
    sel = select_regions(pairs, candidates, ws, targets, config)
    want = enumerate_all(pairs, candidates, ws, targets, config)
    if want is None:
        assert sel is None
        return
    assert sel is not None
    key = tuple(candidates[a].index(sel.regions[a]) for a, _ in sorted(pairs))
    assert (-sel.n_targets, sel.total_time, key) == want
