import json
import random

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from refold import polycube as pcube
from refold.manifold import apply_step, invert_step, labeled_isomorphic, validate

L3 = pcube.Polycube.make([(0, 0, 0), (1, 0, 0), (1, 1, 0)])


def test_surface_area_and_closedness():
    for n in (1, 2, 5):
        pc = pcube.Polycube.make([(i, 0, 0) for i in range(n)])
        m = pcube.surface(pc)
        r = validate(m)
        assert r.closed and r.ok
        assert r.area == pytest.approx(4 * n + 2)
        assert len(m.faces) == 4 * n + 2


def test_validate_polycube_flags_problems():
    good = pcube.validate_polycube(L3)
    assert good["tree"] and not good["self_intersecting"]
    assert good["surface_area"] == good["expected_area"] == 14
    dup = pcube.Polycube.make([(0, 0, 0), (1, 0, 0), (1, 0, 0)], [(0, 1), (1, 2)])
    assert pcube.validate_polycube(dup)["self_intersecting"]
    forest = pcube.Polycube.make([(0, 0, 0), (1, 0, 0), (3, 0, 0)], [(0, 1)])
    assert not pcube.validate_polycube(forest)["tree"]


def test_line_detection():
    assert pcube.is_line(pcube.Polycube.make([(0, 0, 0), (1, 0, 0), (2, 0, 0)]))
    assert not pcube.is_line(L3)


def test_rotate_move_replays_on_surface():
    r = pcube.rotate(L3, 2, (0, 0, 1))
    assert r.polycube.cells[2] == (1, 0, 1)
    m = apply_step(pcube.surface(L3), r.step)
    assert pcube.surface_matches(m, r.polycube, r.labels)
    back = apply_step(m, invert_step(r.step))
    assert labeled_isomorphic(back, pcube.surface(L3))


def test_slide_requires_support():
    line = pcube.Polycube.make([(0, 0, 0), (1, 0, 0), (1, 1, 0)])
    with pytest.raises(pcube.NoSupportingSurface):
        pcube.slide(line, 2, (0, 0, 1))
    r = pcube.slide(line, 2, (-1, 0, 0))
    assert r.polycube.cells[2] == (0, 1, 0)
    m = apply_step(pcube.surface(line), r.step)
    assert pcube.surface_matches(m, r.polycube, r.labels)


def test_moves_reject_bad_targets():
    with pytest.raises(pcube.NotALeaf):
        pcube.rotate(L3, 1, (0, 0, 1))
    blocked = pcube.Polycube.make([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)], [(0, 1), (1, 2), (0, 3)])
    with pytest.raises(pcube.WouldSelfIntersect):
        pcube.rotate(blocked, 2, (-1, 0, 0))


def test_to_line_and_history():
    pc = pcube.random_tree(8, random.Random(2))
    lp = pcube.to_line(pc)
    assert pcube.is_line(lp.final)
    assert len(lp.history) == len(lp.states) == len(lp.steps) + 1
    m = pcube.surface(pc)
    for st, state, lab in zip(lp.steps, lp.states[1:], lp.history[1:]):
        m = apply_step(m, st)
        assert pcube.surface_matches(m, state, lab)


def test_plan_polycube_and_json():
    rng = random.Random(11)
    a, b = pcube.random_tree(6, rng), pcube.random_tree(6, rng)
    pp = pcube.plan_polycube(a, b)
    assert pcube.verify_polycube_plan(pp)
    d = json.loads(json.dumps(pp.to_json()))
    assert len(d["moves"]) == len(pp.moves)
    assert pcube.Polycube.from_json(d["target"]) == b
    with pytest.raises(pcube.SizeMismatch):
        pcube.plan_polycube(a, pcube.random_tree(5, rng))


def test_bfs_oracle_small():
    assert pcube.bfs_line_distance(pcube.Polycube.make([(0, 0, 0), (1, 0, 0)])) == 0
    assert pcube.bfs_line_distance(L3) == 1


def test_obj_export():
    obj = pcube.to_obj(L3)
    assert obj.count("\nf ") == 14
    assert obj.count("\nv ") == 56


@settings(max_examples=20, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**9), st.integers(2, 9))
def test_random_trees_route_to_lines(seed, n):
    pc = pcube.random_tree(n, random.Random(seed))
    rep = pcube.validate_polycube(pc)
    assert rep["tree"] and rep["well_separated"] and not rep["self_intersecting"]
    lp = pcube.to_line(pc)
    assert pcube.is_line(lp.final)
    assert len(lp.moves) <= 3 * n * n
    for state in lp.states:
        r = pcube.validate_polycube(state)
        assert r["tree"] and not r["self_intersecting"] and r["surface_area"] == 4 * n + 2
