import json
import math
import random

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from refold import dissect, intermediate, samples
from refold.geom import P
from refold.manifold import apply_step, double_cover, labeled_isomorphic, validate

SQ = double_cover([P(0, 0), P(1, 0), P(1, 1), P(0, 1)])
RECT = double_cover([P(0, 0), P(2, 0), P(2, 0.5), P(0, 0.5)])


def _ct(*ms):
    pieces = dissect.common_dissection_n(list(ms))
    return dissect.refine_to_common_triangulation(pieces, *ms)


def test_subdivision_breakpoints_and_labels():
    st2 = intermediate.subdivide(_ct(SQ, RECT))
    t = st2.ct.triangles[0]
    L = t.edge_length(0)
    assert [b / L for b in st2.breakpoints(t.id, 0)] == pytest.approx([0, 0.25, 0.5, 0.75, 1])
    walk = [lab for e in range(3) for lab in st2.labels[(t.id, e)]]
    assert walk[0] == "AB" and walk[-1] == "LA" and len(set(walk)) == 12
    assert [st2.pair_of(j) for j in range(4)] == [0, 1, 1, 0]


def test_subdivision_k3():
    third = double_cover([P(0, 0), P(4, 0), P(4, 0.25), P(0, 0.25)])
    st3 = intermediate.subdivide(_ct(SQ, RECT, third))
    t = st3.ct.triangles[0]
    L = t.edge_length(1)
    assert st3.breakpoints(t.id, 1)[1] / L == pytest.approx(1 / 6)
    assert st3.labels[(t.id, 1)] == [f"1.{j}" for j in range(6)]


def test_subdivide_rejects_single_input():
    with pytest.raises(intermediate.IntermediateError):
        intermediate.subdivide(_ct(SQ, RECT), 1)


def test_nested_two_step_square_rectangle():
    tp = intermediate.build_intermediate(intermediate.subdivide(_ct(SQ, RECT)))
    r = tp.report()
    assert r["ok"] and r["intermediate_closed"] and r["method"] == "nested"
    assert r["area"] == pytest.approx([2.0, 2.0, 2.0])
    # consecutive application lands on the target
    assert labeled_isomorphic(apply_step(apply_step(tp.source, tp.script1), tp.script2), tp.target)


def test_identical_inputs():
    tp = intermediate.plan_intermediate(SQ, SQ)
    assert tp.report()["ok"]
    assert labeled_isomorphic(tp.source, tp.target)


def test_window_fallback_on_irrational_pair():
    s = math.sqrt(4 / math.sqrt(3))
    tri = double_cover([P(0, 0), P(s, 0), P(s / 2, s * math.sqrt(3) / 2)])
    tp = intermediate.plan_intermediate(SQ, tri)
    assert tp.method == "windows"
    assert "fallback_reason" in tp.diagnostics
    assert tp.report()["ok"]
    for side, src, g in ((0, SQ, tp.source.glues), (1, tri, tp.target.glues)):
        assert dissect.gluing_consistency(tp.pieces, src, side, g) <= 1e-9


def test_forced_window_method_on_rational_pair():
    tp = intermediate.plan_intermediate(SQ, RECT, method="windows")
    assert tp.method == "windows" and tp.report()["ok"]


def test_two_step_json_roundtrip():
    tp = intermediate.plan_intermediate(SQ, RECT)
    again = intermediate.TwoStepPlan.from_json(json.loads(json.dumps(tp.to_json())))
    assert again.report()["ok"]
    assert labeled_isomorphic(again.intermediate, tp.intermediate)
    assert len(again.pieces) == len(tp.pieces)
    with pytest.raises(intermediate.IntermediateError):
        intermediate.TwoStepPlan.from_json({"schema": "nope"})


def test_three_inputs_share_one_intermediate():
    rects = [double_cover([P(0, 0), P(w, 0), P(w, 2 / w), P(0, 2 / w)]) for w in (1.0, 2.0, 4.0)]
    n, pieces = intermediate.plan_intermediate_n(rects)
    assert validate(n.intermediate).closed
    for row in n.verify():
        assert row["replays"] and row["inverse_replays"] and row["connected_after_cut"]


def test_bipyramid_to_hexagon():
    bip = samples.bipyramid()
    hexa = double_cover(samples.flat_hexagon_matching(bip))
    tp = intermediate.plan_intermediate(bip, hexa)
    r = tp.report()
    assert r["ok"] and r["intermediate_boundary"] <= 1e-9


@settings(max_examples=6, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**9))
def test_random_closed_pairs(seed):
    rng = random.Random(seed)
    area = rng.uniform(1.0, 5.0)
    a, b = samples.closed_manifold(rng, area), samples.closed_manifold(rng, area)
    tp = intermediate.plan_intermediate(a, b)
    assert tp.report()["ok"]
    assert validate(tp.intermediate).closed
