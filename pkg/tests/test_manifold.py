import json
import random

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from refold import samples
from refold.geom import P
from refold.manifold import (
    Arc,
    CutDisconnects,
    Glue,
    GlueLengthMismatch,
    GlueTargetNotFree,
    CutTargetNotGlued,
    RefoldStep,
    apply_step,
    components,
    double_cover,
    interior_cut,
    invert_step,
    is_connected,
    isomorphic,
    labeled_isomorphic,
    manifold_from_json,
    manifold_to_json,
    normalize_glues,
    relabel,
    replay,
    rotate_face,
    single_face,
    step_from_json,
    step_to_json,
    validate,
)
from refold.plan import Plan, verify_plan

SQ = [P(0, 0), P(1, 0), P(1, 1), P(0, 1)]


def test_double_cover_is_closed_and_connected():
    m = double_cover(SQ)
    r = validate(m)
    assert r.ok and r.closed and r.connected
    assert r.area == pytest.approx(2.0)
    assert m.boundary_length == 0


def test_single_face_has_full_boundary():
    m = single_face(SQ)
    assert validate(m).boundary_length == pytest.approx(4.0)
    assert not validate(m).closed


def test_normalize_fuses_contiguous_arcs():
    gs = [Glue(Arc("a", 0, 0.0, 0.5), Arc("b", 0, 0.5, 1.0), True),
          Glue(Arc("a", 0, 0.5, 1.0), Arc("b", 0, 0.0, 0.5), True)]
    out = normalize_glues(gs)
    assert len(out) == 1
    assert out[0].a.length == pytest.approx(1.0)


def test_cut_that_disconnects_is_rejected():
    m = double_cover(SQ)
    cuts = tuple(m.glues)
    with pytest.raises(CutDisconnects):
        apply_step(m, RefoldStep(cuts=cuts))


def test_glue_errors():
    m = double_cover(SQ)
    g = m.glues[0]
    with pytest.raises(GlueTargetNotFree):
        apply_step(m, RefoldStep(glues=(g,)))
    with pytest.raises(CutTargetNotGlued):
        apply_step(m, RefoldStep(cuts=(Glue(Arc("top", 0, 0.0, 0.5), Arc("top", 2, 0.0, 0.5)),)))
    open_m = single_face(SQ)
    with pytest.raises(GlueLengthMismatch):
        apply_step(open_m, RefoldStep(glues=(Glue(Arc("f0", 0, 0.0, 0.5), Arc("f0", 2, 0.0, 0.7)),)))


def test_swap_step_and_inverse():
    m = double_cover(SQ)
    # cut two half-edges of the seam and reglue them crosswise
    by_edge = {g.a.edge if g.a.face == "top" else g.b.edge: g for g in m.glues}
    g0, g2 = by_edge[0], by_edge[2]
    x, y = g0.sub(g0.a.t0, g0.a.t0 + 0.5), g2.sub(g2.a.t0, g2.a.t0 + 0.5)
    new = (Glue(x.a, y.b, True), Glue(y.a, x.b, True))
    s = RefoldStep(cuts=(x, y), glues=new, label="swap")
    m2 = apply_step(m, s)
    assert validate(m2).closed and is_connected(m2)
    assert not labeled_isomorphic(m2, m)
    assert labeled_isomorphic(apply_step(m2, invert_step(s)), m)


def test_interior_cut_then_reglue_is_identity():
    m = double_cover(SQ)
    u, seam, _ = interior_cut(m, "top", [P(0.5, 0), P(0.5, 1)], ("L", "R"))
    s = RefoldStep(unmerges=(u,), cuts=tuple(seam), glues=tuple(seam))
    m2 = apply_step(m, s)
    assert {f.id for f in m2.faces} == {"L", "R", "bottom"}
    assert isomorphic(m2, m) is None  # different face decomposition
    assert labeled_isomorphic(apply_step(m2, invert_step(s)), m)


def test_relabel_and_rotate_keep_isomorphism():
    m = samples.box_surface(1, 2, 3)
    assert isomorphic(relabel(m, {"f0": "bottom0"}), m) is not None
    assert labeled_isomorphic(rotate_face(m, "f1", 2), m)
    assert not labeled_isomorphic(samples.box_surface(1, 2, 3.5), m)


def test_components():
    m = double_cover(SQ)
    assert components(m) == [{"top", "bottom"}]
    assert len(components(single_face(SQ))) == 1


def test_json_roundtrip():
    m = samples.box_surface(1, 1.5, 2)
    d = json.loads(json.dumps(manifold_to_json(m)))
    assert labeled_isomorphic(manifold_from_json(d), m)
    s = samples.random_step(m, random.Random(3))
    s2 = step_from_json(json.loads(json.dumps(step_to_json(s))))
    assert labeled_isomorphic(apply_step(m, s2), apply_step(m, s))


def test_plan_verify_and_inverse():
    rng = random.Random(8)
    m = samples.box_surface(1, 1, 2)
    steps, cur = [], m
    for _ in range(4):
        s = samples.random_step(cur, rng)
        steps.append(s)
        cur = apply_step(cur, s)
    plan = Plan(m, steps)
    rep = verify_plan(plan, start=m, target=cur)
    assert rep["ok"] and rep["all_closed"] and rep["target_match"]
    back = plan.inverse(cur)
    assert labeled_isomorphic(back.final(), m)
    assert labeled_isomorphic(replay(m, steps), cur)
    assert verify_plan(Plan(m))["identity"]
    again = Plan.from_json(json.loads(json.dumps(plan.to_json())))
    assert labeled_isomorphic(again.final(), cur)


def test_verify_flags_wrong_target():
    m = double_cover(SQ)
    rep = verify_plan(Plan(m), target=double_cover([P(0, 0), P(2, 0), P(2, 0.5), P(0, 0.5)]))
    assert not rep["ok"]


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**6), st.sampled_from(["dc", "box", "bip"]))
def test_random_steps_invert(seed, kind):
    rng = random.Random(seed)
    m = {"dc": lambda: double_cover(samples.convex_polygon(rng.randint(3, 7), rng)),
         "box": lambda: samples.box_surface(1, 1.3, 0.7),
         "bip": samples.bipyramid}[kind]()
    s = samples.random_step(m, rng)
    assume(s is not None)
    m2 = apply_step(m, s)
    assert validate(m2).ok
    assert m2.area == pytest.approx(m.area, abs=1e-9)
    assert labeled_isomorphic(apply_step(m2, invert_step(s)), m, tol=1e-9)
