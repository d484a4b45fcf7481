import math
import random

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from refold import planar, samples
from refold.geom import P
from refold.manifold import apply_step, double_cover, invert_step, isomorphic, labeled_isomorphic, validate
from refold.plan import verify_plan

SQ = [P(0, 0), P(1, 0), P(1, 1), P(0, 1)]


def _replay_flat(dc, steps):
    m = dc.manifold
    for s in steps:
        m = apply_step(m, s)
        r = validate(m)
        assert r.closed and r.ok, s.label
        assert r.area == pytest.approx(2 * dc.area, abs=1e-9)
        assert planar.is_flat(m), s.label
    return m


def test_double_cover_basics():
    dc = planar.DoubleCover.of(SQ)
    assert dc.n == 4 and dc.area == pytest.approx(1.0) and dc.is_convex()
    assert planar.is_planar_double_cover(dc.manifold)
    assert not planar.is_planar_double_cover(samples.box_surface(1, 1, 1))


@pytest.mark.parametrize("tri", [
    [P(0, 0), P(2, 0), P(0.7, 1.1)],          # apex projects inside the base
    [P(0, 0), P(1, 0), P(2.5, 0.6)],          # apex projects past C
    [P(0, 0), P(1, 0), P(-1.2, 0.4)],         # apex projects before A
])
def test_triangle_to_rectangle(tri):
    dc = planar.DoubleCover.of(tri)
    A, B, C = dc.polygon[0], dc.polygon[2], dc.polygon[1]
    rect, steps = planar.triangle_to_rectangle(dc, A, B, C)
    assert planar.is_rectangle(rect.polygon)
    assert rect.area == pytest.approx(dc.area)
    m = _replay_flat(dc, steps)
    assert isomorphic(m, rect.manifold) is not None


@pytest.mark.parametrize("w", [1.0, 2.5, 7.0, 30.0, 0.05])
def test_rectangle_to_square(w):
    dc = planar.DoubleCover.of([P(0, 0), P(w, 0), P(w, 1 / w), P(0, 1 / w)])
    sq, steps = planar.rectangle_to_square(dc)
    sides = [math.dist(sq.polygon[i], sq.polygon[(i + 1) % 4]) for i in range(4)]
    assert sides == pytest.approx([1.0] * 4, abs=1e-9)
    assert labeled_isomorphic(_replay_flat(dc, steps), sq.manifold)


def test_eliminate_vertex_reduces_count():
    dc = planar.DoubleCover.of(samples.regular_polygon(7))
    dc2, steps = planar.eliminate_vertex(dc)
    assert dc2.n == 6 and len(steps) <= 12
    assert labeled_isomorphic(_replay_flat(dc, steps), dc2.manifold)


def test_eliminate_vertex_rejects_triangle():
    with pytest.raises(planar.PreconditionViolated):
        planar.eliminate_vertex(planar.DoubleCover.of([P(0, 0), P(1, 0), P(0, 1)]))


def test_widest_vertex_ties_go_to_lowest_index():
    ring = planar.canonical_polygon(SQ)
    assert planar.widest_vertex(ring) == 0


def test_unit_square_bound_is_tight():
    d, ac = planar.corollary_bound(SQ)
    assert d == pytest.approx(math.sqrt(2), abs=1e-12)
    assert ac == pytest.approx(math.sqrt(2), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9), st.integers(4, 12))
def test_bound_holds_on_random_polygons(seed, n):
    ring = samples.convex_polygon(n, random.Random(seed))
    d, ac = planar.corollary_bound(ring)
    assert d <= ac + 1e-9


def test_plan_planar_reaches_rigid_copy_of_target():
    rng = random.Random(4)
    p = samples.convex_polygon(6, rng, area=1.0)
    q = samples.convex_polygon(5, rng, area=1.0)
    pp = planar.plan_planar(planar.DoubleCover.of(p), planar.DoubleCover.of(q))
    rep = verify_plan(pp.plan, target=pp.target.manifold)
    assert rep["ok"] and rep["all_closed"]
    moved_q = [pp.target_motion(x) for x in planar.canonical_polygon(q)]
    assert max(math.dist(a, b) for a, b in zip(planar.canonical_polygon(moved_q), pp.target.polygon)) <= 1e-9
    back = pp.plan.inverse(pp.plan.final())
    assert labeled_isomorphic(back.final(), pp.source.manifold)


def test_plan_planar_congruent_is_empty():
    sq = planar.DoubleCover.of(SQ)
    moved = planar.DoubleCover.of([P(5, 5), P(5, 6), P(4, 6), P(4, 5)])
    assert len(planar.plan_planar(sq, moved).plan) == 0


def test_plan_planar_errors():
    sq = planar.DoubleCover.of(SQ)
    with pytest.raises(planar.AreaMismatch):
        planar.plan_planar(sq, planar.DoubleCover.of([P(0, 0), P(2, 0), P(2, 2), P(0, 2)]))
    with pytest.raises(planar.NotConvex):
        k = math.sqrt(2 / 3)  # notched pentagon of area 1
        notched = [P(0, 0), P(2 * k, 0), P(k, 0.5 * k), P(2 * k, k), P(0, k)]
        planar.plan_planar(sq, planar.DoubleCover.of(notched))


def test_flatness_negative_controls():
    assert planar.is_flat(double_cover(SQ))
    assert not planar.is_flat(samples.box_surface(1, 1, 1))
    assert not planar.is_flat(samples.bipyramid())


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**9), st.integers(4, 9))
def test_to_square_chain_is_flat_and_invertible(seed, n):
    dc = planar.DoubleCover.of(samples.convex_polygon(n, random.Random(seed), area=1.0))
    sq, steps, counts = planar.to_square(dc)
    assert len(counts) == n - 3 and max(counts) <= 12
    m = _replay_flat(dc, steps)
    assert labeled_isomorphic(m, sq.manifold)
    for s in reversed(steps):
        m = apply_step(m, invert_step(s))
    assert labeled_isomorphic(m, dc.manifold)
