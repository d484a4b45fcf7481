import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refold import geom
from refold.geom import P

coord = st.floats(-10, 10, allow_nan=False)
point = st.builds(P, coord, coord)
angle = st.floats(-math.pi, math.pi)


def test_area_orientation():
    sq = [P(0, 0), P(1, 0), P(1, 1), P(0, 1)]
    assert geom.signed_area(sq) == pytest.approx(1.0)
    assert geom.signed_area(sq[::-1]) == pytest.approx(-1.0)
    assert geom.signed_area(geom.ccw(sq[::-1])) > 0
    assert geom.perimeter(sq) == pytest.approx(4.0)
    assert geom.centroid(sq) == pytest.approx(P(0.5, 0.5))


def test_convexity_and_simplicity():
    sq = [P(0, 0), P(1, 0), P(1, 1), P(0, 1)]
    dart = [P(0, 0), P(2, 0), P(1, 0.3), P(1, 1)]
    bow = [P(0, 0), P(1, 1), P(1, 0), P(0, 1)]
    assert geom.is_convex(sq)
    assert not geom.is_convex([P(0, 0), P(1, 0), P(0.5, 0.2), P(1, 1), P(0, 1)])
    assert geom.is_simple(sq) and geom.is_simple(dart)
    assert not geom.is_simple(bow)


def test_remove_straight_drops_collinear_vertex():
    ring = [P(0, 0), P(0.5, 0), P(1, 0), P(1, 1), P(0, 1)]
    assert len(geom.remove_straight(ring)) == 4


def test_point_queries():
    sq = [P(0, 0), P(2, 0), P(2, 2), P(0, 2)]
    assert geom.point_in_polygon(P(1, 1), sq)
    assert not geom.point_in_polygon(P(3, 1), sq)
    assert geom.point_on_boundary(P(2, 1), sq)
    assert geom.seg_distance(P(1, 1), P(0, 0), P(2, 0)) == pytest.approx(1.0)


def test_line_intersection_and_projection():
    l1 = geom.Line2.through(P(0, 0), P(1, 1))
    l2 = geom.Line2.through(P(0, 1), P(1, 0))
    assert geom.intersect_lines(l1, l2) == pytest.approx(P(0.5, 0.5))
    assert geom.intersect_lines(l1, geom.Line2.through(P(0, 1), P(1, 2))) is None
    assert geom.project(P(0, 1), l1) == pytest.approx(P(0.5, 0.5))


@given(point, angle, point)
def test_isometry_inverse_roundtrip(p, a, c):
    g = geom.rotation(a, c)
    assert g.is_valid()
    q = g.inverse()(g(p))
    assert math.dist(q, p) <= 1e-9 * max(1.0, abs(p.x), abs(p.y), abs(c.x), abs(c.y))


@given(point, point, angle)
def test_isometries_preserve_distance(p, q, a):
    g = geom.rotation(a).compose(geom.translation(P(1.5, -2)))
    assert geom.dist(g(p), g(q)) == pytest.approx(geom.dist(p, q), abs=1e-9)


@given(point)
def test_half_turn_is_involution(c):
    h = geom.half_turn(c)
    p = P(c.x + 1.25, c.y - 0.5)
    assert math.dist(h(h(p)), p) <= 1e-9


@settings(max_examples=50)
@given(point, point, angle)
def test_isometry_from_segment_pair(p, q, a):
    if geom.dist(p, q) < 1e-3:
        return
    g = geom.rotation(a, P(0.3, 0.1))
    s1, s2 = geom.Segment2(p, q), geom.Segment2(g(p), g(q))
    h = geom.isometry_from_segment_pair(s1, s2)
    assert h.proper
    assert math.dist(h(p), g(p)) <= 1e-7 and math.dist(h(q), g(q)) <= 1e-7


def test_reflection_detection():
    r = geom.Isometry2((1.0, 0.0, 0.0, -1.0), (0.0, 0.0))
    assert not r.proper and r.is_pure_reflection()
    glide = geom.Isometry2((1.0, 0.0, 0.0, -1.0), (1.0, 0.0))
    assert not glide.is_pure_reflection()


def test_congruent_shifts_finds_rotation():
    sq = [P(0, 0), P(1, 0), P(1, 1), P(0, 1)]
    moved = geom.transform(sq, geom.rotation(0.7, P(2, 3)))
    assert geom.congruent_shifts(sq, moved)
    assert not geom.congruent_shifts(sq, [P(0, 0), P(2, 0), P(2, 0.5), P(0, 0.5)])
