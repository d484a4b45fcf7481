import json
import math
import random

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from refold import dissect, geom, samples
from refold.geom import P
from refold.manifold import Glue, double_cover

SQ = [P(0, 0), P(1, 0), P(1, 1), P(0, 1)]
RECT = [P(0, 0), P(2, 0), P(2, 0.5), P(0, 0.5)]


def test_triangulate_nonconvex():
    ring = samples.star_polygon(7, random.Random(1), 1.0)
    tris = dissect.triangulate(ring)
    assert len(tris) == 5
    assert sum(geom.area(t) for t in tris) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(dissect.NonSimple):
        dissect.triangulate([P(0, 0), P(1, 1), P(1, 0), P(0, 1)])


def test_clip_convex():
    a = [P(0, 0), P(2, 0), P(2, 2), P(0, 2)]
    b = [P(1, 1), P(3, 1), P(3, 3), P(1, 3)]
    assert geom.area(dissect.clip_convex(a, b)) == pytest.approx(1.0)
    far = [P(5, 5), P(6, 5), P(6, 6)]
    assert len(dissect.clip_convex(a, far)) < 3


def test_square_vs_rectangle_tiles_both():
    pieces = dissect.common_dissection([SQ], [RECT])
    for side, faces in (("p", [SQ]), ("q", [RECT])):
        rep = dissect.tiling_report(pieces, faces, side, samples=200)
        assert rep["ok"], rep
    assert dissect.congruence_error(pieces) <= 1e-12
    assert all(pc.placement_p.proper and pc.placement_q.proper for pc in pieces)


def test_congruent_collections_shortcut():
    moved = geom.transform(SQ, geom.rotation(0.3, P(4, 1)))
    pieces = dissect.common_dissection([SQ], [moved])
    assert len(pieces) == 1


def test_area_mismatch():
    with pytest.raises(dissect.AreaMismatch):
        dissect.common_dissection([SQ], [[P(0, 0), P(2, 0), P(2, 2), P(0, 2)]])


def test_tiling_report_catches_gaps_and_overlaps():
    pieces = dissect.common_dissection([SQ], [RECT])
    short = pieces[:-1]
    assert not dissect.tiling_report(short, [SQ], "p", samples=50)["ok"]
    doubled = pieces + [pieces[0]]
    rep = dissect.tiling_report(doubled, [SQ], "p", samples=50)
    assert rep["overlaps"] > 0 and not rep["ok"]


def test_piece_json_roundtrip():
    pieces = dissect.common_dissection([SQ], [RECT])
    again = [dissect.DissectionPiece.from_json(json.loads(json.dumps(pc.to_json()))) for pc in pieces]
    for a, b in zip(pieces, again):
        assert a.id == b.id and a.faces == b.faces
        assert max(math.dist(x, y) for x, y in zip(a.placed("q"), b.placed("q"))) <= 1e-12


def test_three_way_dissection():
    tri = [P(0, 0), P(2, 0), P(0, 1)]
    pieces = dissect.common_dissection_n([[SQ], [RECT], [tri]])
    for side, faces in ((0, [SQ]), (1, [RECT]), (2, [tri])):
        rep = dissect.tiling_report(pieces, faces, side, samples=100)
        assert rep["ok"], (side, rep)


def test_common_triangulation_square_rectangle():
    a, b = double_cover(SQ), double_cover(RECT)
    ct = dissect.refine_to_common_triangulation(dissect.common_dissection(a, b), a, b)
    assert ct.k == 2
    assert ct.area == pytest.approx(2.0)
    for side, src in ((0, a), (1, b)):
        m = ct.manifold(side)
        assert m.area == pytest.approx(2.0)
        assert dissect.gluing_consistency(ct.as_pieces(), src, side, ct.glues[side]) <= 1e-12


def test_refinement_fails_fast_on_irrational_ratio():
    s = math.sqrt(4 / math.sqrt(3))  # equilateral, area 1
    tri = [P(0, 0), P(s, 0), P(s / 2, s * math.sqrt(3) / 2)]
    a, b = double_cover(SQ), double_cover(tri)
    with pytest.raises(dissect.GluingInconsistent):
        dissect.refine_to_common_triangulation(dissect.common_dissection(a, b), a, b, max_passes=20)


def test_gluing_consistency_negative_control():
    a, b = double_cover(SQ), double_cover(RECT)
    pieces = dissect.common_dissection(a, b)
    ct = dissect.refine_to_common_triangulation(pieces, a, b)
    good = ct.glues[0]
    g = good[0]
    wrong = [Glue(g.a, g.b, not g.reversed)] + list(good[1:])
    assert dissect.gluing_consistency(ct.as_pieces(), a, 0, wrong) > 1e-6


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10**9), st.integers(3, 8), st.integers(3, 8), st.booleans())
def test_random_pairs_tile(seed, n, m, star):
    rng = random.Random(seed)
    area = rng.uniform(0.3, 4.0)
    a = samples.star_polygon(max(n, 5), rng, area) if star else samples.convex_polygon(n, rng, area)
    b = samples.convex_polygon(m, rng, area)
    pieces = dissect.common_dissection([a], [b])
    for side, faces in (("p", [a]), ("q", [b])):
        rep = dissect.tiling_report(pieces, faces, side, samples=100, seed=seed)
        assert rep["ok"], rep
    assert dissect.congruence_error(pieces) <= 1e-9
