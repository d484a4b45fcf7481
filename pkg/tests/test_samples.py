import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refold import geom, samples
from refold.manifold import apply_step, is_connected, validate


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9), st.integers(3, 12), st.floats(0.1, 10))
def test_convex_polygon(seed, n, area):
    ring = samples.convex_polygon(n, random.Random(seed), area)
    assert len(ring) == n
    assert geom.is_convex(ring, strict=True)
    assert geom.area(ring) == pytest.approx(area, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9), st.integers(5, 12))
def test_star_polygon_is_simple(seed, n):
    ring = samples.star_polygon(n, random.Random(seed), 2.0)
    assert len(ring) == n and geom.is_simple(ring)
    assert geom.area(ring) == pytest.approx(2.0, rel=1e-12)


def test_mesh_surfaces_are_closed():
    for m, area in ((samples.box_surface(1, 2, 3), 22.0), (samples.bipyramid(), 6 * 3 ** 0.5 / 4)):
        r = validate(m)
        assert r.closed and r.ok
        assert r.area == pytest.approx(area)


def test_mesh_rejects_open_surface():
    with pytest.raises(geom.GeometryError):
        samples.manifold_from_mesh([(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 1, 2)])


def test_hexagon_matches_area():
    bip = samples.bipyramid()
    assert 2 * geom.area(samples.flat_hexagon_matching(bip)) == pytest.approx(bip.area)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**9))
def test_random_steps_keep_surface_valid(seed):
    rng = random.Random(seed)
    m = samples.closed_manifold(rng, 3.0)
    assert validate(m).closed and m.area == pytest.approx(3.0)
    s = samples.random_step(m, rng)
    assert s is not None and s.label in ("swap", "flip", "interior")
    m2 = apply_step(m, s)
    assert is_connected(m2) and validate(m2).closed
