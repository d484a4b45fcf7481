"""Acceptance suite: one test per criterion, each adding a PASS/FAIL summary line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines appear in
the "acceptance criteria" section at the end of the report.
"""

import math
import random
import time

import pytest

from refold import dissect, geom, intermediate, planar, samples
from refold import polycube as pcube
from refold.geom import P
from refold.manifold import (
    apply_cuts,
    apply_step,
    double_cover,
    invert_step,
    is_connected,
    isomorphic,
    labeled_isomorphic,
    validate,
)

POLYCUBE_C = 3.0  # measured worst moves / n^2 was about 1.42; frozen with headroom


def _line_point(a, b, c, d):
    """Intersection of line ab with line cd (independent of the library's geometry)."""
    x1, y1 = a
    x2, y2 = b
    x3, y3 = c
    x4, y4 = d
    den = (x1 - x2) * (y3 - y4) - (y1 - y2) * (x3 - x4)
    if abs(den) < 1e-15:
        return None
    t = ((x1 - x3) * (y3 - y4) - (y1 - y3) * (x3 - x4)) / den
    return (x1 + t * (x2 - x1), y1 + t * (y2 - y1))


def _interior_angle(ring, i):
    a, b, c = ring[i - 1], ring[i], ring[(i + 1) % len(ring)]
    u = (a[0] - b[0], a[1] - b[1])
    v = (c[0] - b[0], c[1] - b[1])
    return math.acos(max(-1.0, min(1.0, (u[0] * v[0] + u[1] * v[1]) / (math.hypot(*u) * math.hypot(*v)))))


def _oracle_q_distances(ring):
    """|Q1B| and |Q2B| for B the widest vertex, by direct line intersection."""
    n = len(ring)
    ib = max(range(n), key=lambda i: (round(_interior_angle(ring, i), 12), -i))
    B = ring[ib]
    A, C = ring[ib - 1], ring[(ib + 1) % n]
    D1, D2 = ring[ib - 2], ring[(ib + 2) % n]
    ell = (B, (B[0] + C[0] - A[0], B[1] + C[1] - A[1]))
    out = []
    for X, Y in ((D1, A), (D2, C)):
        q = _line_point(X, Y, *ell)
        out.append(math.inf if q is None else math.dist(q, B))
    return out, math.dist(A, C)


# --- 1 -------------------------------------------------------------------------------------


def test_criterion_1_planar_pipeline(record):
    rng = random.Random(101)
    worst_steps = worst_time = worst_area = 0.0
    problems = []
    for i in range(100):
        n = rng.randint(4, 12)
        dc = planar.DoubleCover.of(samples.convex_polygon(n, rng, area=1.0))
        chain, t0 = [], time.perf_counter()
        cur = dc
        while cur.n > 3:
            cur, steps = planar.eliminate_vertex(cur)
            chain.append((cur, steps))
        worst_time = max(worst_time, time.perf_counter() - t0)
        if len(chain) != n - 3:
            problems.append(f"polygon {i}: {len(chain)} eliminations for n={n}")
        m = dc.manifold
        for target, steps in chain:
            worst_steps = max(worst_steps, len(steps))
            for s in steps:
                m = apply_step(m, s)
                r = validate(m)
                worst_area = max(worst_area, abs(r.area - 2.0))
                if not r.closed or not planar.is_flat(m):
                    problems.append(f"polygon {i}: state after {s.label!r} not closed and flat")
            if isomorphic(m, target.manifold) is None:
                problems.append(f"polygon {i}: chain does not reach the eliminated polygon")
    ok = not problems and worst_steps <= 12 and worst_area <= 1e-9 and worst_time < 1.0
    record(1, ok, f"100 polygons, n-3 eliminations each, max {worst_steps:.0f} steps/elimination (<=12), "
                  f"area drift {worst_area:.1e} (<=1e-9), all states closed+flat, "
                  f"max {worst_time:.2f}s/polygon (<1s)" + (f"; {problems[:3]}" if problems else ""))
    assert ok, problems[:5]


# --- 2 -------------------------------------------------------------------------------------


def test_criterion_2_corollary_bound(record):
    rng = random.Random(202)
    worst = -math.inf
    mismatch = 0
    for _ in range(10_000):
        ring = planar.canonical_polygon(samples.convex_polygon(rng.randint(4, 12), rng))
        (q1, q2), ac = _oracle_q_distances(ring)
        worst = max(worst, min(q1, q2) - ac)
        d, ac_lib = planar.corollary_bound(ring)
        if abs(ac_lib - ac) > 1e-9 or abs(d - min(q1, q2)) > 1e-9 or d > ac + 1e-9:
            mismatch += 1
    (sq1, sq2), sac = _oracle_q_distances([P(0, 0), P(1, 0), P(1, 1), P(0, 1)])
    d_sq, ac_sq = planar.corollary_bound([(0, 0), (1, 0), (1, 1), (0, 1)])
    eq = abs(d_sq - math.sqrt(2)) <= 1e-9 and abs(ac_sq - math.sqrt(2)) <= 1e-9 and abs(min(sq1, sq2) - sac) <= 1e-9
    ok = worst <= 1e-9 and mismatch == 0 and eq
    record(2, ok, f"10^4 polygons: max(min|QiB| - |AC|) = {worst:.2e} (<=1e-9), library/oracle mismatches "
                  f"{mismatch}; unit square |QB| = {d_sq:.12f}, |AC| = {ac_sq:.12f}")
    assert ok


# --- 3 -------------------------------------------------------------------------------------


def test_criterion_3_polycube(record):
    rng = random.Random(303)
    worst_ratio = worst_time = 0.0
    problems = []
    for k in range(50):
        n = 3 + k % 13
        pc = pcube.random_tree(n, rng)
        rep = pcube.validate_polycube(pc)
        assert rep["tree"] and not rep["self_intersecting"] and rep["well_separated"]
        t0 = time.perf_counter()
        lp = pcube.to_line(pc)
        dt = time.perf_counter() - t0
        worst_time = max(worst_time, dt)
        worst_ratio = max(worst_ratio, len(lp.moves) / n**2)
        if not pcube.is_line(lp.final):
            problems.append(f"tree {k}: final is not a line")
        for st in lp.states:
            r = pcube.validate_polycube(st)
            if not r["tree"] or r["self_intersecting"] or r["surface_area"] != 4 * n + 2:
                problems.append(f"tree {k}: bad intermediate {r}")
        m = pcube.surface(pc)
        for j, s in enumerate(lp.steps):
            m2 = apply_step(m, s)
            if not labeled_isomorphic(apply_step(m2, invert_step(s)), m, tol=1e-9):
                problems.append(f"tree {k}: move {j} does not round-trip")
            if not pcube.surface_matches(m2, lp.states[j + 1], lp.history[j + 1]):
                problems.append(f"tree {k}: move {j} surface mismatch")
            m = m2
    small = set()
    for cells, tree in (([(0, 0, 0), (1, 0, 0), (1, 1, 0)], [(0, 1), (1, 2)]),
                        ([(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 1), (0, 2)]),
                        ([(0, 0, 0), (0, 0, 1), (0, 1, 1)], [(0, 1), (1, 2)])):
        pc = pcube.Polycube.make(cells, tree)
        small.add((len(pcube.to_line(pc).moves), pcube.bfs_line_distance(pc)))
    oracle_ok = all(o is not None and a < math.inf for a, o in small)
    ok = not problems and worst_ratio <= POLYCUBE_C and worst_time < 5.0 and oracle_ok
    record(3, ok, f"50 trees n<=15: max moves/n^2 = {worst_ratio:.2f} (C={POLYCUBE_C}), all intermediates trees "
                  f"with area 4n+2, every step replays and inverts, max {worst_time:.2f}s (<5s); "
                  f"n=3 (artifact, BFS) = {sorted(small)}" + (f"; {problems[:3]}" if problems else ""))
    assert ok, problems[:5]


# --- 4 -------------------------------------------------------------------------------------


def test_criterion_4_dissection(record):
    rng = random.Random(404)
    worst_area = worst_cong = 0.0
    bad = 0
    counts = []
    for i in range(20):
        area = rng.uniform(0.5, 3.0)
        mk = (lambda: samples.star_polygon(rng.randint(5, 9), rng, area)) if i % 3 == 2 else \
             (lambda: samples.convex_polygon(rng.randint(3, 8), rng, area))
        A, B = mk(), samples.convex_polygon(rng.randint(3, 8), rng, area)
        pieces = dissect.common_dissection([A], [B])
        counts.append(len(pieces))
        for side, faces in (("p", [A]), ("q", [B])):
            rep = dissect.tiling_report(pieces, faces, side, samples=1000, seed=i)
            worst_area = max(worst_area, rep["area_error"])
            bad += rep["overlaps"] + rep["outside"]
        worst_cong = max(worst_cong, dissect.congruence_error(pieces))
    ok = worst_area <= 1e-9 and bad == 0 and worst_cong <= 1e-9
    record(4, ok, f"20 pairs ({min(counts)}-{max(counts)} pieces): area error {worst_area:.1e} (<=1e-9), "
                  f"sampled overlaps/outside {bad} (10^3 points/piece), congruence {worst_cong:.1e} (<=1e-9)")
    assert ok


# --- 5 -------------------------------------------------------------------------------------


def _two_step_ok(P_, Q_):
    tp = intermediate.plan_intermediate(P_, Q_)
    r = tp.report()
    rep = validate(tp.intermediate)
    faithful = max(dissect.gluing_consistency(tp.pieces, P_, 0, tp.source.glues),
                   dissect.gluing_consistency(tp.pieces, Q_, 1, tp.target.glues))
    ok = r["ok"] and rep.boundary_length <= 1e-9 and faithful <= 1e-9
    return ok, tp.method


def test_criterion_5_two_step(record):
    rng = random.Random(505)
    methods = {}
    failures = []
    for i in range(20):
        area = rng.uniform(2.0, 6.0)
        A, B = samples.closed_manifold(rng, area), samples.closed_manifold(rng, area)
        ok, method = _two_step_ok(A, B)
        methods[method] = methods.get(method, 0) + 1
        if not ok:
            failures.append(i)
    bip = samples.bipyramid()
    hexa = double_cover(samples.flat_hexagon_matching(bip))
    bip_ok, bip_method = _two_step_ok(bip, hexa)
    # the nested-segment construction proper, on a pair whose triangulation exists
    sq = double_cover([P(0, 0), P(1, 0), P(1, 1), P(0, 1)])
    rect = double_cover([P(0, 0), P(2, 0), P(2, 0.5), P(0, 0.5)])
    ct = dissect.refine_to_common_triangulation(dissect.common_dissection(sq, rect), sq, rect)
    nested = intermediate.build_intermediate(intermediate.subdivide(ct, 2)).report()["ok"]
    rects = [double_cover([P(0, 0), P(w, 0), P(w, 2 / w), P(0, 2 / w)]) for w in (1.0, 2.0, 3.0)]
    n, _ = intermediate.plan_intermediate_n(rects)
    rows = n.verify()
    k3 = all(r["replays"] and r["connected_after_cut"] and r["inverse_replays"] for r in rows) \
        and validate(n.intermediate).closed
    ok = not failures and bip_ok and nested and k3
    record(5, ok, f"20 closed pairs (methods {methods}) closed I, exact replays, connected cuts, faithful to "
                  f"inputs: {20 - len(failures)}/20; bipyramid-hexagon ({bip_method}): {bip_ok}; "
                  f"nested build_intermediate square-rectangle: {nested}; k=3 rectangles ({n.method}): {k3}")
    assert ok, failures


# --- 6 -------------------------------------------------------------------------------------


def _random_manifold(rng):
    c = rng.randrange(4)
    if c == 0:
        return double_cover(samples.convex_polygon(rng.randint(3, 8), rng))
    if c == 1:
        return samples.box_surface(*[rng.uniform(0.5, 2.0) for _ in range(3)])
    if c == 2:
        return pcube.surface(pcube.random_tree(rng.randint(2, 5), rng))
    return samples.bipyramid()


def test_criterion_6_reversibility(record):
    rng = random.Random(606)
    done = bad = 0
    kinds = {}
    while done < 1000:
        m = _random_manifold(rng)
        for _ in range(rng.randint(0, 2)):
            pre = samples.random_step(m, rng)
            if pre is not None:
                m = apply_step(m, pre)
        s = samples.random_step(m, rng)
        if s is None:
            continue
        done += 1
        kinds[s.label] = kinds.get(s.label, 0) + 1
        back = apply_step(apply_step(m, s), invert_step(s))
        if not labeled_isomorphic(back, m, tol=1e-9):
            bad += 1
    ok = bad == 0
    record(6, ok, f"{done} random steps {kinds}: {done - bad} round-trip labeled-isomorphic at 1e-9")
    assert ok
