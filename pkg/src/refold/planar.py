"""Refolding between doubly covered convex polygons of equal area.

A doubly covered polygon is the manifold made of a ``top`` copy of the polygon
(in plane coordinates) and a ``bottom`` copy (mirrored across the x-axis)
glued along every edge.  Every planner here produces exact
:class:`~refold.manifold.RefoldStep` records, so plans can be replayed,
inverted and checked independently of the geometry that produced them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import shapely
from shapely.geometry import Polygon as _SPolygon

from . import geom
from .geom import (
    EPS,
    IDENTITY,
    MIRROR_X,
    GeometryError,
    Isometry2,
    Line2,
    P,
    Point2,
    Segment2,
)
from .manifold import (
    Glue,
    Manifold,
    Merge,
    RefoldStep,
    Unmerge,
    _on_polyline,
    _remove_subglue,
    normalize_glues,
    apply_cuts,
    apply_step,
    apply_unmerge,
    double_cover,
    glue_segments,
    labeled_isomorphic,
    split_ring,
)
from .plan import Plan


class PlanarError(ValueError):
    code = "PlanarError"


class OverlapViolation(PlanarError):
    code = "OverlapViolation"


class NoReflection(PlanarError):
    code = "NoReflection"


class ProjectionOutside(PlanarError):
    code = "ProjectionOutside"


class PreconditionViolated(PlanarError):
    code = "PreconditionViolated"


class NotConvex(PlanarError):
    code = "NotConvex"


class AreaMismatch(PlanarError):
    code = "AreaMismatch"


def canonical_polygon(poly: Sequence) -> tuple[Point2, ...]:
    """Counterclockwise, no straight vertices, smallest vertex first."""
    ring = geom.remove_straight(geom.ccw([P(p) for p in poly]))
    if len(ring) < 3 or geom.area(ring) <= EPS:
        raise GeometryError("degenerate polygon")
    return tuple(geom.rotate_to_min(ring))


@dataclass(frozen=True)
class DoubleCover:
    """A doubly covered polygon; ``polygon`` is stored in canonical order."""

    polygon: tuple[Point2, ...]

    @classmethod
    def of(cls, poly: Sequence) -> "DoubleCover":
        return cls(canonical_polygon(poly))

    @cached_property
    def manifold(self) -> Manifold:
        return double_cover(self.polygon)

    @property
    def n(self) -> int:
        return len(self.polygon)

    @property
    def area(self) -> float:
        return geom.area(self.polygon)

    def is_convex(self) -> bool:
        return geom.is_convex(self.polygon, strict=True)


def _mirror_iso(g: Isometry2) -> Isometry2:
    return MIRROR_X.compose(g).compose(MIRROR_X)


def _same_polygon(r1: Sequence, r2: Sequence, tol: float = 1e-7) -> bool:
    if len(r1) != len(r2):
        return False
    return any(
        all(geom.dist(r1[i], r2[(i + k) % len(r2)]) <= tol * geom._scale(r1[i]) for i in range(len(r1)))
        for k in range(len(r2))
    )


# --- the basic move: cut a piece off and reattach it along a boundary segment ----------


@dataclass(frozen=True)
class RearrangeSpec:
    """Move the piece cut off by ``cut`` with ``motion`` so that segment
    ``a1 b1`` of its boundary lands on segment ``a2 b2`` of the remainder."""

    a1: Point2
    b1: Point2
    a2: Point2
    b2: Point2
    cut: tuple[Point2, ...]
    motion: Isometry2
    label: str = "rearrange"

    @property
    def reflection(self) -> Isometry2:
        return geom.isometry_from_segment_pair(Segment2(self.a1, self.b1), Segment2(self.a2, self.b2), improper=True)


def spec(a1, b1, a2, b2, cut, motion, label="rearrange") -> RearrangeSpec:
    return RearrangeSpec(P(a1), P(b1), P(a2), P(b2), tuple(P(p) for p in cut), motion, label)


def _on_ring(p: Point2, ring: Sequence) -> bool:
    return geom.point_on_boundary(p, ring, 1e-8)


def _split(ring: Sequence, s: RearrangeSpec) -> tuple[list[Point2], list[Point2]]:
    """(moving piece, fixed piece)."""
    try:
        r1, r2 = split_ring(ring, s.cut)
    except GeometryError as e:
        raise PreconditionViolated(f"cut does not split the polygon: {e}") from None
    mid1 = geom.midpoint(s.a1, s.b1)
    mid2 = geom.midpoint(s.a2, s.b2)

    def off_cut(p):
        return all(geom.seg_distance(p, a, b) > 1e-8 for a, b in zip(s.cut, s.cut[1:]))

    if not (off_cut(mid1) and off_cut(mid2)):
        raise PreconditionViolated("glue segments must lie on the original boundary")
    for mv, fx in ((r1, r2), (r2, r1)):
        if _on_ring(mid1, mv) and _on_ring(mid2, fx):
            return mv, fx
    raise PreconditionViolated("segments a1b1 and a2b2 must lie on different pieces")


def overlap_area(r1: Sequence, r2: Sequence) -> float:
    """Area of the interior overlap of two simple polygons.

    The plain overlay can return garbage for polygons sharing an edge
    exactly, so robust predicates go first and the overlay runs snapped.
    """
    a, b = _SPolygon(r1), _SPolygon(r2)
    if not a.intersects(b) or a.touches(b):
        return 0.0
    return shapely.intersection(a, b, grid_size=1e-12).area


def _union_ring(fixed: Sequence[Point2], moved: Sequence[Point2]) -> tuple[list[Point2], list[tuple[Point2, Point2]]]:
    """Boundary of two CCW rings touching along one polyline, and that polyline's segments."""
    w2, w1 = [P(p) for p in fixed], [P(p) for p in moved]
    for src, dst in ((w1, w2), (w2, w1)):
        for p in list(src):
            if _on_ring(p, dst):
                _insert(dst, p)

    def run(w, other):
        n = len(w)
        on = [_on_ring(geom.midpoint(w[i], w[(i + 1) % n]), other) for i in range(n)]
        if not any(on) or all(on):
            raise OverlapViolation("pieces do not meet along a boundary polyline")
        starts = [i for i in range(n) if on[i] and not on[i - 1]]
        if len(starts) != 1:
            raise OverlapViolation("moved piece touches the rest in more than one place")
        i = starts[0]
        k = 0
        while on[(i + k) % n]:
            k += 1
        return i, (i + k) % n

    i_s, i_e = run(w2, w1)
    s, e = w2[i_s], w2[i_e]
    contact = [(w2[(i_s + k) % len(w2)], w2[(i_s + k + 1) % len(w2)]) for k in range((i_e - i_s) % len(w2))]
    j_e, j_s = run(w1, w2)
    if not (geom.close(w1[j_e], e, 1e-8) and geom.close(w1[j_s], s, 1e-8)):
        raise OverlapViolation("contact polylines disagree")
    n2, n1 = len(w2), len(w1)
    out = [w2[(i_e + k) % n2] for k in range((i_s - i_e) % n2 + 1)]
    out += [w1[(j_s + k) % n1] for k in range(1, (j_e - j_s) % n1)]
    return out, contact


def _insert(w: list[Point2], p: Point2) -> None:
    for q in w:
        if geom.close(p, q, 1e-8):
            return
    for i in range(len(w)):
        a, b = w[i], w[(i + 1) % len(w)]
        if geom.seg_distance(p, a, b) <= 1e-8 * geom._scale(a, b):
            w.insert(i + 1, P(p))
            return
    raise PreconditionViolated(f"{p} is not on the piece boundary")


def rearranged_polygon(polygon: Sequence, s: RearrangeSpec):
    """Check a rearrangement.

    Returns (moving piece, fixed piece, new polygon, extra contact), the last
    being the segments other than a2b2 where the moved piece meets the rest.
    """
    f = s.motion
    if not f.proper:
        raise PreconditionViolated("the motion must be orientation preserving")
    if geom.dist(f(s.a1), s.a2) > 1e-7 * geom._scale(s.a2) or geom.dist(f(s.b1), s.b2) > 1e-7 * geom._scale(s.b2):
        raise PreconditionViolated("motion must map a1 -> a2 and b1 -> b2")
    try:
        r = s.reflection
    except GeometryError as e:
        raise PreconditionViolated(str(e)) from None
    if not r.is_pure_reflection(1e-7):
        raise NoReflection("no reflection maps a1b1 onto a2b2; the move is a glide")
    mv, fx = _split(polygon, s)
    moved = geom.transform(mv, f)
    inter = overlap_area(moved, fx)
    if inter > 1e-9 * max(1.0, geom.area(polygon)):
        raise OverlapViolation(f"moved piece overlaps the rest (area {inter:.3g})")
    ring, contact = _union_ring(fx, moved)
    ring = geom.remove_straight(ring)
    if not geom.is_simple(ring) or abs(geom.area(ring) - geom.area(polygon)) > 1e-9 * max(1.0, geom.area(polygon)):
        raise OverlapViolation("rearranged polygon is not simple")
    extra = []
    for p, q in contact:
        mid = geom.midpoint(p, q)
        if geom.seg_distance(mid, s.a2, s.b2) > 1e-8 * geom._scale(s.a2, s.b2):
            extra.append((p, q))
        elif not (geom.seg_distance(p, s.a2, s.b2) <= 1e-8 * geom._scale(p) and
                  geom.seg_distance(q, s.a2, s.b2) <= 1e-8 * geom._scale(q)):
            raise OverlapViolation("contact segment straddles a2b2")
    covered = sum(geom.dist(p, q) for p, q in contact) - sum(geom.dist(p, q) for p, q in extra)
    if abs(covered - geom.dist(s.a2, s.b2)) > 1e-8 * geom._scale(s.a2, s.b2):
        raise OverlapViolation("moved piece does not cover a2b2")
    return mv, fx, ring, extra


def rearrange(dc: DoubleCover, s: RearrangeSpec, result: Sequence | None = None) -> tuple[DoubleCover, list[RefoldStep]]:
    """Two refolding steps turning ``dc`` into the double cover of the rearranged polygon.

    Step one cuts both layers along ``a1b1`` and ``a2b2`` and glues each layer
    to itself by the reflection.  Step two cuts the piece boundary in both
    layers, reglues the layers to each other across it, and re-represents the
    two faces so each layer is again a single polygon.

    ``result`` may fix the vertex order of the new polygon, which lets a
    chain end on an exactly prescribed ring.
    """
    if s.motion.almost_equal(IDENTITY, 1e-12) and geom.close(s.a1, s.a2) and geom.close(s.b1, s.b2):
        return dc, []
    mv, fx, ring, extra = rearranged_polygon(dc.polygon, s)
    if result is not None:
        if not _same_polygon(canonical_polygon(ring), canonical_polygon(result)):
            raise PreconditionViolated("rearranged polygon differs from the requested result")
        new = DoubleCover(tuple(P(p) for p in result))
    else:
        new = DoubleCover(canonical_polygon(ring))
    M = MIRROR_X
    m0 = dc.manifold
    a1, b1, a2, b2 = s.a1, s.b1, s.a2, s.b2

    cuts = (glue_segments(m0, "top", a1, b1, "bottom", M(a1), M(b1))
            + glue_segments(m0, "top", a2, b2, "bottom", M(a2), M(b2)))
    step1 = RefoldStep(cuts=tuple(cuts), label=f"{s.label}: fold")
    mc = apply_cuts(m0, step1)
    glues = (glue_segments(mc, "top", a1, b1, "top", a2, b2)
             + glue_segments(mc, "bottom", M(a1), M(b1), "bottom", M(a2), M(b2)))
    step1 = RefoldStep(cuts=tuple(cuts), glues=tuple(glues), label=step1.label)
    m1 = apply_step(m0, step1)

    layers = (("top", IDENTITY, s.motion), ("bottom", M, _mirror_iso(s.motion)))
    unmerges, merges = [], []
    for face, frame, motion in layers:
        ring_of = (lambda r: tuple(P(p) for p in r)) if face == "top" else (lambda r: tuple(geom.mirror_ring(r)))
        unmerges.append(Unmerge(face, f"{face}.keep", f"{face}.move", m1.face(face).ring,
                                ring_of(fx), ring_of(mv), IDENTITY, face))
        merges.append(Merge(f"{face}.keep", f"{face}.move", face, motion, ring_of(fx), ring_of(mv),
                            ring_of(new.polygon), face))
    mu = m1
    for u in unmerges:
        mu = apply_unmerge(mu, u)
    cut_m = [M(p) for p in s.cut]
    seam = [g for g in mu.glues
            if {g.a.face, g.b.face} in ({"top.keep", "top.move"}, {"bottom.keep", "bottom.move"})
            and _on_polyline(mu, g.a, s.cut if g.a.face.startswith("top") else cut_m)]
    # where the moved piece also touches the rest, swap the two folds for a seam
    back = s.motion.inverse()
    for p, q in extra:
        bp, bq = back(p), back(q)
        seam += glue_segments(mu, "top.keep", p, q, "bottom.keep", M(p), M(q))
        seam += glue_segments(mu, "top.move", bp, bq, "bottom.move", M(bp), M(bq))
    rest = list(mu.glues)
    for c in seam:
        rest = _remove_subglue(rest, c)
    mc2 = Manifold(mu.faces, normalize_glues(rest))
    glues2 = []
    for part in ("keep", "move"):
        for p, q in zip(s.cut, s.cut[1:]):
            glues2 += glue_segments(mc2, f"top.{part}", p, q, f"bottom.{part}", M(p), M(q))
    for p, q in extra:
        bp, bq = back(p), back(q)
        glues2 += glue_segments(mc2, "top.keep", p, q, "top.move", bp, bq)
        glues2 += glue_segments(mc2, "bottom.keep", M(p), M(q), "bottom.move", M(bp), M(bq))
    step2 = RefoldStep(tuple(unmerges), tuple(seam), tuple(glues2), tuple(merges), f"{s.label}: flip")
    m2 = apply_step(m1, step2)
    if not labeled_isomorphic(m2, new.manifold):
        raise PlanarError("internal: rearrangement replay does not give the expected double cover")
    return new, [step1, step2]


def reframe(dc: DoubleCover, g: Isometry2, result: Sequence | None = None) -> tuple[DoubleCover, list[RefoldStep]]:
    """A rigid motion of the whole double cover, written as one step with no cuts or glues."""
    poly = dc.polygon
    target = tuple(P(p) for p in result) if result is not None else canonical_polygon(geom.transform(poly, g))
    if not _same_polygon(canonical_polygon(geom.transform(poly, g)), canonical_polygon(target)):
        raise PreconditionViolated("reframe target is not the moved polygon")
    if len(poly) >= 4:
        chord = (poly[0], poly[2])
    else:
        chord = (poly[0], geom.midpoint(poly[1], poly[2]))
    r1, r2 = split_ring(poly, chord)
    unmerges, merges = [], []
    for face, h in (("top", g), ("bottom", _mirror_iso(g))):
        ring_of = (lambda r: tuple(P(p) for p in r)) if face == "top" else (lambda r: tuple(geom.mirror_ring(r)))
        p1, p2 = ring_of(r1), ring_of(r2)
        moved = tuple(h(p) for p in p2)
        unmerges.append(Unmerge(face, f"{face}.p", f"{face}.q", ring_of(poly), p1, moved, h, face))
        merges.append(Merge(f"{face}.q", f"{face}.p", face, h, moved, p1, ring_of(target), face))
    step = RefoldStep(unmerges=tuple(unmerges), merges=tuple(merges), label="reframe")
    new = DoubleCover(target)
    return new, [step]


def conjugate_step(step: RefoldStep, g: Isometry2) -> RefoldStep:
    """The same step for the double cover moved rigidly by ``g``."""
    gb = _mirror_iso(g)

    def G(tag):
        return gb if tag == "bottom" else g

    def conj(h, x):
        return x.compose(h).compose(x.inverse())

    us = tuple(Unmerge(u.face, u.a, u.b, tuple(G(u.tag)(p) for p in u.ring), tuple(G(u.tag)(p) for p in u.ring_a),
                       tuple(G(u.tag)(p) for p in u.ring_b), conj(u.b_frame, G(u.tag)), u.tag)
               for u in step.unmerges)
    ms = tuple(Merge(m.a, m.b, m.into, conj(m.b_to_a, G(m.tag)), tuple(G(m.tag)(p) for p in m.ring_a),
                     tuple(G(m.tag)(p) for p in m.ring_b), tuple(G(m.tag)(p) for p in m.ring), m.tag)
               for m in step.merges)
    return RefoldStep(us, step.cuts, step.glues, ms, step.label)


def _run(dc: DoubleCover, specs: Sequence[RearrangeSpec], result=None) -> tuple[DoubleCover, list[RefoldStep]]:
    steps: list[RefoldStep] = []
    for i, s in enumerate(specs):
        dc, st = rearrange(dc, s, result if i == len(specs) - 1 else None)
        steps += st
    return dc, steps


# --- triangles to rectangles --------------------------------------------------------


def _require_consecutive(dc: DoubleCover, A, B, C) -> None:
    """B must be a vertex with boundary segments BA and BC (A or C may sit mid-edge)."""
    ring = dc.polygon
    if not any(geom.close(B, v, 1e-8) for v in ring):
        raise PreconditionViolated("B must be a vertex")
    for p in (A, C, geom.midpoint(A, B), geom.midpoint(B, C)):
        if not _on_ring(p, ring):
            raise PreconditionViolated("AB and BC must lie on the boundary")


def acute_specs(A, B, C) -> list[RearrangeSpec]:
    """Two half-turns turning triangle ABC into the rectangle on AC of half its height."""
    A, B, C = P(A), P(B), P(C)
    X, Y = geom.midpoint(A, B), geom.midpoint(B, C)
    O = geom.project(B, Line2.through(X, Y))
    out = []
    tol = 1e-9 * geom._scale(A, B, C)
    if geom.dist(O, X) > tol:
        cut = (X, Y) if geom.dist(O, Y) <= tol else (X, O, B)
        out.append(spec(X, B, X, A, cut, geom.half_turn(X), "acute: turn about AB midpoint"))
    if geom.dist(O, Y) > tol:
        out.append(spec(Y, B, Y, C, (O, Y), geom.half_turn(Y), "acute: turn about BC midpoint"))
    return out


def _foot_param(A, B, C) -> tuple[float, float]:
    """Projection parameter of B along AC (0 at A, |AC| at C) and |AC|."""
    L = geom.dist(A, C)
    return geom.line_param(B, Line2.through(A, C)), L


def triangle_to_rectangle_acute(dc: DoubleCover, A, B, C, result=None) -> tuple[DoubleCover, list[RefoldStep]]:
    """Replace the triangle ABC of ``dc`` (B's foot on segment AC) by a rectangle on AC."""
    A, B, C = P(A), P(B), P(C)
    _require_consecutive(dc, A, B, C)
    t, L = _foot_param(A, B, C)
    if t < -1e-9 * L or t > L * (1 + 1e-9):
        raise ProjectionOutside("the projection of B falls outside segment AC")
    return _run(dc, acute_specs(A, B, C), result)


def scalene_specs(A, B, C, base_on_boundary: bool = True) -> tuple[list[RearrangeSpec], bool]:
    """Moves for a triangle whose apex projects beyond C.

    Returns the specs and whether the final translation degenerates into a
    rigid motion of the whole polygon (only when |CB1| = 4|AC|).
    """
    A, B, C = P(A), P(B), P(C)
    X, Y = geom.midpoint(A, B), geom.midpoint(B, C)
    Yp = X * 2 - Y
    ac = Line2.through(A, C)
    V, W = geom.midpoint(A, Yp), geom.midpoint(C, Y)
    V1, W1 = geom.project(V, ac), geom.project(W, ac)
    V2, W2 = V * 2 - V1, W * 2 - W1
    C2 = C + (W2 - W1)
    tol = 1e-9 * geom._scale(A, B, C)
    out = [spec(X, B, X, A, (X, Y), geom.half_turn(X), "scalene: turn about AB midpoint")]
    if geom.dist(A, V1) > tol:
        # AC is only boundary when the triangle is the whole polygon
        cut = (V, V1) if base_on_boundary else (V, V1, A)
        out.append(spec(V, A, V, Yp, cut, geom.half_turn(V), "scalene: turn lower-left corner"))
    if geom.dist(W2, Y) > tol:
        out.append(spec(W, Y, W, C, (W, W2), geom.half_turn(W), "scalene: turn upper-right corner"))
    whole = geom.dist(V1, C) <= tol
    if not whole:
        out.append(spec(W1, W2, V1, V2, (C, C2), geom.translation(A - C), "scalene: slide overhang"))
    return out, whole


def triangle_to_rectangle_scalene(dc: DoubleCover, A, B, C, result=None) -> tuple[DoubleCover, list[RefoldStep]]:
    """Replace triangle ABC (B's foot beyond C, within 4|AC| of it) by a rectangle on AC."""
    A, B, C = P(A), P(B), P(C)
    _require_consecutive(dc, A, B, C)
    t, L = _foot_param(A, B, C)
    if t <= L * (1 + 1e-9):
        raise PreconditionViolated("C must lie strictly between A and the projection of B")
    if t - L > 4 * L * (1 + 1e-9):
        raise PreconditionViolated("the projection of B is more than 4|AC| beyond C")
    specs, whole = scalene_specs(A, B, C, _on_ring(geom.midpoint(A, C), dc.polygon))
    if not whole:
        return _run(dc, specs, result)
    dc2, steps = _run(dc, specs)
    dc3, st = reframe(dc2, geom.translation(A - C), result)
    return dc3, steps + st


def triangle_to_rectangle(dc: DoubleCover, A, B, C, result=None) -> tuple[DoubleCover, list[RefoldStep]]:
    """Pick the right construction from where B projects onto line AC."""
    t, L = _foot_param(A, B, C)
    if -1e-9 * L <= t <= L * (1 + 1e-9):
        return triangle_to_rectangle_acute(dc, A, B, C, result)
    if t > L:
        return triangle_to_rectangle_scalene(dc, A, B, C, result)
    return triangle_to_rectangle_scalene(dc, C, B, A, result)


def _expected_rectangle(A, B, C) -> list[Point2]:
    A, C = P(A), P(C)
    ac = Line2.through(A, C)
    h = geom.dist(B, geom.project(B, ac)) / 2
    n = P(-ac.direction[1], ac.direction[0])
    if geom.dot(n, P(B) - A) < 0:
        n = -n
    return [A, C, C + n * h, A + n * h]


# --- vertex elimination --------------------------------------------------------------


def projection_bound(poly: Sequence, i_b: int) -> tuple[str, Point2, float]:
    """Choose where B slides along the line through B parallel to AC.

    Returns ("A" or "C", Q, |QB|): the side whose neighbouring edge line meets
    that parallel line closer to B.  Ties go to the C side.
    """
    ring = [P(p) for p in poly]
    n = len(ring)
    B = ring[i_b]
    A, C = ring[i_b - 1], ring[(i_b + 1) % n]
    D1, D2 = ring[i_b - 2], ring[(i_b + 2) % n]
    ell = Line2.parallel_through(B, C - A)
    best = []
    for side, D, E in (("A", D1, A), ("C", D2, C)):
        if geom.dist(D, E) <= EPS:
            continue
        Q = geom.intersect_lines(ell, Line2.through(D, E))
        if Q is not None:
            best.append((geom.dist(Q, B), side, Q))
    if not best:
        raise PreconditionViolated("neither neighbouring edge meets the parallel line")
    best.sort(key=lambda x: (round(x[0] / geom._scale(*ring), 12), 0 if x[1] == "C" else 1))
    d, side, Q = best[0]
    return side, Q, d


def widest_vertex(poly: Sequence) -> int:
    ring = list(poly)
    angles = [geom.interior_angle(ring, i) for i in range(len(ring))]
    top = max(angles)
    return next(i for i, a in enumerate(angles) if a >= top - 1e-12)


def eliminate_vertex(dc: DoubleCover, result=None) -> tuple[DoubleCover, list[RefoldStep]]:
    """Refold ``dc`` into a doubly covered convex polygon with one vertex fewer.

    B is the vertex of largest interior angle.  Triangle ABC becomes the
    rectangle on AC, which is then turned back into triangle AQC where Q is
    B slid parallel to AC until one neighbouring edge extends straight
    through Q.  At most 12 steps.
    """
    poly = dc.polygon
    n = len(poly)
    if n < 4:
        raise PreconditionViolated("need at least four vertices")
    if not dc.is_convex():
        raise NotConvex("polygon is not strictly convex")
    ib = widest_vertex(poly)
    A, B, C = poly[ib - 1], poly[ib], poly[(ib + 1) % n]
    side, Q, _ = projection_bound(poly, ib)
    dc1, steps1 = triangle_to_rectangle_acute(dc, A, B, C)
    ring2 = list(poly)
    ring2[ib] = Q
    dc2 = DoubleCover(canonical_polygon(ring2)) if result is None else DoubleCover(tuple(P(p) for p in result))
    if dc2.n != n - 1:
        raise PlanarError("internal: elimination did not remove a vertex")
    # the new triangle is A, Q, C with the C-side (or A-side) vertex absorbed
    _, back = triangle_to_rectangle(dc2, A, Q, C, dc1.polygon)
    return dc2, steps1 + [_inv(s) for s in reversed(back)]


def _inv(s: RefoldStep) -> RefoldStep:
    from .manifold import invert_step

    return invert_step(s)


def _inverse_steps(steps: Sequence[RefoldStep]) -> list[RefoldStep]:
    return [_inv(s) for s in reversed(steps)]


# --- rectangles and squares ----------------------------------------------------------


def is_rectangle(poly: Sequence, eps: float = 1e-9) -> bool:
    ring = list(poly)
    if len(ring) != 4:
        return False
    for i in range(4):
        u = P(ring[(i + 1) % 4]) - P(ring[i])
        v = P(ring[i - 1]) - P(ring[i])
        if abs(geom.dot(u, v)) > eps * geom.norm(u) * geom.norm(v) * 10:
            return False
    return True


def _frame(ring: Sequence) -> tuple[Point2, Point2, Point2, float, float]:
    """Corner, unit directions and side lengths with the long side first."""
    r = [P(p) for p in ring]
    a, b = geom.dist(r[0], r[1]), geom.dist(r[1], r[2])
    if a >= b:
        o, e1, e2 = r[0], (r[1] - r[0]) * (1 / a), (r[3] - r[0]) * (1 / b)
        return o, e1, e2, a, b
    o, e1, e2 = r[1], (r[2] - r[1]) * (1 / b), (r[0] - r[1]) * (1 / a)
    return o, e1, e2, b, a


def rectangle_to_square(dc: DoubleCover) -> tuple[DoubleCover, list[RefoldStep]]:
    """Refold a doubly covered rectangle into the doubly covered square of equal area.

    Halve the long side or the short side by half-turns until the aspect
    ratio lies in [4, 16), then run the triangle constructions: the
    rectangle is the image of a triangle whose side AB has the square's side
    length, and the rectangle built on AB is the square.
    """
    if not is_rectangle(dc.polygon):
        raise PreconditionViolated("not a rectangle")
    steps: list[RefoldStep] = []
    for _ in range(200):
        o, e1, e2, a, b = _frame(dc.polygon)
        if abs(a - b) <= 1e-9 * a:
            return dc, steps

        def R(x, y):
            return o + e1 * x + e2 * y

        if a / b >= 16:
            s = spec(R(a / 2, b), R(a, b), R(a / 2, b), R(0, b), (R(a / 2, 0), R(a / 2, b)),
                     geom.half_turn(R(a / 2, b)), "halve long side")
        elif a / b < 4:
            s = spec(R(a, b / 2), R(a, b), R(a, b / 2), R(a, 0), (R(0, b / 2), R(a, b / 2)),
                     geom.half_turn(R(a, b / 2)), "halve short side")
        else:
            break
        dc, st = rearrange(dc, s)
        steps += st
    else:  # pragma: no cover
        raise PlanarError("aspect normalization did not terminate")
    o, e1, e2, a, b = _frame(dc.polygon)

    def R(x, y):
        return o + e1 * x + e2 * y

    side = math.sqrt(a * b)
    x = math.sqrt(max(0.0, side * side - 4 * b * b))
    A, C, B = R(0, 0), R(a, 0), R(x, 2 * b)
    tri = DoubleCover(canonical_polygon([A, C, B]))
    _, fwd = triangle_to_rectangle_acute(tri, A, B, C, dc.polygon)
    steps += _inverse_steps(fwd)
    sq, st = triangle_to_rectangle(tri, A, C, B)
    return sq, steps + st


def triangle_to_square(dc: DoubleCover) -> tuple[DoubleCover, list[RefoldStep]]:
    """Triangle to rectangle on its longest side, then rectangle to square."""
    r = dc.polygon
    if len(r) != 3:
        raise PreconditionViolated("not a triangle")
    k = max(range(3), key=lambda i: (geom.dist(r[i], r[(i + 1) % 3]), -i))
    A, C, B = r[k], r[(k + 1) % 3], r[(k + 2) % 3]
    rect, steps = triangle_to_rectangle_acute(dc, A, B, C)
    sq, st = rectangle_to_square(rect)
    return sq, steps + st


def to_square(dc: DoubleCover) -> tuple[DoubleCover, list[RefoldStep], list[int]]:
    """Refold a doubly covered convex polygon into a doubly covered square.

    Also returns the step count of each vertex elimination.
    """
    if not dc.is_convex():
        raise NotConvex("polygon is not strictly convex")
    steps: list[RefoldStep] = []
    counts: list[int] = []
    if is_rectangle(dc.polygon):
        sq, st = rectangle_to_square(dc)
        return sq, st, counts
    while dc.n > 3:
        dc, st = eliminate_vertex(dc)
        counts.append(len(st))
        steps += st
    sq, st = triangle_to_square(dc)
    return sq, steps + st, counts


@dataclass
class PlanarPlan:
    plan: Plan
    source: DoubleCover
    target: DoubleCover
    eliminations: list[int]
    target_motion: Isometry2

    @property
    def steps(self) -> list[RefoldStep]:
        return self.plan.steps


def plan_planar(P_: DoubleCover, Q_: DoubleCover, eps: float = 1e-9) -> PlanarPlan:
    """A refolding plan from doubly covered P to a rigid copy of doubly covered Q.

    Both polygons go to the square of their common area; Q's chain is moved
    rigidly so the squares coincide, then inverted and appended.  The final
    manifold is labeled-isomorphic to ``Q_.manifold``.
    """
    if abs(P_.area - Q_.area) > eps * max(1.0, P_.area):
        raise AreaMismatch(f"areas differ: {P_.area} vs {Q_.area}")
    for dc in (P_, Q_):
        if not dc.is_convex():
            raise NotConvex("polygon is not strictly convex")
    shifts = geom.congruent_shifts(Q_.polygon, P_.polygon)
    if shifts:
        return PlanarPlan(Plan(P_.manifold, []), P_, Q_, [], shifts[0][1])
    sp, steps_p, elim_p = to_square(P_)
    sq, steps_q, elim_q = to_square(Q_)
    g = geom.isometry_from_segment_pair(Segment2(sq.polygon[0], sq.polygon[1]),
                                        Segment2(sp.polygon[0], sp.polygon[1]))
    if not all(geom.dist(g(x), y) <= 1e-7 * geom._scale(y) for x, y in zip(sq.polygon, sp.polygon)):
        raise PlanarError("internal: squares are not congruent")
    moved = [conjugate_step(s, g) for s in steps_q]
    # the inverted chain ends on the moved copy of Q; make its first ring exact
    plan = Plan(P_.manifold, steps_p + _inverse_steps(_retarget(moved, sq, sp, g)))
    target = DoubleCover(tuple(g(p) for p in Q_.polygon))
    return PlanarPlan(plan, P_, target, elim_p + elim_q, g)


def _retarget(steps: list[RefoldStep], sq: DoubleCover, sp: DoubleCover, g: Isometry2) -> list[RefoldStep]:
    """Snap the final merge rings of the moved chain onto P's square exactly."""
    if not steps:
        return steps
    last = steps[-1]
    fixed = []
    for m in last.merges:
        ring = tuple(sp.polygon) if m.tag == "top" else tuple(geom.mirror_ring(sp.polygon))
        fixed.append(Merge(m.a, m.b, m.into, m.b_to_a, m.ring_a, m.ring_b, ring, m.tag))
    return steps[:-1] + [RefoldStep(last.unmerges, last.cuts, last.glues, tuple(fixed), last.label)]


def corollary_bound(poly: Sequence) -> tuple[float, float]:
    """min(|Q1B|, |Q2B|) and |AC| at the widest vertex B of a convex polygon."""
    ring = canonical_polygon(poly)
    ib = widest_vertex(ring)
    n = len(ring)
    _, _, d = projection_bound(ring, ib)
    return d, geom.dist(ring[ib - 1], ring[(ib + 1) % n])


def is_planar_double_cover(m: Manifold, eps: float = 1e-7) -> bool:
    """Whether ``m`` is a flat folded double cover: two faces tagged top and
    bottom whose rings mirror each other, glued point-to-point along every edge."""
    if len(m.faces) != 2:
        return False
    top = next((f for f in m.faces if f.tag == "top"), None)
    bot = next((f for f in m.faces if f.tag == "bottom"), None)
    if top is None or bot is None:
        return False
    if not _same_polygon(geom.mirror_ring(top.ring), bot.ring, eps):
        return False
    for g in m.glues:
        if {g.a.face, g.b.face} != {top.id, bot.id}:
            return False
        x, y = (g.a, g.b) if g.a.face == top.id else (g.b, g.a)
        p0, p1 = m.arc_points(x)
        q0, q1 = m.arc_points(y)
        if g.reversed:
            q0, q1 = q1, q0
        if geom.dist(MIRROR_X(p0), q0) > eps * geom._scale(p0) or geom.dist(MIRROR_X(p1), q1) > eps * geom._scale(p1):
            return False
    return True


def flat_placement(m: Manifold, eps: float = 1e-7) -> dict[str, Isometry2] | None:
    """Positions of all faces in one plane such that glued points coincide.

    Across every glue the neighbour is either folded over or laid flat; the
    search tries both and backtracks.  ``None`` when no flat state exists.
    """
    by_face: dict[str, list] = {f.id: [] for f in m.faces}
    for g in m.glues:
        by_face[g.a.face].append(g)
        if g.b.face != g.a.face:
            by_face[g.b.face].append(g.flipped())

    def ends(place, x, rev):
        p, q = m.arc_points(x)
        if rev:
            p, q = q, p
        return place(p), place(q)

    def consistent(pl) -> bool:
        for g in m.glues:
            if g.a.face in pl and g.b.face in pl:
                a0, a1 = ends(pl[g.a.face], g.a, False)
                b0, b1 = ends(pl[g.b.face], g.b, g.reversed)
                if geom.dist(a0, b0) > eps * geom._scale(a0) or geom.dist(a1, b1) > eps * geom._scale(a1):
                    return False
        return True

    first = m.faces[0].id
    order: list[str] = [first]
    seen = {first}
    for fid in order:
        for g in by_face[fid]:
            if g.b.face not in seen:
                seen.add(g.b.face)
                order.append(g.b.face)
    if len(order) != len(m.faces):
        return None

    def options(pl, fid):
        for g in by_face[fid]:
            if g.b.face in pl:
                b0, b1 = ends(pl[g.b.face], g.b, g.reversed)
                p, q = m.arc_points(g.a)
                for improper in (False, True):
                    yield geom.isometry_from_segment_pair(Segment2(p, q), Segment2(b0, b1), improper=improper)
                return

    def search(pl, k):
        if k == len(order):
            return pl
        for iso in options(pl, order[k]):
            pl2 = {**pl, order[k]: iso}
            if consistent(pl2):
                found = search(pl2, k + 1)
                if found is not None:
                    return found
        return None

    return search({first: geom.IDENTITY}, 1)


def _self_creases(m: Manifold, eps: float) -> dict[str, list[tuple[Point2, Point2]]]:
    """Crease lines forced by stretches of a face glued to the same face.

    Such a glue can only lie flat if the face folds along the perpendicular
    bisector of corresponding points; the line is returned as two points.
    """
    out: dict[str, list[tuple[Point2, Point2]]] = {}
    for g in m.glues:
        if g.a.face != g.b.face:
            continue
        a0, a1 = m.arc_points(g.a)
        b0, b1 = m.arc_points(g.b)
        if g.reversed:
            b0, b1 = b1, b0
        x, y = (a0, b0) if geom.dist(a0, b0) > geom.dist(a1, b1) else (a1, b1)
        if geom.dist(x, y) <= eps:
            continue
        mid = geom.midpoint(x, y)
        d = (y[0] - x[0], y[1] - x[1])
        line = (mid, P(mid[0] - d[1], mid[1] + d[0]))
        lst = out.setdefault(g.a.face, [])
        if not any(abs(geom.signed_area2(l[0], l[1], line[0])) <= eps * geom.dist(*l)
                   and abs(geom.signed_area2(l[0], l[1], line[1])) <= eps * geom.dist(*l) for l in lst):
            lst.append(line)
    return out


def _chord(ring: Sequence[Point2], line: tuple[Point2, Point2]) -> list[Point2] | None:
    p, q = line
    d = (q[0] - p[0], q[1] - p[1])
    big = 1e3 * (max(geom.dist(p, r) for r in ring) + 1.0) / max(geom.norm(d), 1e-300)
    seg = shapely.LineString([(p[0] - big * d[0], p[1] - big * d[1]), (p[0] + big * d[0], p[1] + big * d[1])])
    inter = _SPolygon(ring).intersection(seg)
    if inter.geom_type != "LineString" or inter.length <= 1e-9:
        return None
    (x0, y0), (x1, y1) = inter.coords[0], inter.coords[-1]
    return [P(x0, y0), P(x1, y1)]


def is_flat(m: Manifold, eps: float = 1e-7) -> bool:
    """Whether ``m`` folds flat into one plane.

    Faces are rigid except along creases forced by self-glued stretches;
    each such face is split along its crease before searching placements.
    """
    from .manifold import interior_cut

    for fid, lines in _self_creases(m, eps).items():
        todo = [fid]
        for line in lines:
            nxt = []
            for f in todo:
                chord = _chord(m.face(f).ring, line)
                if chord is None:
                    nxt.append(f)
                    continue
                names = (f + "^", f + "_")
                try:
                    _, _, m = interior_cut(m, f, chord, names)
                except ValueError:
                    nxt.append(f)
                    continue
                nxt.extend(names)
            todo = nxt
    return flat_placement(m, eps) is not None
