"""Polyhedral manifolds as faces plus a gluing, and cut/glue refolding steps.

A face is a counterclockwise simple polygon in its own local frame.  A
boundary *arc* is an interval ``[t0, t1]`` of arc length along one edge of one
face.  A :class:`Glue` pairs two equal-length arcs; ``reversed=True`` is the
ordinary orientation-preserving identification (start of one arc meets the
end of the other), ``reversed=False`` a flipped one.

A :class:`RefoldStep` is applied in phases::

    unmerges -> cuts -> (connectivity check) -> glues -> merges

``Unmerge``/``Merge`` only re-represent the same surface (split a face into
two faces that stay glued along a seam, or fuse two faces glued along a
seam).  An interior cut of a face is therefore an ``Unmerge`` followed by a
cut of the new seam; see :func:`interior_cut`.  Every phase has an exact
inverse, which is what :func:`invert_step` relies on.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

from . import geom
from .geom import IDENTITY, EPS, Isometry2, Point2, P

TOL = 1e-7
SCHEMA_MANIFOLD = "refold.manifold/1"
SCHEMA_STEP = "refold.step/1"


class StepError(ValueError):
    code = "StepError"


class CutDisconnects(StepError):
    code = "CutDisconnects"


class GlueLengthMismatch(StepError):
    code = "GlueLengthMismatch"


class GlueTargetNotFree(StepError):
    code = "GlueTargetNotFree"


class CutTargetNotGlued(StepError):
    code = "CutTargetNotGlued"


class FaceMismatch(StepError):
    code = "FaceMismatch"


# --- value types --------------------------------------------------------------


@dataclass(frozen=True)
class Face:
    id: str
    ring: tuple[Point2, ...]
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ring", tuple(P(p) for p in self.ring))

    @property
    def n(self) -> int:
        return len(self.ring)

    def edge(self, i: int) -> tuple[Point2, Point2]:
        return self.ring[i % self.n], self.ring[(i + 1) % self.n]

    def edge_length(self, i: int) -> float:
        a, b = self.edge(i)
        return geom.dist(a, b)

    def point(self, i: int, t: float) -> Point2:
        a, b = self.edge(i)
        L = geom.dist(a, b)
        return geom.lerp(a, b, t / L)

    @property
    def area(self) -> float:
        return geom.signed_area(self.ring)

    @property
    def perimeter(self) -> float:
        return geom.perimeter(self.ring)


@dataclass(frozen=True, order=True)
class Arc:
    face: str
    edge: int
    t0: float
    t1: float

    @property
    def length(self) -> float:
        return self.t1 - self.t0

    def key(self):
        return (self.face, self.edge, round(self.t0, 6))


@dataclass(frozen=True)
class Glue:
    a: Arc
    b: Arc
    reversed: bool = True

    def canonical(self) -> "Glue":
        if self.b.key() < self.a.key():
            return Glue(self.b, self.a, self.reversed)
        return self

    def partner_interval(self, side: Arc, other: Arc, u0: float, u1: float) -> tuple[float, float]:
        """Sub-interval of ``other`` matched to ``[u0, u1]`` of ``side``."""
        if self.reversed:
            return other.t1 - (u1 - side.t0), other.t1 - (u0 - side.t0)
        return other.t0 + (u0 - side.t0), other.t0 + (u1 - side.t0)

    def sub(self, u0: float, u1: float) -> "Glue":
        s0, s1 = self.partner_interval(self.a, self.b, u0, u1)
        return Glue(replace(self.a, t0=u0, t1=u1), replace(self.b, t0=s0, t1=s1), self.reversed)

    def flipped(self) -> "Glue":
        return Glue(self.b, self.a, self.reversed)

    def matches(self, other: "Glue", tol: float = TOL) -> bool:
        for o in (other, other.flipped()):
            if o.reversed == self.reversed and _arc_eq(self.a, o.a, tol) and _arc_eq(self.b, o.b, tol):
                return True
        return False


def _arc_eq(x: Arc, y: Arc, tol: float = TOL) -> bool:
    return x.face == y.face and x.edge == y.edge and abs(x.t0 - y.t0) <= tol and abs(x.t1 - y.t1) <= tol


@dataclass(frozen=True)
class Manifold:
    faces: tuple[Face, ...]
    glues: tuple[Glue, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "_index", {f.id: f for f in self.faces})

    def face(self, fid: str) -> Face:
        return self._index[fid]  # type: ignore[attr-defined]

    def has_face(self, fid: str) -> bool:
        return fid in self._index  # type: ignore[attr-defined]

    @property
    def face_ids(self) -> list[str]:
        return [f.id for f in self.faces]

    @property
    def area(self) -> float:
        return sum(f.area for f in self.faces)

    def arc_points(self, arc: Arc) -> tuple[Point2, Point2]:
        f = self.face(arc.face)
        return f.point(arc.edge, arc.t0), f.point(arc.edge, arc.t1)

    def glued_intervals(self, fid: str, edge: int) -> list[tuple[float, float]]:
        out = []
        for g in self.glues:
            for x in (g.a, g.b):
                if x.face == fid and x.edge == edge:
                    out.append((x.t0, x.t1))
        return sorted(out)

    def free_arcs(self) -> list[Arc]:
        out = []
        for f in self.faces:
            for e in range(f.n):
                L = f.edge_length(e)
                t = 0.0
                for a, b in self.glued_intervals(f.id, e):
                    if a - t > TOL:
                        out.append(Arc(f.id, e, t, a))
                    t = max(t, b)
                if L - t > TOL:
                    out.append(Arc(f.id, e, t, L))
        return out

    @property
    def boundary_length(self) -> float:
        return sum(a.length for a in self.free_arcs())

    def glue_map(self, g: Glue) -> Isometry2:
        """Isometry taking ``g.b``'s face frame to ``g.a``'s face frame along the glue."""
        pa, qa = self.arc_points(g.a)
        pb, qb = self.arc_points(g.b)
        if g.reversed:
            pb, qb = qb, pb
        improper = not g.reversed
        return geom.isometry_from_segment_pair(geom.Segment2(pb, qb), geom.Segment2(pa, qa), improper=improper)

    def with_faces(self, faces: Iterable[Face], glues: Iterable[Glue]) -> "Manifold":
        return Manifold(tuple(faces), normalize_glues(glues))


def make_manifold(faces: Iterable[Face], glues: Iterable[Glue] = ()) -> Manifold:
    return Manifold(tuple(faces), normalize_glues(glues))


# --- gluing normal form -----------------------------------------------------------


def normalize_glues(glues: Iterable[Glue]) -> tuple[Glue, ...]:
    """Fuse contiguous pairs into maximal arcs and sort canonically."""
    gs = [g for g in glues if g.a.length > TOL]
    while True:
        by_edge: dict[tuple[str, int], list[tuple[Arc, int, int]]] = defaultdict(list)
        for gi, g in enumerate(gs):
            by_edge[(g.a.face, g.a.edge)].append((g.a, gi, 0))
            by_edge[(g.b.face, g.b.edge)].append((g.b, gi, 1))
        used: set[int] = set()
        merged: list[Glue] = []
        for arcs in by_edge.values():
            arcs.sort(key=lambda r: r[0].t0)
            for (x, gi, si), (y, hi, ti) in itertools.pairwise(arcs):
                if gi == hi or gi in used or hi in used or abs(x.t1 - y.t0) > TOL:
                    continue
                g = gs[gi] if si == 0 else gs[gi].flipped()
                h = gs[hi] if ti == 0 else gs[hi].flipped()
                if g.reversed != h.reversed:
                    continue
                xp, yp = g.b, h.b
                if xp.face != yp.face or xp.edge != yp.edge:
                    continue
                if g.reversed and abs(yp.t1 - xp.t0) <= TOL:
                    nb = Arc(xp.face, xp.edge, yp.t0, xp.t1)
                elif not g.reversed and abs(xp.t1 - yp.t0) <= TOL:
                    nb = Arc(xp.face, xp.edge, xp.t0, yp.t1)
                else:
                    continue
                merged.append(Glue(Arc(x.face, x.edge, x.t0, y.t1), nb, g.reversed))
                used.update((gi, hi))
        if not merged:
            break
        gs = [g for k, g in enumerate(gs) if k not in used] + merged
    return tuple(sorted((g.canonical() for g in gs), key=lambda g: (g.a.key(), g.b.key())))


# --- connectivity and validation ------------------------------------------------


def components(m: Manifold) -> list[set[str]]:
    parent = {f: f for f in m.face_ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in m.glues:
        ra, rb = find(g.a.face), find(g.b.face)
        if ra != rb:
            parent[ra] = rb
    groups: dict[str, set[str]] = defaultdict(set)
    for f in m.face_ids:
        groups[find(f)].add(f)
    return list(groups.values())


def is_connected(m: Manifold) -> bool:
    return len(m.faces) > 0 and len(components(m)) == 1


@dataclass
class ValidationReport:
    connected: bool
    area: float
    boundary_length: float
    closed: bool
    n_faces: int
    n_glues: int
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.connected and not self.problems and self.area > 0

    def to_json(self) -> dict:
        return {
            "connected": self.connected,
            "area": self.area,
            "boundary_length": self.boundary_length,
            "closed": self.closed,
            "faces": self.n_faces,
            "glues": self.n_glues,
            "problems": list(self.problems),
            "ok": self.ok,
        }


def validate(m: Manifold, eps: float = EPS) -> ValidationReport:
    """Diagnose ``m``; never raises on bad input."""
    problems = []
    for f in m.faces:
        if f.n < 3 or f.area <= eps:
            problems.append(f"face {f.id}: not positively oriented or degenerate")
        elif not geom.is_simple(f.ring):
            problems.append(f"face {f.id}: not simple")
    occupied: dict[tuple[str, int], list[tuple[float, float]]] = defaultdict(list)
    for g in m.glues:
        if abs(g.a.length - g.b.length) > TOL:
            problems.append(f"glue {g.a}~{g.b}: lengths differ")
        for x in (g.a, g.b):
            if not m.has_face(x.face):
                problems.append(f"glue references missing face {x.face}")
                continue
            f = m.face(x.face)
            if not (0 <= x.edge < f.n) or x.t0 < -TOL or x.t1 > f.edge_length(x.edge) + TOL:
                problems.append(f"arc {x} outside its edge")
            occupied[(x.face, x.edge)].append((x.t0, x.t1))
    for key, ivs in occupied.items():
        ivs.sort()
        for (a0, a1), (b0, b1) in itertools.pairwise(ivs):
            if b0 < a1 - TOL:
                problems.append(f"overlapping arcs on {key}")
    bl = m.boundary_length if not problems else float("nan")
    return ValidationReport(
        connected=is_connected(m),
        area=m.area,
        boundary_length=bl,
        closed=bool(bl == bl and bl <= TOL * max(1, len(m.faces))),
        n_faces=len(m.faces),
        n_glues=len(m.glues),
        problems=problems,
    )


# --- re-meshing: relocate arcs onto new rings ------------------------------------


def _locate(p: Point2, q: Point2, targets: Sequence[tuple[str, Sequence[Point2]]],
            check: bool = True) -> list[tuple[float, float, Arc]]:
    """Cover segment ``p -> q`` by edge pieces of the target rings.

    Returns ``(s0, s1, arc)`` with ``s`` the arc length from ``p``.
    """
    L = geom.dist(p, q)
    d = ((q[0] - p[0]) / L, (q[1] - p[1]) / L)
    scale = geom._scale(p, q)
    pieces = []
    for fid, ring in targets:
        n = len(ring)
        for e in range(n):
            a, b = ring[e], ring[(e + 1) % n]
            el = geom.dist(a, b)
            ed = ((b[0] - a[0]) / el, (b[1] - a[1]) / el)
            if geom.dot(d, ed) < 1 - 1e-9:
                continue
            # both endpoints of pq must sit on the edge's supporting line
            if abs(geom.cross(ed, (p[0] - a[0], p[1] - a[1]))) > TOL * scale:
                continue
            tp = geom.dot(ed, (p[0] - a[0], p[1] - a[1]))
            lo, hi = max(0.0, tp), min(el, tp + L)
            if hi - lo > TOL:
                pieces.append((lo - tp, hi - tp, Arc(fid, e, lo, hi)))
    pieces.sort(key=lambda r: r[0])
    if not check:
        return pieces
    slack = min(TOL * 10, L / 4)  # short segments must still be found
    covered = 0.0
    for s0, s1, _ in pieces:
        if s0 > covered + slack:
            break
        covered = max(covered, s1)
    if covered < L - slack:
        raise FaceMismatch(f"segment {p}->{q} not on target boundary")
    return pieces


Locator = Callable[[Arc], list[tuple[float, float, Arc]]]


def _remap_glues(m: Manifold, glues: Iterable[Glue], locators: dict[str, Locator]) -> list[Glue]:
    out = []
    for g in glues:
        la, lb = locators.get(g.a.face), locators.get(g.b.face)
        if la is None and lb is None:
            out.append(g)
            continue
        pa = la(g.a) if la else [(0.0, g.a.length, g.a)]
        pb = lb(g.b) if lb else [(0.0, g.b.length, g.b)]
        Lg = g.a.length
        cuts = {0.0, Lg}
        for s0, s1, _ in pa:
            cuts.update((s0, s1))
        for s0, s1, _ in pb:
            for s in (s0, s1):
                cuts.add(Lg - s if g.reversed else s)
        pts = sorted(c for c in cuts if -TOL <= c <= Lg + TOL)
        uniq = [pts[0]]
        for c in pts[1:]:
            if c - uniq[-1] > TOL:
                uniq.append(c)
        uniq[-1] = Lg
        for u0, u1 in itertools.pairwise(uniq):
            sub = g.sub(g.a.t0 + u0, g.a.t0 + u1)
            na = _pick(pa, u0, u1)
            v0, v1 = (Lg - u1, Lg - u0) if g.reversed else (u0, u1)
            nb = _pick(pb, v0, v1)
            out.append(Glue(na, nb, sub.reversed))
    return out


def _pick(pieces, u0: float, u1: float) -> Arc:
    mid = (u0 + u1) / 2
    for s0, s1, arc in pieces:
        if s0 - TOL <= mid <= s1 + TOL:
            return Arc(arc.face, arc.edge, arc.t0 + (u0 - s0), arc.t0 + (u1 - s0))
    raise FaceMismatch("arc piece not located")


def _locator(m: Manifold, fid: str, targets: Sequence[tuple[str, Sequence[Point2], Isometry2]]) -> Locator:
    f = m.face(fid)

    def locate(arc: Arc):
        p, q = f.point(arc.edge, arc.t0), f.point(arc.edge, arc.t1)
        out = []
        tg = [(tid, ring) for tid, ring, _ in targets]
        frames = {tid: g for tid, _, g in targets}
        # each target ring lives in its own frame; map p, q into it
        for tid, ring in tg:
            g = frames[tid]
            out.extend(_locate(g(p), g(q), [(tid, ring)], check=False))
        out.sort(key=lambda r: r[0])
        covered = 0.0
        for s0, s1, _ in out:
            if s0 > covered + TOL * 10:
                break
            covered = max(covered, s1)
        if covered < arc.length - TOL * 10:
            raise FaceMismatch(f"arc {arc} does not lie on the new boundary")
        return out

    return locate


def shared_boundary(ring_a: Sequence[Point2], ring_b: Sequence[Point2]) -> list[tuple[int, float, float, int, float, float]]:
    """Overlapping, oppositely directed edge pieces of two rings in one frame.

    Returns ``(edge_a, t0, t1, edge_b, s0, s1)``; ``t`` runs along ``ring_a``'s edge,
    ``s`` along ``ring_b``'s, and the pieces meet reversed.
    """
    out = []
    na, nb = len(ring_a), len(ring_b)
    for i in range(na):
        a, b = ring_a[i], ring_a[(i + 1) % na]
        la = geom.dist(a, b)
        da = ((b[0] - a[0]) / la, (b[1] - a[1]) / la)
        for j in range(nb):
            c, d = ring_b[j], ring_b[(j + 1) % nb]
            lb = geom.dist(c, d)
            db = ((d[0] - c[0]) / lb, (d[1] - c[1]) / lb)
            if geom.dot(da, db) > -1 + 1e-9:
                continue
            if abs(geom.cross(da, (c[0] - a[0], c[1] - a[1]))) > TOL * geom._scale(a, c):
                continue
            tc = geom.dot(da, (c[0] - a[0], c[1] - a[1]))
            td = tc - lb
            lo, hi = max(0.0, td), min(la, tc)
            if hi - lo > TOL:
                out.append((i, lo, hi, j, tc - hi, tc - lo))
    return out


# --- step records ------------------------------------------------------------------


@dataclass(frozen=True)
class Unmerge:
    """Split ``face`` into ``a`` (same frame) and ``b`` (frame ``b_frame``), still glued."""

    face: str
    a: str
    b: str
    ring: tuple[Point2, ...]
    ring_a: tuple[Point2, ...]
    ring_b: tuple[Point2, ...]
    b_frame: Isometry2 = IDENTITY
    tag: str = ""


@dataclass(frozen=True)
class Merge:
    """Fuse ``b`` into ``a`` along their full glued seam; ``b_to_a`` maps b's frame to a's."""

    a: str
    b: str
    into: str
    b_to_a: Isometry2
    ring_a: tuple[Point2, ...]
    ring_b: tuple[Point2, ...]
    ring: tuple[Point2, ...]
    tag: str = ""


@dataclass(frozen=True)
class RefoldStep:
    unmerges: tuple[Unmerge, ...] = ()
    cuts: tuple[Glue, ...] = ()
    glues: tuple[Glue, ...] = ()
    merges: tuple[Merge, ...] = ()
    label: str = ""

    @property
    def is_empty(self) -> bool:
        return not (self.unmerges or self.cuts or self.glues or self.merges)

    @property
    def cut_length(self) -> float:
        return sum(g.a.length for g in self.cuts)

    @property
    def glue_length(self) -> float:
        return sum(g.a.length for g in self.glues)


def _ring_eq(r1: Sequence, r2: Sequence, tol: float = 1e-7) -> bool:
    return len(r1) == len(r2) and all(geom.dist(p, q) <= tol * geom._scale(p, q) for p, q in zip(r1, r2))


def apply_unmerge(m: Manifold, u: Unmerge) -> Manifold:
    if not m.has_face(u.face):
        raise FaceMismatch(f"no face {u.face}")
    f = m.face(u.face)
    if not _ring_eq(f.ring, u.ring):
        raise FaceMismatch(f"face {u.face} does not match the recorded ring")
    if not u.b_frame.proper:
        raise FaceMismatch("unmerge frame must be a proper motion")
    if u.a != u.face and m.has_face(u.a) or m.has_face(u.b) and u.b != u.face:
        raise FaceMismatch("unmerge target id already in use")
    back = u.b_frame.inverse()
    ring_b_here = [back(p) for p in u.ring_b]
    area_ok = abs(geom.signed_area(u.ring_a) + geom.signed_area(u.ring_b) - f.area) <= 1e-7 * max(1, f.area)
    seam = shared_boundary(u.ring_a, ring_b_here)
    seam_len = sum(t1 - t0 for _, t0, t1, _, _, _ in seam)
    per_ok = abs(geom.perimeter(u.ring_a) + geom.perimeter(u.ring_b) - 2 * seam_len - f.perimeter) <= 1e-6 * max(1, f.perimeter)
    if not (area_ok and per_ok) or geom.signed_area(u.ring_a) <= 0 or geom.signed_area(u.ring_b) <= 0:
        raise FaceMismatch(f"unmerge pieces do not tile face {u.face}")
    tag = u.tag or f.tag
    fa, fb = Face(u.a, u.ring_a, tag), Face(u.b, u.ring_b, tag)
    loc = _locator(m, u.face, [(u.a, u.ring_a, IDENTITY), (u.b, u.ring_b, u.b_frame)])
    glues = _remap_glues(m, m.glues, {u.face: loc})
    for i, t0, t1, j, s0, s1 in seam:
        glues.append(Glue(Arc(u.a, i, t0, t1), Arc(u.b, j, s0, s1), True))
    faces = [x for x in m.faces if x.id != u.face] + [fa, fb]
    return m.with_faces(faces, glues)


def apply_merge(m: Manifold, mg: Merge) -> Manifold:
    for fid, ring in ((mg.a, mg.ring_a), (mg.b, mg.ring_b)):
        if not m.has_face(fid) or not _ring_eq(m.face(fid).ring, ring):
            raise FaceMismatch(f"merge input {fid} does not match the recorded ring")
    if mg.a == mg.b or not mg.b_to_a.proper:
        raise FaceMismatch("bad merge record")
    fa, fb = m.face(mg.a), m.face(mg.b)
    rb = [mg.b_to_a(p) for p in fb.ring]
    seam = shared_boundary(fa.ring, rb)
    if not seam:
        raise FaceMismatch(f"{mg.a} and {mg.b} share no seam")
    seam_len = sum(t1 - t0 for _, t0, t1, _, _, _ in seam)
    if abs(geom.signed_area(mg.ring) - fa.area - fb.area) > 1e-7 * max(1, fa.area + fb.area):
        raise FaceMismatch("merged ring area mismatch")
    if abs(geom.perimeter(mg.ring) - fa.perimeter - fb.perimeter + 2 * seam_len) > 1e-6 * max(1, fa.perimeter):
        raise FaceMismatch("merged ring perimeter mismatch")
    glues = list(m.glues)
    for i, t0, t1, j, s0, s1 in seam:
        want = Glue(Arc(mg.a, i, t0, t1), Arc(mg.b, j, s0, s1), True)
        glues = _remove_subglue(glues, want, strict=True)
    tag = mg.tag or fa.tag
    loc_a = _locator(m, mg.a, [(mg.into, mg.ring, IDENTITY)])
    loc_b = _locator(m, mg.b, [(mg.into, mg.ring, mg.b_to_a)])
    glues = _remap_glues(m, glues, {mg.a: loc_a, mg.b: loc_b})
    faces = [x for x in m.faces if x.id not in (mg.a, mg.b)] + [Face(mg.into, mg.ring, tag)]
    if mg.into not in (mg.a, mg.b) and m.has_face(mg.into):
        raise FaceMismatch("merge target id already in use")
    return m.with_faces(faces, glues)


def _remove_subglue(glues: list[Glue], want: Glue, strict: bool = True) -> list[Glue]:
    """Remove the sub-pair ``want`` from whichever glue contains it."""
    for k, g in enumerate(glues):
        for gg in (g, g.flipped()):
            x = gg.a
            if x.face != want.a.face or x.edge != want.a.edge:
                continue
            if want.a.t0 < x.t0 - TOL or want.a.t1 > x.t1 + TOL:
                continue
            if gg.reversed != want.reversed:
                continue
            sub = gg.sub(max(want.a.t0, x.t0), min(want.a.t1, x.t1))
            if not _arc_eq(sub.b, want.b, 1e-6):
                continue
            rest = [h for i, h in enumerate(glues) if i != k]
            if want.a.t0 - x.t0 > TOL:
                rest.append(gg.sub(x.t0, want.a.t0))
            if x.t1 - want.a.t1 > TOL:
                rest.append(gg.sub(want.a.t1, x.t1))
            return rest
    raise CutTargetNotGlued(f"{want.a} ~ {want.b} is not a glued pair")


def _check_free(m: Manifold, glues: Sequence[Glue], new: Sequence[Glue]) -> None:
    occ: dict[tuple[str, int], list[tuple[float, float]]] = defaultdict(list)
    for g in glues:
        for x in (g.a, g.b):
            occ[(x.face, x.edge)].append((x.t0, x.t1))
    for g in new:
        if abs(g.a.length - g.b.length) > TOL * 10:
            raise GlueLengthMismatch(f"{g.a} vs {g.b}")
        for x in (g.a, g.b):
            if not m.has_face(x.face):
                raise GlueTargetNotFree(f"no face {x.face}")
            f = m.face(x.face)
            if not (0 <= x.edge < f.n) or x.t0 < -TOL or x.t1 > f.edge_length(x.edge) + TOL or x.length <= TOL:
                raise GlueTargetNotFree(f"{x} lies outside its edge")
            for a, b in occ[(x.face, x.edge)]:
                if min(b, x.t1) - max(a, x.t0) > TOL:
                    raise GlueTargetNotFree(f"{x} is already glued")
            occ[(x.face, x.edge)].append((x.t0, x.t1))


def apply_cuts(m: Manifold, step: RefoldStep) -> Manifold:
    """Run the unmerge and cut phases only (no connectivity check)."""
    for u in step.unmerges:
        m = apply_unmerge(m, u)
    return Manifold(m.faces, normalize_glues(_remove_many(list(m.glues), step.cuts)))


def _remove_many(glues: list[Glue], cuts: Sequence[Glue]) -> list[Glue]:
    """:func:`_remove_subglue` for many cuts, with glues indexed by edge."""
    alive: dict[int, Glue] = dict(enumerate(glues))
    index: dict[tuple[str, int], set[int]] = defaultdict(set)
    nxt = len(glues)

    def add(g: Glue) -> None:
        nonlocal nxt
        alive[nxt] = g
        index[(g.a.face, g.a.edge)].add(nxt)
        index[(g.b.face, g.b.edge)].add(nxt)
        nxt += 1

    for i, g in list(alive.items()):
        index[(g.a.face, g.a.edge)].add(i)
        index[(g.b.face, g.b.edge)].add(i)
    for c in cuts:
        ids = sorted(index.get((c.a.face, c.a.edge), ()))
        rest = _remove_subglue([alive[i] for i in ids], c)
        for i in ids:
            g = alive.pop(i)
            index[(g.a.face, g.a.edge)].discard(i)
            index[(g.b.face, g.b.edge)].discard(i)
        for g in rest:
            add(g)
    return list(alive.values())


def apply_step(m: Manifold, step: RefoldStep) -> Manifold:
    """Apply one cut-then-glue step; ``m`` itself is never modified."""
    cut = apply_cuts(m, step)
    if not is_connected(cut):
        raise CutDisconnects(f"cutting splits the surface into {len(components(cut))} pieces")
    _check_free(cut, cut.glues, step.glues)
    out = cut.with_faces(cut.faces, list(cut.glues) + list(step.glues))
    for mg in step.merges:
        out = apply_merge(out, mg)
    return out


def invert_step(step: RefoldStep) -> RefoldStep:
    unmerges = tuple(
        Unmerge(mg.into, mg.a, mg.b, mg.ring, mg.ring_a, mg.ring_b, mg.b_to_a.inverse(), mg.tag)
        for mg in reversed(step.merges)
    )
    merges = tuple(
        Merge(u.a, u.b, u.face, u.b_frame.inverse(), u.ring_a, u.ring_b, u.ring, u.tag)
        for u in reversed(step.unmerges)
    )
    label = f"inverse({step.label})" if step.label else ""
    return RefoldStep(unmerges, tuple(step.glues), tuple(step.cuts), merges, label)


def replay(m: Manifold, steps: Iterable[RefoldStep]) -> Manifold:
    for s in steps:
        m = apply_step(m, s)
    return m


# --- building interior cuts ----------------------------------------------------------


def _insert_point(ring: list[Point2], p: Point2) -> int:
    for i, q in enumerate(ring):
        if geom.close(p, q, 1e-8):
            return i
    n = len(ring)
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        if geom.seg_distance(p, a, b) <= 1e-8 * geom._scale(a, b):
            ring.insert(i + 1, P(p))
            return i + 1
    raise geom.GeometryError(f"{p} is not on the face boundary")


def split_ring(ring: Sequence[Point2], polyline: Sequence) -> tuple[list[Point2], list[Point2]]:
    """Split a ring by a polyline whose two ends lie on its boundary.

    The first returned ring is bounded by the boundary walk from the polyline's
    start to its end; the second by the walk from end to start.
    """
    pts = [P(p) for p in polyline]
    w = [P(p) for p in ring]
    s = _insert_point(w, pts[0])
    e = _insert_point(w, pts[-1])
    s = next(i for i, q in enumerate(w) if geom.close(q, pts[0], 1e-8))
    n = len(w)
    inner = pts[1:-1]
    first = [w[(s + k) % n] for k in range((e - s) % n + 1)] + inner[::-1]
    second = [w[(e + k) % n] for k in range((s - e) % n + 1)] + inner
    for r in (first, second):
        if geom.signed_area(r) <= 0 or not geom.is_simple(r):
            raise geom.GeometryError("polyline does not split the face into two simple pieces")
    return first, second


def interior_cut(m: Manifold, face: str, polyline: Sequence, names: tuple[str, str],
                 frames: tuple[Isometry2, Isometry2] = (IDENTITY, IDENTITY)) -> tuple[Unmerge, list[Glue], Manifold]:
    """Records for cutting ``face`` along ``polyline``.

    ``names[0]`` is the piece bounded by the boundary walk from the polyline's
    start to its end.  Returns the unmerge, the seam cuts, and the unmerged
    (still glued) manifold so callers can locate arcs on the new faces.
    """
    f = m.face(face)
    r1, r2 = split_ring(f.ring, polyline)
    if frames[0] != IDENTITY:
        raise ValueError("first piece keeps the face frame")
    g2 = frames[1]
    u = Unmerge(face, names[0], names[1], f.ring, tuple(r1), tuple(g2(p) for p in r2), g2)
    mu = apply_unmerge(m, u)
    seam = [g for g in mu.glues if {g.a.face, g.b.face} == {names[0], names[1]}
            and _on_polyline(mu, g.a if g.a.face == names[0] else g.b, polyline)]
    return u, seam, mu


def _on_polyline(m: Manifold, arc: Arc, polyline: Sequence) -> bool:
    p, q = m.arc_points(arc)
    mid = geom.midpoint(p, q)
    pts = [P(x) for x in polyline]
    return any(geom.seg_distance(mid, a, b) <= 1e-7 * geom._scale(a, b) for a, b in itertools.pairwise(pts))


def locate_arc(m: Manifold, face: str, p, q) -> list[Arc]:
    """Arcs (one per edge) covering the boundary segment ``p -> q`` of ``face``."""
    f = m.face(face)
    return [arc for _, _, arc in _locate(P(p), P(q), [(face, f.ring)])]


def _segment_pieces(m: Manifold, fid: str, p, q) -> list[tuple[float, float, Arc, bool]]:
    """Pieces of boundary segment ``p -> q`` with ``u`` measured from ``p``.

    The flag says whether the arc parameter grows with ``u``.
    """
    ring = [(fid, m.face(fid).ring)]
    try:
        return [(s0, s1, arc, True) for s0, s1, arc in _locate(P(p), P(q), ring)]
    except FaceMismatch:
        L = geom.dist(p, q)
        return [(L - s1, L - s0, arc, False) for s0, s1, arc in _locate(P(q), P(p), ring)][::-1]


def _sub_piece(pieces, u0: float, u1: float) -> tuple[Arc, bool]:
    mid = (u0 + u1) / 2
    for a0, a1, arc, fwd in pieces:
        if a0 - TOL <= mid <= a1 + TOL:
            if fwd:
                return Arc(arc.face, arc.edge, arc.t0 + (u0 - a0), arc.t0 + (u1 - a0)), True
            return Arc(arc.face, arc.edge, arc.t1 - (u1 - a0), arc.t1 - (u0 - a0)), False
    raise FaceMismatch("arc piece not located")


def glue_segments(m: Manifold, fa: str, pa, qa, fb: str, pb, qb) -> list[Glue]:
    """Glue records identifying segment ``pa->qa`` on ``fa`` with ``pb->qb`` on ``fb``.

    Points are in each face's own frame; ``pa`` meets ``pb``.
    """
    L = geom.dist(pa, qa)
    A = _segment_pieces(m, fa, pa, qa)
    B = _segment_pieces(m, fb, pb, qb)
    cuts = sorted({0.0, L, *[s for r in A for s in r[:2]], *[s for r in B for s in r[:2]]})
    uniq = [cuts[0]]
    for c in cuts[1:]:
        if c - uniq[-1] > TOL:
            uniq.append(c)
    uniq[-1] = L
    out = []
    for u0, u1 in itertools.pairwise(uniq):
        xa, fwa = _sub_piece(A, u0, u1)
        xb, fwb = _sub_piece(B, u0, u1)
        out.append(Glue(xa, xb, fwa != fwb))
    return out


# --- isomorphism ---------------------------------------------------------------------


def _glue_index(m: Manifold):
    idx: dict[tuple[str, int], list[tuple[Arc, Glue]]] = defaultdict(list)
    for g in m.glues:
        idx[(g.a.face, g.a.edge)].append((g.a, g))
        idx[(g.b.face, g.b.edge)].append((g.b, g.flipped()))
    return idx


def _find_isomorphism(m1: Manifold, m2: Manifold, labeled: bool, tol: float = 1e-6):
    if len(m1.faces) != len(m2.faces) or len(m1.glues) != len(m2.glues):
        return None
    shifts: dict[tuple[str, str], dict[int, None]] = {}

    def cand(f1: Face, f2: Face):
        key = (f1.id, f2.id)
        if key not in shifts:
            ok = f1.tag == f2.tag and f1.n == f2.n and abs(f1.area - f2.area) <= tol * max(1, f1.area)
            shifts[key] = {k: None for k, _ in geom.congruent_shifts(f1.ring, f2.ring, tol)} if ok else {}
        return shifts[key]

    idx2 = _glue_index(m2)
    by_face1: dict[str, list[Glue]] = defaultdict(list)
    for (fid, _), lst in _glue_index(m1).items():
        by_face1[fid].extend(g for _, g in lst)
    first = m1.faces[0]
    seeds = [m2.face(first.id)] if labeled else list(m2.faces)
    if labeled and not all(m2.has_face(f.id) for f in m1.faces):
        return None
    for g0 in seeds:
        for k0 in cand(first, g0):
            fmap = {first.id: (g0.id, k0)}
            used = {g0.id}
            queue = [first.id]
            ok = True
            while queue and ok:
                fid = queue.pop()
                f2id, k = fmap[fid]
                n = m1.face(fid).n
                for gg in by_face1[fid]:
                    if True:
                        e2 = (gg.a.edge + k) % n
                        match = None
                        for x, h in idx2.get((f2id, e2), []):
                            if abs(x.t0 - gg.a.t0) <= tol and abs(x.t1 - gg.a.t1) <= tol and h.reversed == gg.reversed:
                                match = h
                                break
                        if match is None:
                            ok = False
                            break
                        other = gg.b.face
                        o2 = match.b.face
                        nb = m1.face(other).n
                        kb = (match.b.edge - gg.b.edge) % nb
                        if abs(match.b.t0 - gg.b.t0) > tol or abs(match.b.t1 - gg.b.t1) > tol:
                            ok = False
                            break
                        if other in fmap:
                            if fmap[other] != (o2, kb):
                                ok = False
                                break
                        else:
                            if o2 in used or (labeled and o2 != other) or kb not in cand(m1.face(other), m2.face(o2)):
                                ok = False
                                break
                            fmap[other] = (o2, kb)
                            used.add(o2)
                            queue.append(other)
                    if not ok:
                        break
            if not ok:
                continue
            # faces unreachable through glues (disconnected input) are matched greedily
            for f in m1.faces:
                if f.id in fmap:
                    continue
                opts = [m2.face(f.id)] if labeled else [x for x in m2.faces if x.id not in used]
                hit = next(((x.id, k) for x in opts for k in cand(f, x)), None)
                if hit is None:
                    ok = False
                    break
                fmap[f.id] = hit
                used.add(hit[0])
            if ok:
                return fmap
    return None


def labeled_isomorphic(m1: Manifold, m2: Manifold, tol: float = 1e-6) -> bool:
    """Same face ids, congruent faces, identical gluing up to per-face rotation of indices."""
    if sorted(m1.face_ids) != sorted(m2.face_ids):
        return False
    return _find_isomorphism(m1, m2, labeled=True, tol=tol) is not None


def isomorphic(m1: Manifold, m2: Manifold, tol: float = 1e-6) -> dict | None:
    """Face correspondence ``{id1: (id2, edge_shift)}`` or ``None``."""
    return _find_isomorphism(m1, m2, labeled=False, tol=tol)


def relabel(m: Manifold, mapping: dict[str, str]) -> Manifold:
    faces = [Face(mapping.get(f.id, f.id), f.ring, f.tag) for f in m.faces]
    glues = [Glue(replace(g.a, face=mapping.get(g.a.face, g.a.face)), replace(g.b, face=mapping.get(g.b.face, g.b.face)), g.reversed) for g in m.glues]
    return make_manifold(faces, glues)


def rotate_face(m: Manifold, fid: str, k: int) -> Manifold:
    """Re-index ``fid``'s ring to start at its old vertex ``k``."""
    f = m.face(fid)
    n = f.n
    ring = f.ring[k % n:] + f.ring[:k % n]

    def fix(x: Arc) -> Arc:
        return replace(x, edge=(x.edge - k) % n) if x.face == fid else x

    glues = [Glue(fix(g.a), fix(g.b), g.reversed) for g in m.glues]
    faces = [Face(fid, ring, f.tag) if x.id == fid else x for x in m.faces]
    return make_manifold(faces, glues)


# --- JSON ---------------------------------------------------------------------------


def _ring_json(ring) -> list[list[float]]:
    return [[float(p[0]), float(p[1])] for p in ring]


def glue_to_json(g: Glue) -> dict:
    return {
        "faceA": g.a.face, "edgeA": g.a.edge, "tA": [g.a.t0, g.a.t1],
        "faceB": g.b.face, "edgeB": g.b.edge, "tB": [g.b.t0, g.b.t1],
        "reversed": g.reversed,
    }


def glue_from_json(d: dict) -> Glue:
    return Glue(
        Arc(str(d["faceA"]), int(d["edgeA"]), float(d["tA"][0]), float(d["tA"][1])),
        Arc(str(d["faceB"]), int(d["edgeB"]), float(d["tB"][0]), float(d["tB"][1])),
        bool(d.get("reversed", True)),
    )


def manifold_to_json(m: Manifold) -> dict:
    return {
        "schema": SCHEMA_MANIFOLD,
        "faces": [{"id": f.id, "vertices": _ring_json(f.ring), "tag": f.tag} for f in m.faces],
        "gluings": [glue_to_json(g) for g in m.glues],
    }


def manifold_from_json(d: dict) -> Manifold:
    if d.get("schema", SCHEMA_MANIFOLD) != SCHEMA_MANIFOLD:
        raise ValueError(f"unsupported manifold schema {d.get('schema')!r}")
    faces = [Face(str(f["id"]), [tuple(p) for p in f["vertices"]], f.get("tag", "")) for f in d["faces"]]
    return make_manifold(faces, [glue_from_json(g) for g in d.get("gluings", [])])


def step_to_json(s: RefoldStep) -> dict:
    return {
        "schema": SCHEMA_STEP,
        "label": s.label,
        "unmerges": [
            {"face": u.face, "a": u.a, "b": u.b, "ring": _ring_json(u.ring), "ringA": _ring_json(u.ring_a),
             "ringB": _ring_json(u.ring_b), "frameB": u.b_frame.to_json(), "tag": u.tag}
            for u in s.unmerges
        ],
        "cuts": [glue_to_json(g) for g in s.cuts],
        "glues": [glue_to_json(g) for g in s.glues],
        "merges": [
            {"a": mg.a, "b": mg.b, "into": mg.into, "bToA": mg.b_to_a.to_json(), "ringA": _ring_json(mg.ring_a),
             "ringB": _ring_json(mg.ring_b), "ring": _ring_json(mg.ring), "tag": mg.tag}
            for mg in s.merges
        ],
    }


def _ring(d) -> tuple[Point2, ...]:
    return tuple(P(p) for p in d)


def step_from_json(d: dict) -> RefoldStep:
    if d.get("schema", SCHEMA_STEP) != SCHEMA_STEP:
        raise ValueError(f"unsupported step schema {d.get('schema')!r}")
    return RefoldStep(
        tuple(Unmerge(u["face"], u["a"], u["b"], _ring(u["ring"]), _ring(u["ringA"]), _ring(u["ringB"]),
                      Isometry2.from_json(u["frameB"]), u.get("tag", "")) for u in d.get("unmerges", [])),
        tuple(glue_from_json(g) for g in d.get("cuts", [])),
        tuple(glue_from_json(g) for g in d.get("glues", [])),
        tuple(Merge(mg["a"], mg["b"], mg["into"], Isometry2.from_json(mg["bToA"]), _ring(mg["ringA"]),
                    _ring(mg["ringB"]), _ring(mg["ring"]), mg.get("tag", "")) for mg in d.get("merges", [])),
        d.get("label", ""),
    )


# --- common constructions -------------------------------------------------------------


def double_cover(polygon: Sequence, top: str = "top", bottom: str = "bottom") -> Manifold:
    """Two mirror copies of a convex polygon glued along every edge."""
    ring = geom.ccw(polygon)
    n = len(ring)
    mring = geom.mirror_ring(ring)
    glues = []
    for i in range(n):
        L = geom.dist(ring[i], ring[(i + 1) % n])
        k = (-i - 1) % n
        glues.append(Glue(Arc(top, i, 0.0, L), Arc(bottom, k, 0.0, L), True))
    return make_manifold([Face(top, ring, "top"), Face(bottom, mring, "bottom")], glues)


def single_face(polygon: Sequence, fid: str = "f0") -> Manifold:
    return make_manifold([Face(fid, geom.ccw(polygon))])
