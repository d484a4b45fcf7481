"""Common dissections of equal-area polygon collections and common triangulations.

The dissection follows the classic strip route: every face is cut into
triangles, every triangle into a rectangle, every rectangle is resized to a
fixed height ``w`` and the results are laid end to end into one long
``w``-high strip.  Doing that for both collections and overlaying the two
strips gives convex pieces, each carrying the rigid motion that puts it back
into a face of either collection.

:func:`refine_to_common_triangulation` turns those pieces into one triangle
set glued edge to edge in two ways, once per source manifold.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import shapely

from . import geom
from .geom import IDENTITY, Isometry2, P, Point2
from .manifold import Arc, Face, Glue, Manifold, make_manifold

AREA_EPS = 1e-9
SNAP = 1e-9


class DissectError(ValueError):
    code = "DissectError"


class NonSimple(DissectError):
    code = "NonSimple"


class AreaMismatch(DissectError):
    code = "AreaMismatch"


class GluingInconsistent(DissectError):
    code = "GluingInconsistent"


# --- triangulation -----------------------------------------------------------------


def triangulate(poly: Sequence) -> list[list[Point2]]:
    """Triangles (counterclockwise) tiling a simple polygon, using only its vertices."""
    ring = geom.ccw([P(p) for p in poly])
    if len(ring) < 3 or not geom.is_simple(ring) or geom.area(ring) <= 0:
        raise NonSimple("polygon is not simple")
    if len(ring) == 3:
        return [ring]
    tris = shapely.constrained_delaunay_triangles(shapely.Polygon(ring))
    lookup = {(round(p.x, 12), round(p.y, 12)): p for p in ring}
    out = []
    for t in shapely.get_parts(tris):
        pts = list(t.exterior.coords)[:-1]
        tri = [lookup.get((round(x, 12), round(y, 12)), P(x, y)) for x, y in pts]
        tri = geom.ccw(tri)
        if geom.area(tri) > 0:
            out.append(tri)
    if abs(sum(geom.area(t) for t in out) - geom.area(ring)) > 1e-9 * max(1.0, geom.area(ring)):
        raise NonSimple("triangulation does not cover the polygon")
    return out


# --- convex clipping -------------------------------------------------------------------


def clip_halfplane(poly: Sequence[Point2], p: Point2, q: Point2) -> list[Point2]:
    """The part of convex ``poly`` on the left of (or on) the directed line p->q."""
    dx, dy = q[0] - p[0], q[1] - p[1]
    L = math.hypot(dx, dy)

    def side(x):
        return (dx * (x[1] - p[1]) - dy * (x[0] - p[0])) / L

    out: list[Point2] = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        sa, sb = side(a), side(b)
        if sa >= -1e-13:
            out.append(a)
        if (sa > 1e-13 and sb < -1e-13) or (sa < -1e-13 and sb > 1e-13):
            t = sa / (sa - sb)
            out.append(P(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    return _tidy(out)


def _tidy(poly: list[Point2], eps: float = 1e-12) -> list[Point2]:
    out: list[Point2] = []
    for p in poly:
        if not out or geom.dist(out[-1], p) > eps:
            out.append(p)
    while len(out) > 1 and geom.dist(out[0], out[-1]) <= eps:
        out.pop()
    if len(out) >= 3:
        out = geom.remove_straight(out, 1e-12)
    return out


def clip_convex(a: Sequence[Point2], b: Sequence[Point2]) -> list[Point2]:
    """Intersection of two convex counterclockwise polygons."""
    out = list(a)
    n = len(b)
    for i in range(n):
        if len(out) < 3:
            return []
        out = clip_halfplane(out, b[i], b[(i + 1) % n])
    return out if len(out) >= 3 else []


# --- working pieces ------------------------------------------------------------------


@dataclass
class _Bit:
    poly: list[Point2]  # convex, in working coordinates
    to_source: Isometry2  # working -> source face coordinates
    face: str


Region = tuple[list[tuple[Point2, Point2]], Isometry2]


def _move(bits: list[_Bit], regions: Sequence[Region]) -> list[_Bit]:
    """Split every bit by the regions (each an intersection of half-planes) and move the parts."""
    out = []
    for b in bits:
        for halfplanes, g in regions:
            poly = b.poly
            for p, q in halfplanes:
                if len(poly) < 3:
                    break
                poly = clip_halfplane(poly, p, q)
            if len(poly) < 3 or geom.area(poly) <= 1e-15:
                continue
            out.append(_Bit(geom.transform(poly, g), b.to_source.compose(g.inverse()), b.face))
    return out


def _below(y):
    return (P(1, y), P(0, y))


def _above(y):
    return (P(0, y), P(1, y))


def _left(x):
    return (P(x, 0), P(x, 1))


def _right(x):
    return (P(x, 1), P(x, 0))


def _triangle_to_rectangle(tri: Sequence[Point2], face: str, to_face: Isometry2) -> tuple[list[_Bit], float, float]:
    """Cut a triangle into a rectangle ``[0, b] x [0, h/2]`` resting on its longest side."""
    k = max(range(3), key=lambda i: geom.dist(tri[i], tri[(i + 1) % 3]))
    A, B, C = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
    b = geom.dist(A, B)
    e1 = ((B[0] - A[0]) / b, (B[1] - A[1]) / b)
    # working -> face: x e1 + y e1perp + A
    frame = Isometry2((e1[0], -e1[1], e1[1], e1[0]), (A[0], A[1]))
    inv = frame.inverse()
    c = inv(C)
    h = c[1]
    bits = [_Bit([P(0, 0), P(b, 0), c], to_face.compose(frame), face)]
    m1 = geom.midpoint(P(0, 0), c)
    m2 = geom.midpoint(P(b, 0), c)
    regions: list[Region] = [
        ([_below(h / 2)], IDENTITY),
        ([_above(h / 2), _left(c[0])], geom.half_turn(m1)),
        ([_above(h / 2), _right(c[0])], geom.half_turn(m2)),
    ]
    return _move(bits, regions), b, h / 2


def _rectangle_frame(ring: Sequence[Point2]) -> tuple[Isometry2, float, float] | None:
    if len(ring) != 4:
        return None
    for i in range(4):
        a, b, c = ring[i - 1], ring[i], ring[(i + 1) % 4]
        u, v = b - a, c - b
        if abs(geom.dot(u, v)) > 1e-9 * geom.norm(u) * geom.norm(v):
            return None
    A, B, D = ring[0], ring[1], ring[3]
    X = geom.dist(A, B)
    e1 = ((B[0] - A[0]) / X, (B[1] - A[1]) / X)
    return Isometry2((e1[0], -e1[1], e1[1], e1[0]), (A[0], A[1])), X, geom.dist(A, D)


def _to_height(bits: list[_Bit], X: float, Y: float, w: float) -> tuple[list[_Bit], float]:
    """Resize rectangle ``[0,X] x [0,Y]`` into ``[0, XY/w] x [0, w]``; returns its new length."""
    # rotate a quarter turn if that needs fewer halvings
    if abs(math.log(X / w) - math.log(1.5)) < abs(math.log(Y / w) - math.log(1.5)):
        g = Isometry2((0.0, -1.0, 1.0, 0.0), (Y, 0.0))  # (x, y) -> (Y - y, x)
        bits = _move(bits, [([], g)])
        X, Y = Y, X
    guard = 0
    while Y > 2 * w * (1 + 1e-12) or Y < w * (1 - 1e-12):
        guard += 1
        if guard > 200:
            raise DissectError("rectangle normalization did not converge")
        if Y > 2 * w:
            bits = _move(bits, [([_below(Y / 2)], IDENTITY),
                                ([_above(Y / 2)], geom.translation((X, -Y / 2)))])
            X, Y = 2 * X, Y / 2
        else:
            bits = _move(bits, [([_left(X / 2)], IDENTITY),
                                ([_right(X / 2)], geom.translation((-X / 2, Y)))])
            X, Y = X / 2, 2 * Y
    if Y - w > 1e-12 * w:
        Xn = X * Y / w
        top, far = P(0, Y), P(Xn, 0)
        under = (far, top)  # left of far->top is below the cut line
        over = (top, far)
        bits = _move(bits, [
            ([under, _below(w)], IDENTITY),
            ([under, _above(w)], geom.translation((X, -w))),
            ([over], geom.translation((Xn - X, w - Y))),
        ])
        X = Xn
    return bits, X


def _strip(faces: Sequence[tuple[str, Sequence[Point2]]], w: float) -> tuple[list[_Bit], float]:
    bits_all: list[_Bit] = []
    offset = 0.0
    for fid, ring in faces:
        ring = geom.ccw([P(p) for p in ring])
        rect = _rectangle_frame(ring)
        if rect is not None:
            frame, X, Y = rect
            parts = [([_Bit([P(0, 0), P(X, 0), P(X, Y), P(0, Y)], frame, fid)], X, Y)]
        else:
            parts = [_triangle_to_rectangle(t, fid, IDENTITY) for t in triangulate(ring)]
        for bits, X, Y in parts:
            bits, L = _to_height(bits, X, Y, w)
            bits_all.extend(_move(bits, [([], geom.translation((offset, 0.0)))]))
            offset += L
    return bits_all, offset


# --- public dissection ----------------------------------------------------------------


def _side(side) -> int:
    return {"p": 0, "q": 1}.get(side, side)


@dataclass
class DissectionPiece:
    """A convex piece with one placement per source collection (index 0 is P, 1 is Q)."""

    id: str
    ring: tuple[Point2, ...]
    placements: tuple[Isometry2, ...]
    faces: tuple[str, ...]

    @property
    def placement_p(self) -> Isometry2:
        return self.placements[0]

    @property
    def placement_q(self) -> Isometry2:
        return self.placements[1]

    @property
    def face_p(self) -> str:
        return self.faces[0]

    @property
    def face_q(self) -> str:
        return self.faces[1]

    @property
    def area(self) -> float:
        return geom.area(self.ring)

    def placed(self, side) -> list[Point2]:
        return geom.transform(self.ring, self.placements[_side(side)])

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "ring": [list(p) for p in self.ring],
            "placements": [g.to_json() for g in self.placements],
            "faces": list(self.faces),
        }

    @classmethod
    def from_json(cls, d: dict) -> "DissectionPiece":
        return cls(d["id"], tuple(P(p) for p in d["ring"]),
                   tuple(Isometry2.from_json(g) for g in d["placements"]), tuple(d["faces"]))


def _faces(x) -> list[tuple[str, list[Point2]]]:
    if isinstance(x, Manifold):
        return [(f.id, list(f.ring)) for f in x.faces]
    out = []
    for i, item in enumerate(x):
        if isinstance(item, tuple) and len(item) == 2 and isinstance(item[0], str):
            out.append((item[0], [P(p) for p in item[1]]))
        elif isinstance(item, Face):
            out.append((item.id, list(item.ring)))
        else:
            out.append((f"f{i}", [P(p) for p in item]))
    return out


def _congruent_pairing(fp, fq) -> list[tuple[str, str, Isometry2]] | None:
    if len(fp) != len(fq):
        return None
    used: set[int] = set()
    out = []
    for pid, pr in fp:
        for j, (qid, qr) in enumerate(fq):
            if j in used:
                continue
            shifts = geom.congruent_shifts(geom.ccw(pr), geom.ccw(qr))
            proper = [g for _, g in shifts if g.proper]
            if proper:
                used.add(j)
                out.append((pid, qid, proper[0]))
                break
        else:
            return None
    return out


def common_dissection(faces_p, faces_q, eps: float = 1e-9, width: float | None = None) -> list[DissectionPiece]:
    """Pieces that tile both collections; each piece carries its placement into either one.

    ``faces_p``/``faces_q`` are manifolds or lists of rings (optionally
    ``(id, ring)`` pairs).  Placements are orientation preserving.
    """
    return common_dissection_n([faces_p, faces_q], eps, width)


def common_dissection_n(collections: Sequence, eps: float = 1e-9, width: float | None = None) -> list[DissectionPiece]:
    """Like :func:`common_dissection` for any number of equal-area collections."""
    fs = [_faces(c) for c in collections]
    areas = [sum(geom.area(r) for _, r in f) for f in fs]
    top = max(1.0, *areas)
    for a in areas[1:]:
        if abs(a - areas[0]) > eps * top:
            raise AreaMismatch(f"areas differ: {areas[0]} vs {a}")
    pairings = [_congruent_pairing(fs[0], f) for f in fs[1:]]
    if all(p is not None for p in pairings):
        rings = dict(fs[0])
        out = []
        for i, (pid, _) in enumerate(fs[0]):
            pl, fc = [IDENTITY], [pid]
            for p in pairings:
                _, qid, g = next(x for x in p if x[0] == pid)
                pl.append(g)
                fc.append(qid)
            out.append(DissectionPiece(f"k{i}", tuple(geom.ccw(rings[pid])), tuple(pl), tuple(fc)))
        return out
    w = width or 1.0
    strips = [_strip(f, w) for f in fs]
    L0 = strips[0][1]
    for _, L in strips[1:]:
        if abs(L - L0) > 1e-7 * max(1.0, L0):
            raise AreaMismatch(f"strip lengths differ: {L0} vs {L}")
    floor = AREA_EPS * areas[0] * 1e-3
    cur = [(b.poly, (b.to_source,), (b.face,)) for b in strips[0][0]]
    for bits, _ in strips[1:]:
        bits = sorted(bits, key=lambda b: min(p[0] for p in b.poly))
        blo = [min(p[0] for p in b.poly) for b in bits]
        bhi = [max(p[0] for p in b.poly) for b in bits]
        nxt = []
        for poly, pl, fc in cur:
            lo, hi = min(p[0] for p in poly), max(p[0] for p in poly)
            for j, b in enumerate(bits):
                if blo[j] >= hi - 1e-14:
                    break
                if bhi[j] <= lo + 1e-14:
                    continue
                ring = clip_convex(poly, b.poly)
                if len(ring) >= 3 and geom.area(ring) > floor:
                    nxt.append((ring, pl + (b.to_source,), fc + (b.face,)))
        cur = nxt
    return [DissectionPiece(f"k{i}", tuple(r), pl, fc) for i, (r, pl, fc) in enumerate(cur)]


def tiling_report(pieces: Sequence[DissectionPiece], faces, side: str, samples: int = 1000,
                  seed: int = 0) -> dict:
    """Independent check that the placed pieces tile the faces.

    Uses area sums per face and random interior points: each sample point of
    a piece must land inside its face and inside no other piece of that face.
    """
    import random

    rng = random.Random(seed)
    fs = dict(_faces(faces))
    by_face: dict[str, list[list[Point2]]] = {}
    for pc in pieces:
        fid = pc.faces[_side(side)]
        by_face.setdefault(fid, []).append(pc.placed(side))
    area_err = 0.0
    for fid, ring in fs.items():
        area_err = max(area_err, abs(sum(geom.area(r) for r in by_face.get(fid, [])) - geom.area(ring)))
    overlaps = outside = 0
    for fid, placed in by_face.items():
        polys = [shapely.Polygon(r) for r in placed]
        tree = shapely.STRtree(polys)
        face_poly = shapely.Polygon(fs[fid]).buffer(1e-9)
        for i, r in enumerate(placed):
            pts = _interior_samples(r, samples, rng)
            mp = shapely.points(pts)
            inside_face = shapely.contains(face_poly, mp)
            outside += int((~inside_face).sum())
            for j in tree.query(polys[i]):
                if j == i:
                    continue
                shrunk = polys[j].buffer(-1e-9)
                if shrunk.is_empty:
                    continue
                overlaps += int(shapely.contains(shrunk, mp).sum())
    return {"area_error": area_err, "overlaps": overlaps, "outside": outside,
            "ok": area_err <= 1e-9 * max(1.0, sum(geom.area(r) for r in fs.values())) and not overlaps and not outside}


def _interior_samples(ring: Sequence[Point2], k: int, rng) -> list[tuple[float, float]]:
    """Uniform-ish points strictly inside a convex ring (random barycentric fan samples)."""
    c = geom.centroid(ring)
    n = len(ring)
    areas = [geom.area([c, ring[i], ring[(i + 1) % n]]) for i in range(n)]
    tot = sum(areas)
    pts = []
    for _ in range(k):
        r = rng.random() * tot
        i = 0
        while i < n - 1 and r > areas[i]:
            r -= areas[i]
            i += 1
        u, v = rng.random(), rng.random()
        if u + v > 1:
            u, v = 1 - u, 1 - v
        u = 0.001 + 0.998 * u
        v = 0.001 + 0.998 * v * (1 - u) / max(1 - u, 1e-12)
        a, b = ring[i], ring[(i + 1) % n]
        s = 1 - u - v
        pts.append((s * c[0] + u * a[0] + v * b[0], s * c[1] + u * a[1] + v * b[1]))
    return pts


def congruence_error(pieces: Sequence[DissectionPiece]) -> float:
    """Largest deviation of pairwise vertex distances between a piece and its two placements."""
    worst = 0.0
    for pc in pieces:
        for g in pc.placements:
            placed = geom.transform(pc.ring, g)
            n = len(pc.ring)
            for i in range(n):
                for j in range(i + 1, n):
                    worst = max(worst, abs(geom.dist(pc.ring[i], pc.ring[j]) - geom.dist(placed[i], placed[j])))
    return worst


# --- common triangulation --------------------------------------------------------------


@dataclass
class CommonTriangulation:
    """One triangle set, glued edge to edge in several ways.

    ``internal`` glues (inside a piece) are shared; ``glues[s]`` are the
    remaining pairings of source ``s`` (an index; "p"/"q" alias 0/1).
    ``placement[s][t]`` puts triangle ``t`` into face ``face[s][t]`` of that
    source manifold.
    """

    triangles: list[Face]
    internal: list[Glue]
    glues: list[list[Glue]]
    placement: list[dict[str, Isometry2]] = field(default_factory=list)
    face: list[dict[str, str]] = field(default_factory=list)
    snapped: int = 0

    @property
    def k(self) -> int:
        return len(self.glues)

    def pairings(self, side) -> list[Glue]:
        """Every gluing of source ``side``, internal ones included."""
        return list(self.internal) + list(self.glues[_side(side)])

    def manifold(self, side) -> Manifold:
        return make_manifold(self.triangles, self.pairings(side))

    @property
    def area(self) -> float:
        return sum(f.area for f in self.triangles)

    def as_pieces(self) -> list[DissectionPiece]:
        """Triangles as dissection pieces, for the oracles that take pieces."""
        return [DissectionPiece(t.id, tuple(t.ring), tuple(pl[t.id] for pl in self.placement),
                                tuple(fc[t.id] for fc in self.face)) for t in self.triangles]


@dataclass
class _Pairing:
    a: tuple[int, int]  # (piece index, edge index)
    a0: float
    a1: float
    b: tuple[int, int]
    b0: float
    b1: float
    rev: bool  # b runs backwards relative to a

    def to_b(self, s: float) -> float:
        return self.b1 - (s - self.a0) if self.rev else self.b0 + (s - self.a0)

    def to_a(self, t: float) -> float:
        return self.a0 + (self.b1 - t) if self.rev else self.a0 + (t - self.b0)


def _edge_pairings(pieces: Sequence[DissectionPiece], src: Manifold, side: str, eps: float) -> list[_Pairing]:
    """Which stretches of piece edges are glued together in manifold ``src``."""
    faces = {f.id: f for f in src.faces}
    placed: dict[str, list[tuple[int, int, Point2, Point2]]] = {}
    for i, pc in enumerate(pieces):
        fid = pc.faces[_side(side)]
        ring = pc.placed(side)
        n = len(ring)
        for k in range(n):
            placed.setdefault(fid, []).append((i, k, ring[k], ring[(k + 1) % n]))
    out: list[_Pairing] = []
    on_boundary: dict[tuple[str, int], list[tuple[int, int, float, float, float]]] = {}
    for fid, edges in placed.items():
        f = faces[fid]
        interior = []
        for i, k, p, q in edges:
            hit = None
            for e in range(f.n):
                a, b = f.edge(e)
                if geom.seg_distance(p, a, b) <= eps and geom.seg_distance(q, a, b) <= eps:
                    hit = e
                    break
            if hit is None:
                interior.append((i, k, p, q))
            else:
                a, b = f.edge(hit)
                L = geom.dist(a, b)
                u = ((b[0] - a[0]) / L, (b[1] - a[1]) / L)
                s0 = geom.dot(p - a, u)
                s1 = geom.dot(q - a, u)
                # (piece, edge, param of start on face edge, param of end, direction sign)
                on_boundary.setdefault((fid, hit), []).append((i, k, s0, s1, 1.0 if s1 > s0 else -1.0))
        out.extend(_interior_pairs(interior, pieces, side, eps))
    for g in src.glues:
        for x, y in ((g.a, g.b), (g.b, g.a)):
            if (x.face, x.edge) > (y.face, y.edge) or ((x.face, x.edge) == (y.face, y.edge) and x.t0 > y.t0):
                continue
            for i, k, s0, s1, sg in on_boundary.get((x.face, x.edge), []):
                lo, hi = max(min(s0, s1), x.t0), min(max(s0, s1), x.t1)
                if hi - lo <= eps:
                    continue
                # partner stretch on y's edge
                if g.reversed:
                    ylo, yhi = y.t1 - (hi - x.t0), y.t1 - (lo - x.t0)
                else:
                    ylo, yhi = y.t0 + (lo - x.t0), y.t0 + (hi - x.t0)
                for j, m, r0, r1, sg2 in on_boundary.get((y.face, y.edge), []):
                    lo2, hi2 = max(min(r0, r1), ylo), min(max(r0, r1), yhi)
                    if hi2 - lo2 <= eps:
                        continue
                    # back to x's edge
                    if g.reversed:
                        xlo, xhi = x.t0 + (y.t1 - hi2), x.t0 + (y.t1 - lo2)
                    else:
                        xlo, xhi = x.t0 + (lo2 - y.t0), x.t0 + (hi2 - y.t0)
                    # convert face-edge params into piece-edge arc lengths
                    pa0, pa1 = _piece_param(s0, sg, xlo), _piece_param(s0, sg, xhi)
                    pb0, pb1 = _piece_param(r0, sg2, lo2), _piece_param(r0, sg2, hi2)
                    # orientation of b relative to a along the shared stretch
                    dir_a = sg
                    dir_b = sg2 * (-1.0 if g.reversed else 1.0)
                    rev = dir_a * dir_b < 0
                    if pa0 > pa1:
                        pa0, pa1 = pa1, pa0
                    if pb0 > pb1:
                        pb0, pb1 = pb1, pb0
                    out.append(_Pairing((i, k), pa0, pa1, (j, m), pb0, pb1, rev))
    return out


def _piece_param(s_start: float, sign: float, s: float) -> float:
    return (s - s_start) * sign


def _interior_pairs(edges, pieces, side, eps) -> list[_Pairing]:
    out = []
    # bucket by supporting line to avoid the full quadratic scan
    buckets: dict[tuple[int, int], list] = {}
    for i, k, p, q in edges:
        L = geom.dist(p, q)
        ux, uy = (q[0] - p[0]) / L, (q[1] - p[1]) / L
        if ux < -1e-12 or (abs(ux) <= 1e-12 and uy < 0):
            ux, uy = -ux, -uy
        ang = math.atan2(uy, ux)
        off = -uy * p[0] + ux * p[1]
        key = (round(ang * 1e6), round(off * 1e6))
        buckets.setdefault(key, []).append((i, k, p, q, ux, uy))
    keys = list(buckets)
    seen = set()
    for key in keys:
        cand = []
        for da in (-1, 0, 1):
            for do in (-1, 0, 1):
                cand.extend(buckets.get((key[0] + da, key[1] + do), []))
        for i, k, p, q, ux, uy in buckets[key]:
            for j, m, r, s, vx, vy in cand:
                if (i, k) >= (j, m) or ((i, k), (j, m)) in seen:
                    continue
                if geom.seg_distance(r, p, q) > eps * 10 and geom.seg_distance(s, p, q) > eps * 10 \
                        and geom.seg_distance(p, r, s) > eps * 10:
                    continue
                if geom.seg_distance(r, *_line(p, q)) > eps or geom.seg_distance(s, *_line(p, q)) > eps:
                    continue
                L = geom.dist(p, q)
                d = ((q[0] - p[0]) / L, (q[1] - p[1]) / L)
                r0, r1 = geom.dot(r - p, d), geom.dot(s - p, d)
                lo, hi = max(0.0, min(r0, r1)), min(L, max(r0, r1))
                if hi - lo <= eps:
                    continue
                rev = r1 < r0
                M = geom.dist(r, s)
                # params on the second edge
                b_lo, b_hi = (r0 - hi, r0 - lo) if rev else (lo - r0, hi - r0)
                seen.add(((i, k), (j, m)))
                out.append(_Pairing((i, k), lo, hi, (j, m), max(0.0, b_lo), min(M, b_hi), rev))
    return out


def _line(p, q):
    d = (q[0] - p[0], q[1] - p[1])
    return P(p[0] - 1e6 * d[0], p[1] - 1e6 * d[1]), P(q[0] + 1e6 * d[0], q[1] + 1e6 * d[1])


def refine_to_common_triangulation(pieces: Sequence[DissectionPiece], *sources: Manifold,
                                   eps: float = 1e-9, max_passes: int = 200) -> CommonTriangulation:
    """Triangles carrying both manifolds' gluings, edge to edge.

    Break points are mirrored across every pairing of either manifold until
    nothing changes; points closer than ``eps`` are merged (counted in
    ``snapped``).  Each refined piece is then fanned from its centroid.
    """
    scale_ = max(1.0, math.sqrt(sum(pc.area for pc in pieces)))
    tol = eps * scale_ * 10
    pair = {s: _edge_pairings(pieces, m, s, tol) for s, m in enumerate(sources)}
    lengths = {(i, k): geom.dist(pc.ring[k], pc.ring[(k + 1) % len(pc.ring)])
               for i, pc in enumerate(pieces) for k in range(len(pc.ring))}
    brk: dict[tuple[int, int], list[float]] = {e: [0.0, L] for e, L in lengths.items()}
    by_edge: dict[tuple[int, int], list[tuple[_Pairing, bool]]] = {}
    for s in pair:
        for pr in pair[s]:
            by_edge.setdefault(pr.a, []).append((pr, True))
            by_edge.setdefault(pr.b, []).append((pr, False))
    snapped = 0
    work: list[tuple[tuple[int, int], float]] = []

    def add(e, t) -> None:
        nonlocal snapped
        lst = brk[e]
        j = bisect.bisect_left(lst, t)
        for x in lst[max(0, j - 1):j + 1]:
            if abs(x - t) <= tol:
                if abs(x - t) > 1e-15:
                    snapped += 1
                return
        lst.insert(j, t)
        work.append((e, t))

    for s in pair:
        for pr in pair[s]:
            for e, t in ((pr.a, pr.a0), (pr.a, pr.a1), (pr.b, pr.b0), (pr.b, pr.b1)):
                add(e, t)
    work.extend((e, t) for e, lst in brk.items() for t in lst)
    budget = max_passes * max(1, len(lengths))
    while work:
        budget -= 1
        if budget < 0:
            raise GluingInconsistent(f"break-point propagation did not settle ({sum(map(len, brk.values()))} points)")
        e, t = work.pop()
        for pr, on_a in by_edge.get(e, ()):
            if on_a and pr.a0 + tol < t < pr.a1 - tol:
                add(pr.b, pr.to_b(t))
            elif not on_a and pr.b0 + tol < t < pr.b1 - tol:
                add(pr.a, pr.to_a(t))
    for e in brk:
        brk[e].sort()
    # fan every refined piece from its centroid
    tris: list[Face] = []
    internal: list[Glue] = []
    seg_tri: dict[tuple[int, int, int], str] = {}
    placement: list[dict[str, Isometry2]] = [{} for _ in sources]
    face: list[dict[str, str]] = [{} for _ in sources]
    for i, pc in enumerate(pieces):
        ring = pc.ring
        n = len(ring)
        pts: list[tuple[Point2, tuple[int, int, int]]] = []
        for k in range(n):
            a, b = ring[k], ring[(k + 1) % n]
            L = lengths[(i, k)]
            for idx, t in enumerate(brk[(i, k)][:-1]):
                pts.append((geom.lerp(a, b, t / L), (i, k, idx)))
        c = geom.centroid(ring)
        m = len(pts)
        names = [f"t{i}_{j}" for j in range(m)]
        for j in range(m):
            p0, key = pts[j]
            p1 = pts[(j + 1) % m][0]
            tris.append(Face(names[j], (c, p0, p1), "tri"))
            seg_tri[key] = names[j]
            for s in range(len(sources)):
                placement[s][names[j]] = pc.placements[s]
                face[s][names[j]] = pc.faces[s]
        for j in range(m):
            nxt = names[(j + 1) % m]
            Lc = geom.dist(c, pts[(j + 1) % m][0])
            internal.append(Glue(Arc(names[j], 2, 0.0, Lc), Arc(nxt, 0, 0.0, Lc), True))
    edge1 = {f.id: f.edge_length(1) for f in tris}
    glues = []
    for s in pair:
        out = []
        done: set[tuple[int, int, int]] = set()
        for pr in pair[s]:
            la, lb = brk[pr.a], brk[pr.b]
            for idx in range(len(la) - 1):
                t0, t1 = la[idx], la[idx + 1]
                if t0 < pr.a0 - tol or t1 > pr.a1 + tol:
                    continue
                u0, u1 = sorted((pr.to_b(t0), pr.to_b(t1)))
                jdx = _find_seg(lb, u0, u1, tol)
                if jdx is None:
                    raise GluingInconsistent(f"no matching segment for piece edge {pr.a} [{t0}, {t1}]")
                ka, kb = (*pr.a, idx), (*pr.b, jdx)
                if ka in done or kb in done:
                    raise GluingInconsistent(f"segment {ka if ka in done else kb} glued twice")
                done.add(ka)
                done.add(kb)
                out.append(Glue(Arc(seg_tri[ka], 1, 0.0, edge1[seg_tri[ka]]),
                                Arc(seg_tri[kb], 1, 0.0, edge1[seg_tri[kb]]), pr.rev))
        glues.append(out)
    return CommonTriangulation(tris, internal, glues, placement, face, snapped)


def _find_seg(lst: list[float], u0: float, u1: float, tol: float) -> int | None:
    j = bisect.bisect_left(lst, u0 - tol)
    if j < len(lst) - 1 and abs(lst[j] - u0) <= tol and abs(lst[j + 1] - u1) <= tol:
        return j
    return None


__all__ = [
    "AreaMismatch",
    "CommonTriangulation",
    "DissectionPiece",
    "GluingInconsistent",
    "NonSimple",
    "clip_convex",
    "clip_halfplane",
    "common_dissection",
    "congruence_error",
    "refine_to_common_triangulation",
    "tiling_report",
    "triangulate",
]


def gluing_consistency(pieces: Sequence[DissectionPiece], src: Manifold, side, glues: Sequence[Glue],
                       samples: int = 5) -> float:
    """Largest mismatch between a gluing of the pieces and the source manifold.

    ``glues`` refer to pieces by id (edge arcs of ``piece.ring``).  Points
    sampled along each glued pair are placed into the source; they must land
    on the same spot of one face, or on two edge points the source glues.
    """
    s = _side(side)
    by_id = {pc.id: pc for pc in pieces}
    faces = {f.id: f for f in src.faces}
    src_by_edge: dict[tuple[str, int], list[Glue]] = {}
    for g in src.glues:
        src_by_edge.setdefault((g.a.face, g.a.edge), []).append(g)
        src_by_edge.setdefault((g.b.face, g.b.edge), []).append(g.flipped())

    def place(arc: Arc, t: float) -> tuple[str, Point2]:
        pc = by_id[arc.face]
        n = len(pc.ring)
        a, b = pc.ring[arc.edge], pc.ring[(arc.edge + 1) % n]
        p = geom.lerp(a, b, t / geom.dist(a, b))
        return pc.faces[s], pc.placements[s](p)

    def identified(fa: str, x: Point2, fb: str, y: Point2) -> float:
        best = geom.dist(x, y) if fa == fb else math.inf
        f = faces[fa]
        for e in range(f.n):
            p, q = f.edge(e)
            if geom.seg_distance(x, p, q) > 1e-7:
                continue
            t = geom.dist(p, x)
            for g in src_by_edge.get((fa, e), ()):
                if g.a.t0 - 1e-7 <= t <= g.a.t1 + 1e-7 and g.b.face == fb:
                    u, _ = g.partner_interval(g.a, g.b, t, t)
                    best = min(best, geom.dist(faces[fb].point(g.b.edge, u), y))
        return best

    worst = 0.0
    for g in glues:
        for j in range(samples):
            t = g.a.t0 + g.a.length * (j + 0.5) / samples
            u, _ = g.partner_interval(g.a, g.b, t, t)
            fa, x = place(g.a, t)
            fb, y = place(g.b, u)
            worst = max(worst, identified(fa, x, fb, y))
    return worst
