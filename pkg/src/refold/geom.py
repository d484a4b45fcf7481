"""Planar geometry primitives: points, lines, isometries, polygon helpers.

Everything here is a pure function over immutable values.  Tolerance
handling follows one rule: comparisons use ``EPS`` scaled by the local
magnitude of the operands, never an absolute ``EPS`` on raw coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

EPS = 1e-9


class GeometryError(ValueError):
    pass


class Point2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Point2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Point2(self.x - other[0], self.y - other[1])

    def __mul__(self, k):  # type: ignore[override]
        return Point2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __neg__(self):
        return Point2(-self.x, -self.y)


def P(x, y=None) -> Point2:
    """Coerce ``(x, y)`` or ``x, y`` into a :class:`Point2`."""
    if y is None:
        return Point2(float(x[0]), float(x[1]))
    return Point2(float(x), float(y))


def dot(u, v) -> float:
    return u[0] * v[0] + u[1] * v[1]


def cross(u, v) -> float:
    return u[0] * v[1] - u[1] * v[0]


def norm(u) -> float:
    return math.hypot(u[0], u[1])


def dist(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def midpoint(p, q) -> Point2:
    return Point2((p[0] + q[0]) / 2, (p[1] + q[1]) / 2)


def lerp(p, q, t: float) -> Point2:
    return Point2(p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t)


def close(p, q, eps: float = EPS) -> bool:
    scale = max(1.0, abs(p[0]), abs(p[1]), abs(q[0]), abs(q[1]))
    return dist(p, q) <= eps * scale * 10


def _scale(*pts) -> float:
    return max([1.0] + [abs(c) for p in pts for c in p])


@dataclass(frozen=True)
class Segment2:
    a: Point2
    b: Point2

    def __post_init__(self):
        if dist(self.a, self.b) <= EPS * _scale(self.a, self.b):
            raise GeometryError("degenerate segment")

    @property
    def length(self) -> float:
        return dist(self.a, self.b)


@dataclass(frozen=True)
class Line2:
    anchor: Point2
    direction: Point2

    @classmethod
    def through(cls, p, q) -> "Line2":
        d = (q[0] - p[0], q[1] - p[1])
        n = norm(d)
        if n <= EPS * _scale(p, q):
            raise GeometryError("line through coincident points")
        return cls(P(p), Point2(d[0] / n, d[1] / n))

    @classmethod
    def parallel_through(cls, p, direction) -> "Line2":
        n = norm(direction)
        return cls(P(p), Point2(direction[0] / n, direction[1] / n))


def project(p, line: Line2) -> Point2:
    """Orthogonal projection of ``p`` onto ``line``."""
    a, d = line.anchor, line.direction
    t = dot((p[0] - a[0], p[1] - a[1]), d)
    return Point2(a[0] + t * d[0], a[1] + t * d[1])


def line_param(p, line: Line2) -> float:
    a, d = line.anchor, line.direction
    return dot((p[0] - a[0], p[1] - a[1]), d)


def intersect_lines(l1: Line2, l2: Line2) -> Point2 | None:
    den = cross(l1.direction, l2.direction)
    if abs(den) <= EPS:
        return None
    w = l2.anchor - l1.anchor
    t = cross(w, l2.direction) / den
    return l1.anchor + l1.direction * t


LEFT, RIGHT, COLLINEAR = "left", "right", "collinear"


def signed_area2(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def orientation(a, b, c, eps: float = EPS) -> str:
    s = signed_area2(a, b, c)
    # band scales with the lengths involved, so the test is unit-free
    band = eps * max(dist(a, b) * dist(a, c), dist(a, b) * dist(b, c), 1e-300)
    band = max(band, eps * eps)
    if s > band:
        return LEFT
    if s < -band:
        return RIGHT
    return COLLINEAR


# --- isometries ---------------------------------------------------------------


@dataclass(frozen=True)
class Isometry2:
    """``x -> M x + t`` with ``M`` orthogonal; ``proper`` iff det M = +1."""

    m: tuple[float, float, float, float]
    t: tuple[float, float]

    @property
    def proper(self) -> bool:
        return self.det > 0

    @property
    def det(self) -> float:
        a, b, c, d = self.m
        return a * d - b * c

    def __call__(self, p) -> Point2:
        a, b, c, d = self.m
        return Point2(a * p[0] + b * p[1] + self.t[0], c * p[0] + d * p[1] + self.t[1])

    def linear(self, v) -> Point2:
        a, b, c, d = self.m
        return Point2(a * v[0] + b * v[1], c * v[0] + d * v[1])

    def compose(self, other: "Isometry2") -> "Isometry2":
        """``self ∘ other`` (apply ``other`` first)."""
        a, b, c, d = self.m
        e, f, g, h = other.m
        m = (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)
        t = self(other.t)
        return Isometry2(m, (t[0], t[1]))

    def inverse(self) -> "Isometry2":
        a, b, c, d = self.m
        mt = (a, c, b, d)
        inv = Isometry2(mt, (0.0, 0.0))
        t = inv.linear(self.t)
        return Isometry2(mt, (-t[0], -t[1]))

    def is_valid(self, eps: float = 1e-9) -> bool:
        a, b, c, d = self.m
        return (
            abs(a * a + c * c - 1) <= eps
            and abs(b * b + d * d - 1) <= eps
            and abs(a * b + c * d) <= eps
        )

    def is_pure_reflection(self, eps: float = EPS) -> bool:
        """Improper and an involution (no glide component)."""
        if self.proper:
            return False
        tt = self.linear(self.t)
        return norm((tt[0] + self.t[0], tt[1] + self.t[1])) <= eps * _scale(self.t)

    def almost_equal(self, other: "Isometry2", eps: float = 1e-7) -> bool:
        return all(abs(x - y) <= eps for x, y in zip(self.m, other.m)) and all(
            abs(x - y) <= eps * _scale(self.t, other.t) for x, y in zip(self.t, other.t)
        )

    def to_json(self) -> dict:
        return {"m": list(self.m), "t": list(self.t)}

    @classmethod
    def from_json(cls, d: dict) -> "Isometry2":
        return cls(tuple(float(x) for x in d["m"]), tuple(float(x) for x in d["t"]))


IDENTITY = Isometry2((1.0, 0.0, 0.0, 1.0), (0.0, 0.0))


def rotation(angle: float, center=(0.0, 0.0)) -> Isometry2:
    c, s = math.cos(angle), math.sin(angle)
    r = Isometry2((c, -s, s, c), (0.0, 0.0))
    rc = r.linear(center)
    return Isometry2(r.m, (center[0] - rc[0], center[1] - rc[1]))


def half_turn(center) -> Isometry2:
    return Isometry2((-1.0, 0.0, 0.0, -1.0), (2 * center[0], 2 * center[1]))


def translation(v) -> Isometry2:
    return Isometry2((1.0, 0.0, 0.0, 1.0), (float(v[0]), float(v[1])))


MIRROR_X = Isometry2((1.0, 0.0, 0.0, -1.0), (0.0, 0.0))


def isometry_from_segment_pair(s1: Segment2, s2: Segment2, improper: bool = False) -> Isometry2:
    """The unique isometry mapping ``s1.a -> s2.a`` and ``s1.b -> s2.b``."""
    l1, l2 = s1.length, s2.length
    if abs(l1 - l2) > 1e-7 * max(1.0, l1, l2):
        raise GeometryError(f"segment lengths differ: {l1} vs {l2}")
    u = ((s1.b[0] - s1.a[0]) / l1, (s1.b[1] - s1.a[1]) / l1)
    v = ((s2.b[0] - s2.a[0]) / l2, (s2.b[1] - s2.a[1]) / l2)
    if improper:
        # reflect u's frame: M = R_v * diag(1,-1) * R_u^T
        c = u[0] * v[0] - u[1] * v[1]
        s = u[0] * v[1] + u[1] * v[0]
        m = (c, s, s, -c)
    else:
        c = dot(u, v)
        s = cross(u, v)
        m = (c, -s, s, c)
    lin = Isometry2(m, (0.0, 0.0)).linear(s1.a)
    return Isometry2(m, (s2.a[0] - lin[0], s2.a[1] - lin[1]))


# --- polygons -----------------------------------------------------------------


def signed_area(poly: Sequence) -> float:
    n = len(poly)
    s = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return s / 2


def area(poly: Sequence) -> float:
    return abs(signed_area(poly))


def perimeter(poly: Sequence) -> float:
    n = len(poly)
    return sum(dist(poly[i], poly[(i + 1) % n]) for i in range(n))


def ccw(poly: Sequence) -> list[Point2]:
    pts = [P(p) for p in poly]
    return pts if signed_area(pts) >= 0 else pts[::-1]


def centroid(poly: Sequence) -> Point2:
    a = signed_area(poly)
    n = len(poly)
    cx = cy = 0.0
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        w = x0 * y1 - x1 * y0
        cx += (x0 + x1) * w
        cy += (y0 + y1) * w
    return Point2(cx / (6 * a), cy / (6 * a))


def interior_turn(poly: Sequence, i: int) -> tuple[float, float]:
    """(cross, dot) of the incoming and outgoing edge at vertex ``i``."""
    n = len(poly)
    a, b, c = poly[i - 1], poly[i], poly[(i + 1) % n]
    u = (b[0] - a[0], b[1] - a[1])
    v = (c[0] - b[0], c[1] - b[1])
    return cross(u, v), dot(u, v)


def interior_angle(poly: Sequence, i: int) -> float:
    """Interior angle at vertex ``i`` of a CCW polygon, in radians."""
    cr, dt = interior_turn(poly, i)
    return math.pi - math.atan2(cr, dt)


def is_straight(poly: Sequence, i: int, eps: float = EPS) -> bool:
    n = len(poly)
    a, b, c = poly[i - 1], poly[i], poly[(i + 1) % n]
    if orientation(a, b, c, eps) != COLLINEAR:
        return False
    return dot((b[0] - a[0], b[1] - a[1]), (c[0] - b[0], c[1] - b[1])) > 0


def remove_straight(poly: Sequence, eps: float = EPS) -> list[Point2]:
    pts = [P(p) for p in poly]
    changed = True
    while changed and len(pts) > 3:
        changed = False
        for i in range(len(pts)):
            if is_straight(pts, i, eps) or close(pts[i], pts[i - 1]):
                del pts[i]
                changed = True
                break
    return pts


def is_convex(poly: Sequence, strict: bool = True, eps: float = EPS) -> bool:
    n = len(poly)
    if n < 3 or signed_area(poly) <= 0:
        return False
    for i in range(n):
        o = orientation(poly[i - 1], poly[i], poly[(i + 1) % n], eps)
        if o == RIGHT or (strict and o == COLLINEAR):
            return False
    return True


def segments_intersect(p1, p2, q1, q2, eps: float = EPS) -> bool:
    """Closed-segment intersection test."""
    o1 = orientation(p1, p2, q1, eps)
    o2 = orientation(p1, p2, q2, eps)
    o3 = orientation(q1, q2, p1, eps)
    o4 = orientation(q1, q2, p2, eps)
    if o1 != o2 and o3 != o4 and COLLINEAR not in (o1, o2, o3, o4):
        return True

    def on_seg(a, b, c):
        return (
            min(a[0], b[0]) - eps <= c[0] <= max(a[0], b[0]) + eps
            and min(a[1], b[1]) - eps <= c[1] <= max(a[1], b[1]) + eps
        )

    return (
        (o1 == COLLINEAR and on_seg(p1, p2, q1))
        or (o2 == COLLINEAR and on_seg(p1, p2, q2))
        or (o3 == COLLINEAR and on_seg(q1, q2, p1))
        or (o4 == COLLINEAR and on_seg(q1, q2, p2))
        or (o1 != o2 and o3 != o4)
    )


def is_simple(poly: Sequence, eps: float = EPS) -> bool:
    n = len(poly)
    if n < 3:
        return False
    for i in range(n):
        if close(poly[i], poly[(i + 1) % n], eps):
            return False
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if segments_intersect(a, b, poly[j], poly[(j + 1) % n], eps):
                return False
    return True


def point_in_polygon(p, poly: Sequence) -> bool:
    """Strict-interior test by crossing number (boundary points are ambiguous)."""
    x, y = p
    inside = False
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            xi = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if xi > x:
                inside = not inside
    return inside


def point_on_boundary(p, poly: Sequence, eps: float = 1e-7) -> bool:
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if seg_distance(p, a, b) <= eps * _scale(a, b):
            return True
    return False


def seg_distance(p, a, b) -> float:
    d = (b[0] - a[0], b[1] - a[1])
    L2 = dot(d, d)
    if L2 == 0:
        return dist(p, a)
    t = max(0.0, min(1.0, dot((p[0] - a[0], p[1] - a[1]), d) / L2))
    return dist(p, (a[0] + t * d[0], a[1] + t * d[1]))


def rotate_to_min(poly: Sequence) -> list[Point2]:
    """Cyclically rotate so the lexicographically smallest vertex comes first."""
    pts = [P(p) for p in poly]
    k = min(range(len(pts)), key=lambda i: (round(pts[i][0], 9), round(pts[i][1], 9)))
    return pts[k:] + pts[:k]


def transform(poly: Iterable, g: Isometry2) -> list[Point2]:
    return [g(p) for p in poly]


def mirror_ring(poly: Sequence) -> list[Point2]:
    """Mirror image across the x-axis, kept counterclockwise."""
    m = [MIRROR_X(p) for p in poly]
    return [m[0]] + m[:0:-1]


def congruent_shifts(ring1: Sequence, ring2: Sequence, eps: float = 1e-7) -> list[tuple[int, Isometry2]]:
    """Cyclic shifts ``k`` such that ring1[i] maps to ring2[(i+k) % n] by a proper isometry."""
    n = len(ring1)
    if n != len(ring2):
        return []
    out = []
    for k in range(n):
        try:
            g = isometry_from_segment_pair(
                Segment2(P(ring1[0]), P(ring1[1])), Segment2(P(ring2[k]), P(ring2[(k + 1) % n]))
            )
        except GeometryError:
            continue
        if all(dist(g(ring1[i]), ring2[(i + k) % n]) <= eps * _scale(ring2[(i + k) % n]) for i in range(n)):
            out.append((k, g))
    return out
