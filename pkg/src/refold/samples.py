"""Seeded random inputs for tests, benchmarks and the CLI."""

from __future__ import annotations

import math
import random

from . import geom
from .geom import P, Point2


def _min_turn(ring) -> float:
    """Smallest exterior angle; near-straight vertices make slivers downstream."""
    n = len(ring)
    out = math.pi
    for i in range(n):
        a, b, c = ring[i - 1], ring[i], ring[(i + 1) % n]
        u, v = b - a, c - b
        out = min(out, abs(math.atan2(u.x * v.y - u.y * v.x, u.x * v.x + u.y * v.y)))
    return out


def convex_polygon(n: int, rng: random.Random, area: float | None = None) -> list[Point2]:
    """A random strictly convex n-gon (Valtr's method), optionally scaled to ``area``."""
    for _ in range(100):
        xs = sorted(rng.random() for _ in range(n))
        ys = sorted(rng.random() for _ in range(n))
        vx = _chains(xs, rng)
        vy = _chains(ys, rng)
        rng.shuffle(vy)
        vecs = sorted(zip(vx, vy), key=lambda v: math.atan2(v[1], v[0]))
        pts, x, y = [], 0.0, 0.0
        for dx, dy in vecs:
            pts.append(P(x, y))
            x += dx
            y += dy
        ring = geom.ccw(pts)
        if len(geom.remove_straight(ring, 1e-6)) == n and geom.is_convex(ring, strict=True, eps=1e-6) \
                and _min_edge(ring) > 1e-3 and _min_turn(ring) > 1e-3:
            break
    else:  # pragma: no cover
        raise RuntimeError("could not sample a convex polygon")
    c = geom.centroid(ring)
    ring = [p - c for p in ring]
    if area is not None:
        k = math.sqrt(area / geom.area(ring))
        ring = [p * k for p in ring]
    return ring


def _chains(vals: list[float], rng: random.Random) -> list[float]:
    lo, hi = vals[0], vals[-1]
    a, b = lo, lo
    out = []
    for v in vals[1:-1]:
        if rng.random() < 0.5:
            out.append(v - a)
            a = v
        else:
            out.append(b - v)
            b = v
    out.append(hi - a)
    out.append(b - hi)
    return out


def _min_edge(ring) -> float:
    n = len(ring)
    return min(geom.dist(ring[i], ring[(i + 1) % n]) for i in range(n))


# --- closed surfaces from 3D meshes ---------------------------------------------------------


def manifold_from_mesh(vertices, faces, prefix: str = "f"):
    """Flatten each planar face of a closed mesh and glue shared edges.

    ``faces`` list vertex indices counterclockwise seen from outside.  Every
    undirected edge must be used by exactly two faces in opposite directions.
    """
    from .manifold import Arc, Face, Glue, make_manifold

    def sub(u, v):
        return (u[0] - v[0], u[1] - v[1], u[2] - v[2])

    def dot3(u, v):
        return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]

    def cross3(u, v):
        return (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])

    def unit(u):
        n = math.sqrt(dot3(u, u))
        return (u[0] / n, u[1] / n, u[2] / n)

    out_faces = []
    edges: dict[tuple[int, int], tuple[str, int, float]] = {}
    for fi, f in enumerate(faces):
        o = vertices[f[0]]
        x = unit(sub(vertices[f[1]], o))
        nrm = (0.0, 0.0, 0.0)
        for i in range(len(f)):
            nrm = tuple(a + b for a, b in zip(nrm, cross3(sub(vertices[f[i]], o), sub(vertices[f[(i + 1) % len(f)]], o))))
        y = cross3(unit(nrm), x)
        ring = [P(dot3(sub(vertices[v], o), x), dot3(sub(vertices[v], o), y)) for v in f]
        fid = f"{prefix}{fi}"
        out_faces.append(Face(fid, tuple(ring), "mesh"))
        for i in range(len(f)):
            u, v = f[i], f[(i + 1) % len(f)]
            if (u, v) in edges:
                raise geom.GeometryError(f"edge {u}-{v} used twice in the same direction")
            edges[(u, v)] = (fid, i, geom.dist(ring[i], ring[(i + 1) % len(f)]))
    glues = []
    for (u, v), (fid, i, L) in edges.items():
        if (v, u) not in edges:
            raise geom.GeometryError(f"edge {u}-{v} has no partner")
        if (u, v) < (v, u):
            gid, j, _ = edges[(v, u)]
            glues.append(Glue(Arc(fid, i, 0.0, L), Arc(gid, j, 0.0, L), True))
    return make_manifold(out_faces, glues)


def bipyramid(edge: float = 1.0):
    """Triangular bipyramid made of six equilateral triangles."""
    r = edge / math.sqrt(3)
    h = edge * math.sqrt(2 / 3)
    eq = [(r * math.cos(2 * math.pi * i / 3), r * math.sin(2 * math.pi * i / 3), 0.0) for i in range(3)]
    verts = eq + [(0.0, 0.0, h), (0.0, 0.0, -h)]
    faces = [(i, (i + 1) % 3, 3) for i in range(3)] + [((i + 1) % 3, i, 4) for i in range(3)]
    return manifold_from_mesh(verts, faces)


def regular_polygon(n: int, side: float = 1.0) -> list[Point2]:
    R = side / (2 * math.sin(math.pi / n))
    return [P(R * math.cos(2 * math.pi * i / n), R * math.sin(2 * math.pi * i / n)) for i in range(n)]


def flat_hexagon_matching(m) -> list[Point2]:
    """Regular hexagon whose double cover has the same area as ``m``."""
    # doubly covered hexagon of side s has area 3*sqrt(3)*s^2
    return regular_polygon(6, math.sqrt(m.area / (3 * math.sqrt(3))))


def box_surface(a: float, b: float, c: float):
    """Surface of an ``a × b × c`` box, six rectangles."""
    verts = [(x, y, z) for x in (0.0, a) for y in (0.0, b) for z in (0.0, c)]

    def vid(x, y, z):
        return 4 * x + 2 * y + z

    faces = [
        (vid(0, 0, 0), vid(0, 1, 0), vid(1, 1, 0), vid(1, 0, 0)),  # z = 0, normal -z
        (vid(0, 0, 1), vid(1, 0, 1), vid(1, 1, 1), vid(0, 1, 1)),  # z = c
        (vid(0, 0, 0), vid(1, 0, 0), vid(1, 0, 1), vid(0, 0, 1)),  # y = 0
        (vid(0, 1, 0), vid(0, 1, 1), vid(1, 1, 1), vid(1, 1, 0)),  # y = b
        (vid(0, 0, 0), vid(0, 0, 1), vid(0, 1, 1), vid(0, 1, 0)),  # x = 0
        (vid(1, 0, 0), vid(1, 1, 0), vid(1, 1, 1), vid(1, 0, 1)),  # x = a
    ]
    return manifold_from_mesh(verts, faces)


def closed_manifold(rng: random.Random, area: float):
    """A doubly covered convex polygon or a box surface of the given area."""
    from .manifold import double_cover

    if rng.random() < 0.5:
        return double_cover(convex_polygon(rng.randint(3, 6), rng, area=area / 2))
    dims = [rng.uniform(0.5, 2.0) for _ in range(3)]
    a, b, c = dims
    s = math.sqrt(area / (2 * (a * b + b * c + c * a)))
    return box_surface(a * s, b * s, c * s)


# --- random refolding steps ---------------------------------------------------------------


def _sub_glue(g, rng: random.Random, length: float | None = None):
    L = g.a.length
    ell = length if length is not None else L * rng.uniform(0.2, 1.0)
    u0 = g.a.t0 + rng.uniform(0.0, L - ell)
    return g.sub(u0, u0 + ell)


def random_step(m, rng: random.Random, tries: int = 50):
    """A random valid refolding step on ``m`` (or ``None`` if none was found).

    Kinds: swap the partners of two glued stretches, flip one glued stretch,
    or cut a face along a chord and reglue the seam flipped.
    """
    from dataclasses import replace

    from .manifold import Glue, RefoldStep, apply_cuts, apply_step, interior_cut, is_connected

    if not m.glues:
        return None
    for _ in range(tries):
        kind = rng.choice(("swap", "flip", "interior"))
        if kind == "swap" and len(m.glues) >= 2:
            g, h = rng.sample(list(m.glues), 2)
            ell = min(g.a.length, h.a.length) * rng.uniform(0.2, 1.0)
            x, y = _sub_glue(g, rng, ell), _sub_glue(h, rng, ell)
            rev = rng.random() < 0.7
            step = RefoldStep(cuts=(x, y), glues=(Glue(x.a, y.b, rev), Glue(y.a, x.b, rev)), label="swap")
        elif kind == "flip":
            x = _sub_glue(rng.choice(m.glues), rng)
            step = RefoldStep(cuts=(x,), glues=(replace(x, reversed=not x.reversed),), label="flip")
        else:
            f = rng.choice(m.faces)
            i, j = sorted(rng.sample(range(f.n), 2))
            p = f.point(i, f.edge_length(i) * rng.uniform(0.2, 0.8))
            q = f.point(j, f.edge_length(j) * rng.uniform(0.2, 0.8))
            names = (f"{f.id}~{rng.randrange(10**6)}", f"{f.id}~{rng.randrange(10**6)}")
            if names[0] == names[1] or any(m.has_face(x) for x in names):
                continue
            try:
                u, seam, _ = interior_cut(m, f.id, [p, q], names)
            except ValueError:
                continue
            step = RefoldStep(unmerges=(u,), cuts=tuple(seam),
                              glues=tuple(replace(s, reversed=not s.reversed) for s in seam), label="interior")
        try:
            if not is_connected(apply_cuts(m, step)):
                continue
            apply_step(m, step)
        except ValueError:
            continue
        return step
    return None


def star_polygon(n: int, rng: random.Random, area: float | None = None) -> list[Point2]:
    """A random simple, usually non-convex polygon, star-shaped about the origin (``n >= 5``)."""
    # jittered angles keep every gap below pi, so each ray from the origin meets the ring once
    angles = [2 * math.pi * (i + 0.8 * rng.random()) / n for i in range(n)]
    ring = [P(r * math.cos(a), r * math.sin(a)) for a, r in zip(angles, (rng.uniform(0.4, 1.0) for _ in angles))]
    if area is not None:
        s = math.sqrt(area / geom.area(ring))
        ring = [P(p[0] * s, p[1] * s) for p in ring]
    return ring
