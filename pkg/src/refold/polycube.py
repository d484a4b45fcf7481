"""Tree-shaped polycubes and their refolding by grid-edge cuts.

Cubes sit at integer cells.  The surface of a tree-shaped polycube is the
union of the cubes' unit squares minus the faces where tree-joined cubes
touch; it is always a closed manifold of area 4n + 2, even when cubes
overlap in space.  A move relocates or reparents one leaf cube and is
realized as a single :class:`~refold.manifold.RefoldStep` whose cuts and glues
are whole unit grid edges.

Manifold faces carry *material* names that never change along a plan; a
:class:`Labels` map says where each material square currently sits on the
polycube (cube, direction) and how its edges are numbered there.
"""

from __future__ import annotations

import functools
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .geom import P
from .manifold import (
    Arc,
    Face,
    Glue,
    Manifold,
    RefoldStep,
    StepError,
    apply_step,
    invert_step,
    labeled_isomorphic,
    make_manifold,
    relabel,
)
from .plan import Plan

Vec = tuple[int, int, int]
Loc = tuple[int, Vec]  # (cube index, outward direction)

DIRS: tuple[Vec, ...] = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))
_AXES = "xyz"
_SQUARE = (P(0, 0), P(1, 0), P(1, 1), P(0, 1))


class PolycubeError(ValueError):
    code = "PolycubeError"


class NotALeaf(PolycubeError):
    code = "NotALeaf"


class NoSupportingSurface(PolycubeError):
    code = "NoSupportingSurface"


class WouldSelfIntersect(PolycubeError):
    code = "WouldSelfIntersect"


class SizeMismatch(PolycubeError):
    code = "SizeMismatch"


class NotATree(PolycubeError):
    code = "NotATree"


class RoutingFailed(PolycubeError):
    code = "RoutingFailed"


# --- small integer vector helpers ------------------------------------------------------


def add(a: Vec, b: Vec) -> Vec:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def sub(a: Vec, b: Vec) -> Vec:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def neg(a: Vec) -> Vec:
    return (-a[0], -a[1], -a[2])


def scale(a: Vec, k: int) -> Vec:
    return (a[0] * k, a[1] * k, a[2] * k)


def dot3(a: Vec, b: Vec) -> int:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def cross3(a: Vec, b: Vec) -> Vec:
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def dir_name(d: Vec) -> str:
    k = next(i for i in range(3) if d[i])
    return ("+" if d[k] > 0 else "-") + _AXES[k]


def perpendicular(d: Vec) -> list[Vec]:
    return [e for e in DIRS if dot3(e, d) == 0]


# --- the polycube value -------------------------------------------------------------


@dataclass(frozen=True)
class Polycube:
    """Cubes ``cells[i]`` joined face to face along ``tree`` edges ``(i, j)``, i < j."""

    cells: tuple[Vec, ...]
    tree: frozenset[tuple[int, int]]

    @classmethod
    def make(cls, cells: Iterable[Sequence[int]], tree: Iterable[Sequence[int]] | None = None) -> "Polycube":
        cs = tuple(tuple(int(v) for v in c) for c in cells)
        if tree is None:
            edges = {(i, j) for i, j in itertools.combinations(range(len(cs)), 2)
                     if sum(abs(a - b) for a, b in zip(cs[i], cs[j])) == 1}
        else:
            edges = {tuple(sorted((int(i), int(j)))) for i, j in tree}
        return cls(cs, frozenset(edges))  # type: ignore[arg-type]

    @property
    def n(self) -> int:
        return len(self.cells)

    def neighbors(self, i: int) -> list[int]:
        return _adjacency(self)[0].get(i, [])

    def joined(self, i: int, d: Vec) -> int | None:
        """The cube tree-joined to ``i`` across its face in direction ``d``."""
        hit = _adjacency(self)[1].get((i, d))
        if hit is None:
            return None
        if len(hit) > 1:
            raise NotATree(f"cube {i} is joined twice across {dir_name(d)}")
        return hit[0]

    def leaves(self) -> list[int]:
        return [i for i in range(self.n) if len(self.neighbors(i)) == 1]

    def parent_of_leaf(self, i: int) -> int:
        nb = self.neighbors(i)
        if len(nb) != 1:
            raise NotALeaf(f"cube {i} has {len(nb)} tree neighbours")
        return nb[0]

    def at(self, cell: Vec, exclude: int | None = None) -> list[int]:
        return [i for i, c in enumerate(self.cells) if c == cell and i != exclude]

    def with_change(self, leaf: int, cell: Vec, old_parent: int, new_parent: int) -> "Polycube":
        cells = list(self.cells)
        cells[leaf] = cell
        tree = set(self.tree)
        tree.discard(tuple(sorted((leaf, old_parent))))
        tree.add(tuple(sorted((leaf, new_parent))))
        return Polycube(tuple(cells), frozenset(tree))  # type: ignore[arg-type]

    def to_json(self) -> dict:
        return {"cells": [list(c) for c in self.cells], "tree": sorted([list(e) for e in self.tree])}

    @classmethod
    def from_json(cls, d: dict) -> "Polycube":
        return cls.make(d["cells"], d.get("tree"))


@functools.lru_cache(maxsize=4096)
def _adjacency(pc: Polycube):
    nb: dict[int, list[int]] = {}
    across: dict[tuple[int, Vec], list[int]] = {}
    for i, j in sorted(pc.tree):
        nb.setdefault(i, []).append(j)
        nb.setdefault(j, []).append(i)
        if 0 <= i < pc.n and 0 <= j < pc.n:
            across.setdefault((i, sub(pc.cells[j], pc.cells[i])), []).append(j)
            across.setdefault((j, sub(pc.cells[i], pc.cells[j])), []).append(i)
    return {k: sorted(v) for k, v in nb.items()}, across


def validate_polycube(pc: Polycube) -> dict:
    """Diagnostics: tree shape, duplicates, well-separation and surface area."""
    n = pc.n
    unit = all(sum(abs(a - b) for a, b in zip(pc.cells[i], pc.cells[j])) == 1 for i, j in pc.tree)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in pc.tree:
        parent[find(i)] = find(j)
    connected = len({find(i) for i in range(n)}) == 1 if n else False
    is_tree = connected and len(pc.tree) == n - 1 and unit and all(0 <= i < n and 0 <= j < n for i, j in pc.tree)
    seen: dict[Vec, int] = {}
    dup = False
    for c in pc.cells:
        dup = dup or c in seen
        seen[c] = 1
    separated = True
    for i, j in itertools.combinations(range(n), 2):
        if sum(abs(a - b) for a, b in zip(pc.cells[i], pc.cells[j])) == 1 and (i, j) not in pc.tree:
            separated = False
            break
    exposed = sum(1 for i in range(n) for d in DIRS if _safe_joined(pc, i, d) is None)
    return {
        "n": n,
        "tree": is_tree,
        "self_intersecting": dup,
        "well_separated": separated,
        "surface_area": exposed,
        "expected_area": 4 * n + 2,
    }


def _safe_joined(pc: Polycube, i: int, d: Vec):
    try:
        return pc.joined(i, d)
    except NotATree:
        return -1


def _require_tree(pc: Polycube) -> None:
    r = validate_polycube(pc)
    if not r["tree"]:
        raise NotATree("cubes and joins do not form a tree")


# --- surface ----------------------------------------------------------------------


def _frame(d: Vec) -> tuple[Vec, Vec]:
    u = next(e for e in DIRS if dot3(e, d) == 0 and sum(e) > 0)
    return u, cross3(d, u)


@functools.lru_cache(maxsize=65536)
def face_corners(cell: Vec, d: Vec) -> tuple[Vec, ...]:
    """Corners in doubled coordinates, counterclockwise seen from outside."""
    u, v = _frame(d)
    c = add(scale(cell, 2), d)
    return (
        sub(sub(c, u), v),
        sub(add(c, u), v),
        add(add(c, u), v),
        add(sub(c, u), v),
    )


def loc_name(loc: Loc) -> str:
    return f"c{loc[0]}{dir_name(loc[1])}"


def exposed_faces(pc: Polycube) -> list[Loc]:
    return [(i, d) for i in range(pc.n) for d in DIRS if pc.joined(i, d) is None]


@functools.lru_cache(maxsize=256)
def surface_pairs(pc: Polycube) -> dict[tuple[Loc, int], tuple[Loc, int, bool]]:
    """For every exposed face edge, the face edge glued to it and the orientation flag."""
    out: dict[tuple[Loc, int], tuple[Loc, int, bool]] = {}
    for i, d in exposed_faces(pc):
        cs = face_corners(pc.cells[i], d)
        ctr = add(scale(pc.cells[i], 2), d)
        for k in range(4):
            p, q = cs[k], cs[(k + 1) % 4]
            mid2 = add(p, q)  # twice the edge midpoint
            b = sub(mid2, scale(ctr, 2))
            b = (b[0] // 2, b[1] // 2, b[2] // 2)
            cur, f = i, d
            for _ in range(4 * pc.n + 4):
                if pc.joined(cur, b) is None:
                    break
                cur, f, b = pc.joined(cur, b), neg(b), f
            else:  # pragma: no cover
                raise NotATree("edge walk did not terminate")
            other = face_corners(pc.cells[cur], b)
            k2 = next(j for j in range(4) if {other[j], other[(j + 1) % 4]} == {p, q})
            rev = other[k2] == q
            out[((i, d), k)] = ((cur, b), k2, rev)
    return out


def surface(pc: Polycube) -> Manifold:
    """The surface manifold with faces named by location (``c3+x`` ...)."""
    pairs = surface_pairs(pc)
    faces = [Face(loc_name(loc), _SQUARE, "cube") for loc in exposed_faces(pc)]
    glues = []
    for (la, ka), (lb, kb, rev) in pairs.items():
        if (la, ka) < (lb, kb):
            glues.append(Glue(Arc(loc_name(la), ka, 0.0, 1.0), Arc(loc_name(lb), kb, 0.0, 1.0), rev))
    return make_manifold(faces, glues)


# --- labels: material squares and where they sit ------------------------------------


@dataclass
class Labels:
    """material name -> (location, shift): material edge k is location edge k + shift."""

    where: dict[str, tuple[Loc, int]]

    @classmethod
    def initial(cls, pc: Polycube) -> "Labels":
        return cls({loc_name(l): (l, 0) for l in exposed_faces(pc)})

    def inverse(self) -> dict[Loc, tuple[str, int]]:
        return {loc: (m, s) for m, (loc, s) in self.where.items()}

    def to_locations(self) -> dict[str, str]:
        return {m: loc_name(loc) for m, (loc, _) in self.where.items()}


def manifold_at(pc: Polycube, labels: Labels) -> Manifold:
    """The surface of ``pc`` written with material names."""
    inv = labels.inverse()
    pairs = surface_pairs(pc)
    faces = [Face(m, _SQUARE, "cube") for m in sorted(labels.where)]
    glues = []
    for (la, ka), (lb, kb, rev) in pairs.items():
        if (la, ka) < (lb, kb):
            ma, sa = inv[la]
            mb, sb = inv[lb]
            glues.append(Glue(Arc(ma, (ka - sa) % 4, 0.0, 1.0), Arc(mb, (kb - sb) % 4, 0.0, 1.0), rev))
    return make_manifold(faces, glues)


def surface_matches(m: Manifold, pc: Polycube, labels: Labels) -> bool:
    """Whether material manifold ``m`` is the surface of ``pc`` under ``labels``."""
    return labeled_isomorphic(relabel(m, labels.to_locations()), surface(pc))


# --- moves ------------------------------------------------------------------------


Rigid = tuple[tuple[Vec, Vec, Vec], Vec]  # rows of R, translation; acts on doubled coords

_I3 = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def _apply(T: Rigid, x: Vec) -> Vec:
    R, t = T
    return add((dot3(R[0], x), dot3(R[1], x), dot3(R[2], x)), t)


def _lin(T: Rigid, x: Vec) -> Vec:
    R, _ = T
    return (dot3(R[0], x), dot3(R[1], x), dot3(R[2], x))


def _translation(d: Vec) -> Rigid:
    return (_I3, scale(d, 2))


def _about(R, center2: Vec) -> Rigid:
    """Linear map R applied about a point given in doubled coordinates."""
    Rc = (dot3(R[0], center2), dot3(R[1], center2), dot3(R[2], center2))
    return (R, sub(center2, Rc))


def _quarter(axis: Vec) -> tuple[Vec, Vec, Vec]:
    """Rotation by +90 degrees about a unit axis."""
    cols = []
    for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
        # R e = (a.e) a + a x e
        a = axis
        ae = dot3(a, e)
        c = cross3(a, e)
        cols.append(add(scale(a, ae), c))
    return tuple(tuple(cols[j][i] for j in range(3)) for i in range(3))  # type: ignore[return-value]


def _half(axis: Vec) -> tuple[Vec, Vec, Vec]:
    a = axis
    return tuple(tuple(2 * a[i] * a[j] - (1 if i == j else 0) for j in range(3)) for i in range(3))  # type: ignore


@dataclass
class GridMove:
    kind: str
    leaf: int
    old_parent: int
    new_parent: int
    old_cell: Vec
    new_cell: Vec
    cuts: list[tuple[tuple[float, ...], tuple[float, ...]]] = field(default_factory=list)
    glues: list[tuple[tuple[float, ...], tuple[float, ...]]] = field(default_factory=list)

    def inverse(self) -> "GridMove":
        kind = {"slide": "slide", "reflex-slide": "reflex-slide", "rotate": "rotate"}[self.kind]
        return GridMove(kind, self.leaf, self.new_parent, self.old_parent, self.new_cell, self.old_cell,
                        list(self.glues), list(self.cuts))

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "leaf": self.leaf,
            "oldParent": self.old_parent,
            "newParent": self.new_parent,
            "oldCell": list(self.old_cell),
            "newCell": list(self.new_cell),
            "cuts": [[list(p), list(q)] for p, q in self.cuts],
            "glues": [[list(p), list(q)] for p, q in self.glues],
        }


@dataclass
class MoveResult:
    polycube: Polycube
    move: GridMove
    step: RefoldStep
    labels: Labels


def _check_leaf(pc: Polycube, leaf: int) -> int:
    if not 0 <= leaf < pc.n:
        raise NotALeaf(f"no cube {leaf}")
    return pc.parent_of_leaf(leaf)


def _grid_edge(cell: Vec, d: Vec, k: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    cs = face_corners(cell, d)
    p, q = cs[k], cs[(k + 1) % 4]
    return tuple(x / 2 for x in p), tuple(x / 2 for x in q)


def _realize(before: Polycube, after: Polycube, leaf: int, motions: Sequence[Rigid],
             labels: Labels) -> tuple[RefoldStep, Labels, list, list]:
    """Cheapest cut/glue step turning the surface of ``before`` into that of ``after``.

    Squares of cubes other than ``leaf`` keep their material when they stay
    exposed.  The rest is assigned either by a rigid motion of the leaf (with
    every hand-over of the leftover squares tried) or by growing the
    assignment across glued edges from the unchanged region, one seed edge at
    a time.  The candidate with fewest cuts that keeps the surface connected
    wins.
    """
    p0 = surface_pairs(before)
    p1 = surface_pairs(after)
    ex0 = {l for l, _ in p0}
    ex1 = {l for l, _ in p1}
    pairs0 = {frozenset({(la, ka), (lb, kb)}): rev for (la, ka), (lb, kb, rev) in p0.items()}
    fixed = {loc: (loc, 0) for loc in ex0 if loc[0] != leaf and loc in ex1}
    cands: list[dict[Loc, tuple[Loc, int]]] = []
    for T in motions:
        base = dict(fixed)
        for loc in ex0:
            i, d = loc
            if i != leaf:
                continue
            tgt = (i, _lin(T, d))
            if tgt not in ex1:
                continue
            img = _apply(T, face_corners(before.cells[i], d)[0])
            base[loc] = (tgt, face_corners(after.cells[i], tgt[1]).index(img))
        D = sorted(ex0 - set(base))
        A = sorted(ex1 - {v[0] for v in base.values()})
        for perm in itertools.permutations(A):
            for shifts in itertools.product(range(4), repeat=len(D)):
                phi = dict(base)
                for loc, tgt, sh in zip(D, perm, shifts):
                    phi[loc] = (tgt, sh)
                cands.append(phi)
    seeds = [(fa, ka) for (fa, ka), (fb, _, _) in sorted(p0.items()) if fa not in fixed and fb in fixed]
    for seed in seeds:
        phi = _grow(fixed, seed, p0, p1, ex0, ex1)
        if phi is not None:
            cands.append(phi)
    best = None
    for phi in cands:
        back = {v[0]: (k, v[1]) for k, v in phi.items()}
        after_pairs = {}
        for (la, ka), (lb, kb, rev) in p1.items():
            if (la, ka) > (lb, kb):
                continue
            xa, sa = back[la]
            xb, sb = back[lb]
            after_pairs[frozenset({(xa, (ka - sa) % 4), (xb, (kb - sb) % 4)})] = rev
        cuts = [(k, r) for k, r in pairs0.items() if after_pairs.get(k) != r]
        if best is not None and len(cuts) >= best[0]:
            continue
        if not _connected_after(ex0, pairs0, {k for k, _ in cuts}):
            continue
        glues = [(k, r) for k, r in after_pairs.items() if pairs0.get(k) != r]
        best = (len(cuts), cuts, glues, phi)
    if best is None:
        raise PolycubeError("no connected cut/glue realization found")
    _, cuts, glues, phi = best
    inv = labels.inverse()

    def glue_rec(key, rev) -> Glue:
        (la, ka), (lb, kb) = sorted(key)
        ma, sa = inv[la]
        mb, sb = inv[lb]
        return Glue(Arc(ma, (ka - sa) % 4, 0.0, 1.0), Arc(mb, (kb - sb) % 4, 0.0, 1.0), rev)

    step = RefoldStep(cuts=tuple(glue_rec(k, r) for k, r in sorted(cuts, key=_key_order)),
                      glues=tuple(glue_rec(k, r) for k, r in sorted(glues, key=_key_order)))
    new_where = {}
    for m, (loc, s) in labels.where.items():
        tgt, s2 = phi[loc]
        new_where[m] = (tgt, (s + s2) % 4)
    cut_edges = [_grid_edge(before.cells[l[0]], l[1], k) for (l, k) in (sorted(c)[0] for c, _ in cuts)]
    glue_edges = []
    for key, _ in glues:
        (la, ka) = sorted(key)[0]
        # glue keys are in before-locations; report them where they sit after
        tgt, s2 = phi[la]
        glue_edges.append(_grid_edge(after.cells[tgt[0]], tgt[1], (ka + s2) % 4))
    return step, Labels(new_where), cut_edges, glue_edges


def _grow(fixed, seed, p0, p1, ex0, ex1):
    """Extend ``fixed`` across glued edges, starting from before-edge ``seed``."""
    phi = dict(fixed)
    used = {v[0] for v in phi.values()}
    queue = deque([seed])
    while True:
        while queue:
            fa, ka = queue.popleft()
            if fa in phi:
                continue
            fb, kb, rev = p0[(fa, ka)]
            if fb not in phi:
                continue
            gb, sb = phi[fb]
            h, kh, rev1 = p1[(gb, (kb + sb) % 4)]
            if h in used or rev1 != rev:
                continue
            phi[fa] = (h, (kh - ka) % 4)
            used.add(h)
            for k in range(4):
                nb = p0[(fa, k)][0]
                if nb not in phi:
                    queue.append((nb, p0[(fa, k)][1]))
        rest = sorted(ex0 - set(phi))
        if not rest:
            return phi
        # restart from any remaining square next to the assigned region
        nxt = [(f, k) for f in rest for k in range(4) if p0[(f, k)][0] in phi]
        progress = False
        for f, k in nxt:
            fb, kb, rev = p0[(f, k)]
            gb, sb = phi[fb]
            h, kh, rev1 = p1[(gb, (kb + sb) % 4)]
            if h not in used and rev1 == rev:
                queue.append((f, k))
                progress = True
                break
        if not progress:
            free = sorted(ex1 - used)
            if len(free) != len(rest):
                return None
            for f, h in zip(rest, free):
                phi[f] = (h, 0)
            return phi


def _key_order(item):
    key, _ = item
    return sorted(key)


def _connected_after(faces: set[Loc], pairs: dict, removed: set) -> bool:
    parent = {f: f for f in faces}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for key in pairs:
        if key in removed:
            continue
        ends = tuple(key)
        la, lb = ends[0][0], ends[-1][0]
        parent[find(la)] = find(lb)
    return len({find(f) for f in faces}) == 1


def _finish(pc: Polycube, new: Polycube, kind: str, leaf: int, old_parent: int, new_parent: int,
            motions: Sequence[Rigid], labels: Labels | None) -> MoveResult:
    labels = labels or Labels.initial(pc)
    step, new_labels, cuts, glues = _realize(pc, new, leaf, motions, labels)
    step = RefoldStep(cuts=step.cuts, glues=step.glues,
                      label=f"{kind} cube {leaf}: {pc.cells[leaf]} -> {new.cells[leaf]}")
    mv = GridMove(kind, leaf, old_parent, new_parent, pc.cells[leaf], new.cells[leaf], cuts, glues)
    return MoveResult(new, mv, step, new_labels)


def slide(pc: Polycube, leaf: int, direction: Sequence[int], strict: bool = True,
          labels: Labels | None = None) -> MoveResult:
    """Slide a leaf one unit along the flat surface its parent shares with a neighbour."""
    pa = _check_leaf(pc, leaf)
    d = tuple(direction)
    x = pc.cells[leaf]
    u = sub(x, pc.cells[pa])
    if d not in DIRS or dot3(d, u) != 0:
        raise NoSupportingSurface("slide direction must be perpendicular to the joint")
    support = pc.at(sub(add(x, d), u), exclude=leaf)
    if not support:
        raise NoSupportingSurface(f"no cube under {add(x, d)} to slide onto")
    target = add(x, d)
    if strict and pc.at(target, exclude=leaf):
        raise WouldSelfIntersect(f"cell {target} is occupied")
    new = pc.with_change(leaf, target, pa, support[0])
    return _finish(pc, new, "slide", leaf, pa, support[0], [_translation(d)], labels)


def reflex_slide(pc: Polycube, leaf: int, new_parent: int, strict: bool = True,
                 labels: Labels | None = None) -> MoveResult:
    """Keep the leaf where it is and rejoin it to a different adjacent cube."""
    pa = _check_leaf(pc, leaf)
    x = pc.cells[leaf]
    if new_parent == leaf or not 0 <= new_parent < pc.n:
        raise NoSupportingSurface("bad new parent")
    w = sub(pc.cells[new_parent], x)
    if w not in DIRS:
        raise NoSupportingSurface("new parent is not face-adjacent to the leaf")
    if new_parent == pa:
        raise NoSupportingSurface("leaf is already joined to that cube")
    if dot3(w, sub(x, pc.cells[pa])) != 0:
        raise NoSupportingSurface("new parent must sit across a reflex corner from the old one")
    new = pc.with_change(leaf, x, pa, new_parent)
    return _finish(pc, new, "reflex-slide", leaf, pa, new_parent, [(_I3, (0, 0, 0))], labels)


def rotate(pc: Polycube, leaf: int, direction: Sequence[int], strict: bool = True,
           labels: Labels | None = None) -> MoveResult:
    """Tip a leaf over its parent's edge in ``direction``; it stays joined to the parent."""
    pa = _check_leaf(pc, leaf)
    d = tuple(direction)
    p = pc.cells[pa]
    u = sub(pc.cells[leaf], p)
    if d not in DIRS or dot3(d, u) != 0:
        raise NoSupportingSurface("rotation direction must be perpendicular to the joint")
    target = add(p, d)
    if strict and pc.at(target, exclude=leaf):
        raise WouldSelfIntersect(f"cell {target} is occupied")
    new = pc.with_change(leaf, target, pa, pa)
    axis = cross3(u, d)
    hinge = add(add(scale(p, 2), u), d)
    motions = [_about(_quarter(axis), scale(p, 2)), _about(_half(axis), hinge)]
    return _finish(pc, new, "rotate", leaf, pa, pa, motions, labels)


# --- routing leaves to the line -------------------------------------------------------


def _route(pc: Polycube, leaf: int, goal_cell: Vec, goal_parent: int, strict: bool = True,
           banned: frozenset | set = frozenset()):
    """Shortest move sequence taking ``leaf`` to ``goal_cell`` joined to ``goal_parent``.

    Returns ``[(state, move), ...]``; transitions listed in ``banned`` are skipped.
    """
    occ: dict[Vec, list[int]] = {}
    for i, c in enumerate(pc.cells):
        if i != leaf:
            occ.setdefault(c, []).append(i)
    start = (pc.cells[leaf], pc.parent_of_leaf(leaf))
    goal = (goal_cell, goal_parent)
    prev: dict = {start: None}
    q = deque([start])
    while q:
        st = q.popleft()
        if st == goal:
            break
        x, a = st
        u = sub(x, pc.cells[a])
        for d in perpendicular(u):
            t = add(x, d)
            if t not in occ or not strict:
                for nb in occ.get(sub(t, u), []):
                    nxt = (t, nb)
                    if nxt not in prev and (st, ("slide", d)) not in banned:
                        prev[nxt] = (st, ("slide", d))
                        q.append(nxt)
                t2 = add(pc.cells[a], d)
                if t2 not in occ or not strict:
                    nxt = (t2, a)
                    if nxt not in prev and (st, ("rotate", d)) not in banned:
                        prev[nxt] = (st, ("rotate", d))
                        q.append(nxt)
        for w in perpendicular(u):
            for nb in occ.get(add(x, w), []):
                if nb != a:
                    nxt = (x, nb)
                    if nxt not in prev and (st, ("reflex-slide", nb)) not in banned:
                        prev[nxt] = (st, ("reflex-slide", nb))
                        q.append(nxt)
    if goal not in prev:
        return None
    path = []
    st = goal
    while prev[st] is not None:
        st, mv = prev[st]
        path.append((st, mv))
    return path[::-1]


def _walk(pc: Polycube, leaf: int, goal: Vec, tip: int, strict: bool, labels: Labels,
          attempts: int = 64) -> list[MoveResult] | None:
    """Route ``leaf`` and realize each move, rerouting around moves with no connected realization."""
    banned: set = set()
    for _ in range(attempts):
        path = _route(pc, leaf, goal, tip, strict, banned)
        if path is None:
            return None
        cur, lab, out = pc, labels, []
        for st, (kind, arg) in path:
            fn = {"slide": slide, "rotate": rotate, "reflex-slide": reflex_slide}[kind]
            try:
                r = fn(cur, leaf, arg, strict, lab)
            except PolycubeError:
                banned.add((st, (kind, arg)))
                break
            cur, lab = r.polycube, r.labels
            out.append(r)
        else:
            return out
    return None


def _depths(pc: Polycube, root: int) -> list[int]:
    depth = [-1] * pc.n
    depth[root] = 0
    q = deque([root])
    while q:
        i = q.popleft()
        for j in pc.neighbors(i):
            if depth[j] < 0:
                depth[j] = depth[i] + 1
                q.append(j)
    return depth


@dataclass
class LinePlan:
    start: Polycube
    final: Polycube
    moves: list[GridMove]
    steps: list[RefoldStep]
    states: list[Polycube]
    labels: Labels
    root: int
    line: list[int]
    up: Vec
    history: list[Labels] = field(default_factory=list)  # labels after each state

    @property
    def plan(self) -> Plan:
        return Plan(surface(self.start), list(self.steps))


def line_direction(pc: Polycube, root: int) -> Vec:
    """Direction the line grows from ``root``: away from its neighbour if that ray is clear."""
    nb = pc.neighbors(root)
    away = sub(pc.cells[root], pc.cells[nb[0]]) if nb else (0, 0, 1)
    cand = [away] + [d for d in DIRS if d != away and (not nb or d != neg(away))]
    occupied = set(pc.cells)
    for d in cand:
        if all(add(pc.cells[root], scale(d, k)) not in occupied for k in range(1, pc.n)):
            return d
    return away


def _is_line_above(pc: Polycube, line: list[int], root: int, up: Vec) -> bool:
    return all(pc.cells[c] == add(pc.cells[root], scale(up, k)) for k, c in enumerate(line))


def to_line(pc: Polycube, strict: bool = True, labels: Labels | None = None) -> LinePlan:
    """Move leaves one at a time along the surface until the cubes form a straight line.

    The root is the lexicographically smallest leaf; the line grows from it
    away from its neighbour.  Each round picks the deepest leaf outside the
    line (ties by cell) that can be routed, and walks it to the line's tip.
    """
    _require_tree(pc)
    rep = validate_polycube(pc)
    if strict and rep["self_intersecting"]:
        raise WouldSelfIntersect("input has overlapping cubes")
    labels = labels or Labels.initial(pc)
    if pc.n == 1:
        return LinePlan(pc, pc, [], [], [pc], labels, 0, [0], (0, 0, 1), [labels])
    root = min(pc.leaves(), key=lambda i: pc.cells[i])
    up = line_direction(pc, root)
    line = [root]
    cur = pc
    moves, steps, states = [], [], [pc]
    history = [labels]
    # cubes already stacked straight above the root count as line
    while True:
        nxt = add(pc.cells[root], scale(up, len(line)))
        hit = [j for j in cur.neighbors(line[-1]) if cur.cells[j] == nxt and j not in line]
        if not hit:
            break
        line.append(hit[0])
    for _ in range(pc.n * pc.n * 4):
        if is_line(cur):
            break
        depth = _depths(cur, root)
        cands = sorted((i for i in cur.leaves() if i not in line),
                       key=lambda i: (-depth[i], cur.cells[i]))
        tip = line[-1]
        goal = add(cur.cells[tip], up)
        done = False
        for leaf in cands:
            got = _walk(cur, leaf, goal, tip, strict, labels)
            if got is None:
                continue
            for r in got:
                cur, labels = r.polycube, r.labels
                moves.append(r.move)
                steps.append(r.step)
                states.append(cur)
                history.append(labels)
            line.append(leaf)
            done = True
            break
        if not done:
            raise RoutingFailed("no leaf can reach the top of the line")
    else:  # pragma: no cover
        raise RoutingFailed("line building did not terminate")
    order, axis = line_order(cur)
    return LinePlan(pc, cur, moves, steps, states, labels, root, order, axis, history)


def line_order(pc: Polycube) -> tuple[list[int], Vec]:
    """Cubes of a straight line from one end to the other, and the direction it runs."""
    if pc.n == 1:
        return [0], (0, 0, 1)
    k = next(a for a in range(3) if len({c[a] for c in pc.cells}) > 1)
    order = sorted(range(pc.n), key=lambda i: pc.cells[i][k])
    return order, tuple(1 if a == k else 0 for a in range(3))  # type: ignore[return-value]


# --- pairwise plans ------------------------------------------------------------------


def _rotation_taking(a: Vec, b: Vec) -> tuple[Vec, Vec, Vec]:
    """A proper grid rotation with R a = b."""
    if a == b:
        return _I3
    if a == neg(b):
        axis = next(e for e in DIRS if dot3(e, a) == 0)
        return _half(axis)
    return _quarter(cross3(a, b))


def rename_step(step: RefoldStep, ren: dict[str, tuple[str, int]]) -> RefoldStep:
    """Rename unit-square faces; ``ren[f] = (g, t)`` sends edge k of f to edge k + t of g."""

    def arc(a: Arc) -> Arc:
        g, t = ren[a.face]
        return Arc(g, (a.edge + t) % 4, a.t0, a.t1)

    def glue(x: Glue) -> Glue:
        return Glue(arc(x.a), arc(x.b), x.reversed)

    return RefoldStep(cuts=tuple(glue(c) for c in step.cuts), glues=tuple(glue(g) for g in step.glues),
                      label=step.label)


@dataclass
class PolycubePlan:
    source: Polycube
    target: Polycube
    moves: list[GridMove]
    plan: Plan
    final_labels: dict[str, str]  # material -> location name on the target
    line_p: LinePlan
    line_q: LinePlan

    def __len__(self) -> int:
        return len(self.moves)

    def to_json(self) -> dict:
        return {
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "moves": [mv.to_json() for mv in self.moves],
            "plan": self.plan.to_json(),
            "finalLabels": dict(sorted(self.final_labels.items())),
        }


def plan_polycube(P_: Polycube, Q_: Polycube, strict: bool = True) -> PolycubePlan:
    """Refold P's surface into Q's: P to a line, then Q's line-building run backwards."""
    if P_.n != Q_.n:
        raise SizeMismatch(f"{P_.n} cubes vs {Q_.n}")
    lp = to_line(P_, strict)
    lq = to_line(Q_, strict)
    # match the two lines cube by cube with a grid rotation
    R = _rotation_taking(lq.up, lp.up)
    base_q = scale(lq.final.cells[lq.line[0]], 2)
    base_p = scale(lp.final.cells[lp.line[0]], 2)
    T: Rigid = (R, sub(base_p, (dot3(R[0], base_q), dot3(R[1], base_q), dot3(R[2], base_q))))
    cube_map = dict(zip(lq.line, lp.line))
    inv_p = lp.labels.inverse()
    ren: dict[str, tuple[str, int]] = {}
    for m, ((i, d), s) in lq.labels.where.items():
        j, d2 = cube_map[i], _lin(T, d)
        img = [_apply(T, c) for c in face_corners(lq.final.cells[i], d)]
        cs = face_corners(lp.final.cells[j], d2)
        shift = cs.index(img[0])
        mp, sp = inv_p[(j, d2)]
        # material edge k of m -> q-location edge k+s -> p-location edge k+s+shift -> p-material
        ren[m] = (mp, (s + shift - sp) % 4)
    back_steps = [rename_step(invert_step(st), ren) for st in reversed(lq.steps)]
    steps = list(lp.steps) + back_steps
    moves = list(lp.moves) + [mv.inverse() for mv in reversed(lq.moves)]
    # Q's material names are its starting locations
    final = {mp: mq for mq, (mp, _) in ren.items()}
    plan = Plan(surface(P_), steps)
    return PolycubePlan(P_, Q_, moves, plan, final, lp, lq)


def verify_polycube_plan(pp: PolycubePlan) -> bool:
    m = pp.plan.final()
    return labeled_isomorphic(relabel(m, pp.final_labels), surface(pp.target))


# --- random trees, brute force and export -------------------------------------------


def random_tree(n: int, rng, well_separated: bool = True, max_tries: int = 10000) -> Polycube:
    """Grow a random tree-shaped polycube one face-adjacent cube at a time."""
    cells: list[Vec] = [(0, 0, 0)]
    tree: set[tuple[int, int]] = set()
    occ = {(0, 0, 0)}
    tries = 0
    while len(cells) < n:
        tries += 1
        if tries > max_tries:
            raise RuntimeError("could not grow a tree")
        i = rng.randrange(len(cells))
        d = rng.choice(DIRS)
        c = add(cells[i], d)
        if c in occ:
            continue
        if well_separated and any(add(c, e) in occ and add(c, e) != cells[i] for e in DIRS):
            continue
        cells.append(c)
        occ.add(c)
        tree.add((i, len(cells) - 1))
    return Polycube(tuple(cells), frozenset(tree))


def _canon(pc: Polycube) -> tuple:
    """Translation-normalized cells plus tree edges as cell pairs (cube labels ignored)."""
    lo = tuple(min(c[k] for c in pc.cells) for k in range(3))
    cs = [sub(c, lo) for c in pc.cells]
    return (tuple(sorted(cs)), tuple(sorted(tuple(sorted((cs[i], cs[j]))) for i, j in pc.tree)))


def neighbours(pc: Polycube, strict: bool = True):
    """All configurations one slide, reflex slide or rotation away."""
    for leaf in pc.leaves():
        pa = pc.parent_of_leaf(leaf)
        u = sub(pc.cells[leaf], pc.cells[pa])
        for d in perpendicular(u):
            for fn in (slide, rotate):
                try:
                    yield fn(pc, leaf, d, strict).polycube
                except PolycubeError:
                    pass
        for w in perpendicular(u):
            for nb in pc.at(add(pc.cells[leaf], w), exclude=leaf):
                if nb != pa:
                    yield pc.with_change(leaf, pc.cells[leaf], pa, nb)


def is_line(pc: Polycube) -> bool:
    cs = sorted(pc.cells)
    if len(set(cs)) != len(cs):
        return False
    for k in range(3):
        others = [x for x in range(3) if x != k]
        if all(c[o] == cs[0][o] for c in cs for o in others):
            vals = sorted(c[k] for c in cs)
            return vals == list(range(vals[0], vals[0] + len(vals))) and len(pc.tree) == len(cs) - 1
    return False


def bfs_line_distance(pc: Polycube, strict: bool = True, limit: int = 20000) -> int | None:
    """Fewest moves from ``pc`` to any straight line (exhaustive search)."""
    start = pc
    seen = {_canon(start)}
    q = deque([(start, 0)])
    while q:
        cur, k = q.popleft()
        if is_line(cur):
            return k
        if len(seen) > limit:
            return None
        for nxt in neighbours(cur, strict):
            key = _canon(nxt)
            if key not in seen:
                seen.add(key)
                q.append((nxt, k + 1))
    return None


def to_obj(pc: Polycube) -> str:
    """Wavefront OBJ of the exposed unit squares."""
    lines = [f"# polycube surface, {pc.n} cubes"]
    k = 1
    for i, d in exposed_faces(pc):
        for c in face_corners(pc.cells[i], d):
            lines.append("v {} {} {}".format(*(x / 2 for x in c)))
        lines.append(f"f {k} {k + 1} {k + 2} {k + 3}")
        k += 4
    return "\n".join(lines) + "\n"


def replay_polycube(pp: PolycubePlan) -> Manifold:
    m = pp.plan.start
    for st in pp.plan.steps:
        m = apply_step(m, st)
    return m


__all__ = [
    "DIRS",
    "GridMove",
    "Labels",
    "LinePlan",
    "MoveResult",
    "NoSupportingSurface",
    "NotALeaf",
    "NotATree",
    "Polycube",
    "PolycubeError",
    "PolycubePlan",
    "RoutingFailed",
    "SizeMismatch",
    "StepError",
    "WouldSelfIntersect",
    "bfs_line_distance",
    "exposed_faces",
    "face_corners",
    "is_line",
    "manifold_at",
    "plan_polycube",
    "random_tree",
    "reflex_slide",
    "rename_step",
    "rotate",
    "slide",
    "surface",
    "surface_matches",
    "to_line",
    "to_obj",
    "validate_polycube",
    "verify_polycube_plan",
]
