"""An intermediate manifold sharing an unfolding with each of several inputs.

All inputs are first re-represented on one common set of faces, each input
being just a different gluing of those faces.  The intermediate ℐ glues a
little of every edge the way each input does, so for any input *i* one step
suffices: cut every gluing of ℐ that disagrees with input *i*, then glue
the freed boundary as input *i* does.  The kept part contains a piece of
every input-*i* pairing, so the cut phase cannot disconnect the surface.

Two constructions are provided.

* Nested segments (:func:`subdivide`, :func:`build_intermediate`,
  :func:`build_intermediate_n`): needs an edge-to-edge common
  triangulation.  Every triangle edge is split into ``2k`` equal segments and
  the *i*-th nested pair (segments ``i`` and ``2k-1-i``) is glued as input
  *i*.  Reversal maps a nested pair onto itself, so flipped gluings work too.
* Windows (:func:`window_intermediate`): works directly on dissection
  pieces whose pairings need not be edge to edge.  Each input keeps a short
  window of each of its pairings, the remainder is glued as the last input,
  and whatever is left over is closed up by folding it in half.

:func:`plan_intermediate` picks the first when the common triangulation can
be computed and falls back to the second otherwise.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Sequence

from . import dissect, geom
from .dissect import CommonTriangulation, DissectionPiece
from .manifold import (
    Arc,
    CutDisconnects,
    Face,
    Glue,
    Manifold,
    RefoldStep,
    apply_cuts,
    apply_step,
    invert_step,
    is_connected,
    labeled_isomorphic,
    make_manifold,
    step_from_json,
    step_to_json,
    manifold_from_json,
    manifold_to_json,
    validate,
)

SCHEMA_TWO_STEP = "refold.two-step/1"
LETTERS = "ABCDEFGHIJKL"
_EPS = 1e-9


class IntermediateError(ValueError):
    code = "IntermediateError"


class ConnectivityLost(IntermediateError):
    code = "ConnectivityLost"


Interval = tuple[float, float]
EdgeKey = tuple[str, int]


# --- interval bookkeeping ------------------------------------------------------------


def _subtract(lo: float, hi: float, holes: Sequence[Interval], eps: float = _EPS) -> list[Interval]:
    out = []
    t = lo
    for a, b in sorted(holes):
        if b <= t + eps or a >= hi - eps:
            continue
        if a - t > eps:
            out.append((t, min(a, hi)))
        t = max(t, b)
        if t >= hi - eps:
            break
    if hi - t > eps:
        out.append((t, hi))
    return out


def _occupancy(glues: Sequence[Glue]) -> dict[EdgeKey, list[Interval]]:
    occ: dict[EdgeKey, list[Interval]] = defaultdict(list)
    for g in glues:
        for x in (g.a, g.b):
            occ[(x.face, x.edge)].append((x.t0, x.t1))
    return occ


def _holes_on_a(g: Glue, occ: dict[EdgeKey, list[Interval]]) -> list[Interval]:
    """Occupied parts of either side of ``g``, expressed in ``g.a``'s parameter."""
    holes = [(max(a, g.a.t0), min(b, g.a.t1)) for a, b in occ.get((g.a.face, g.a.edge), ())
             if min(b, g.a.t1) > max(a, g.a.t0)]
    for a, b in occ.get((g.b.face, g.b.edge), ()):
        lo, hi = max(a, g.b.t0), min(b, g.b.t1)
        if hi <= lo:
            continue
        flipped = g.flipped()
        u0, u1 = flipped.partner_interval(g.b, g.a, lo, hi)
        holes.append((min(u0, u1), max(u0, u1)))
    return holes


def _minus(glues: Sequence[Glue], occ: dict[EdgeKey, list[Interval]]) -> list[Glue]:
    """The parts of ``glues`` whose two sides both avoid ``occ``."""
    out = []
    for g in glues:
        for u0, u1 in _subtract(g.a.t0, g.a.t1, _holes_on_a(g, occ)):
            out.append(g.sub(u0, u1))
    return out


class _Lookup:
    """Answers whether a glue record agrees with a reference gluing."""

    def __init__(self, glues: Sequence[Glue]):
        self.by_edge: dict[EdgeKey, list[Glue]] = defaultdict(list)
        for g in glues:
            self.by_edge[(g.a.face, g.a.edge)].append(g)
            self.by_edge[(g.b.face, g.b.edge)].append(g.flipped())

    def agrees(self, r: Glue, tol: float = 1e-7) -> bool:
        for g in self.by_edge.get((r.a.face, r.a.edge), ()):
            if g.reversed != r.reversed or r.a.t0 < g.a.t0 - tol or r.a.t1 > g.a.t1 + tol:
                continue
            s = g.sub(max(r.a.t0, g.a.t0), min(r.a.t1, g.a.t1))
            if s.b.face == r.b.face and s.b.edge == r.b.edge and abs(s.b.t0 - r.b.t0) <= tol \
                    and abs(s.b.t1 - r.b.t1) <= tol:
                return True
        return False


# --- the common complex ---------------------------------------------------------------


@dataclass
class CommonComplex:
    """One face set with one gluing per input (internal seams included in each)."""

    faces: list[Face]
    gluings: list[list[Glue]]

    @property
    def k(self) -> int:
        return len(self.gluings)

    def manifold(self, i: int) -> Manifold:
        return make_manifold(self.faces, self.gluings[i])

    @classmethod
    def from_triangulation(cls, ct: CommonTriangulation) -> "CommonComplex":
        return cls(list(ct.triangles), [ct.pairings(i) for i in range(ct.k)])

    @classmethod
    def from_pieces(cls, pieces: Sequence[DissectionPiece], sources: Sequence[Manifold],
                    eps: float = 1e-9) -> "CommonComplex":
        scale = max(1.0, sum(pc.area for pc in pieces) ** 0.5)
        tol = eps * scale * 10
        faces = [Face(pc.id, tuple(pc.ring), "piece") for pc in pieces]
        gluings = []
        for s, src in enumerate(sources):
            out = []
            for pr in dissect._edge_pairings(pieces, src, s, tol):
                out.append(Glue(Arc(pieces[pr.a[0]].id, pr.a[1], pr.a0, pr.a1),
                                Arc(pieces[pr.b[0]].id, pr.b[1], pr.b0, pr.b1), pr.rev))
            gluings.append(out)
        return cls(faces, gluings)


# --- nested segments on a common triangulation -----------------------------------------


@dataclass
class SubdividedTriangulation:
    """A common triangulation whose edges are each cut into ``2k`` equal segments.

    ``labels[(face, edge)]`` names the segments in order; for ``k = 2`` they
    are letter pairs walking around the triangle (``AB, BC, ...,  LA``), and
    ``"i.j"`` (edge ``i``, segment ``j``) otherwise.  Segments ``j`` and
    ``2k-1-j`` form nested pair ``j``, which is glued as input ``j``.
    """

    ct: CommonTriangulation
    k: int
    labels: dict[EdgeKey, list[str]] = field(default_factory=dict)

    def breakpoints(self, face: str, edge: int) -> list[float]:
        L = next(f for f in self.ct.triangles if f.id == face).edge_length(edge)
        return [L * j / (2 * self.k) for j in range(2 * self.k + 1)]

    def pair_of(self, j: int) -> int:
        return min(j, 2 * self.k - 1 - j)

    def segment_glues(self, i: int, pair: int | None = None) -> list[Glue]:
        """Input ``i``'s gluing restricted to nested pair ``pair`` (default: ``i``)."""
        pair = i if pair is None else pair
        m = 2 * self.k
        out = []
        for g in self.ct.pairings(i):
            L = g.a.length
            for j in (pair, m - 1 - pair):
                out.append(g.sub(g.a.t0 + L * j / m, g.a.t0 + L * (j + 1) / m))
        return out

    def complex(self) -> CommonComplex:
        return CommonComplex.from_triangulation(self.ct)


def subdivide(ct: CommonTriangulation, k: int | None = None) -> SubdividedTriangulation:
    k = ct.k if k is None else k
    if k < 2:
        raise IntermediateError("need at least two manifolds")
    if k > ct.k:
        raise IntermediateError(f"triangulation carries {ct.k} gluings, asked for {k}")
    lengths = {t.id: [t.edge_length(e) for e in range(t.n)] for t in ct.triangles}
    for i in range(k):
        for g in ct.pairings(i):
            for x in (g.a, g.b):
                L = lengths[x.face][x.edge]
                if abs(x.t0) > 1e-7 * max(1.0, L) or abs(x.t1 - L) > 1e-7 * max(1.0, L):
                    raise IntermediateError(f"gluing {i} is not edge to edge at {x}")
    labels: dict[EdgeKey, list[str]] = {}
    m = 2 * k
    for t in ct.triangles:
        for e in range(t.n):
            if k == 2 and t.n == 3:
                labels[(t.id, e)] = [LETTERS[4 * e + j] + LETTERS[(4 * e + j + 1) % 12] for j in range(4)]
            else:
                labels[(t.id, e)] = [f"{e}.{j}" for j in range(m)]
    return SubdividedTriangulation(ct, k, labels)


# --- generic assembly --------------------------------------------------------------------


def script_to(faces: Sequence[Face], inter: Sequence[Glue], target: Sequence[Glue], label: str = "") -> RefoldStep:
    """One step from the gluing ``inter`` to the gluing ``target`` on the same faces.

    Records of ``inter`` that already agree with ``target`` stay; all others
    are cut, and ``target`` minus what stayed is glued.
    """
    look = _Lookup(target)
    keep, cut = [], []
    for r in inter:
        (keep if look.agrees(r) else cut).append(r)
    glue = _minus(target, _occupancy(keep))
    return RefoldStep(cuts=tuple(cut), glues=tuple(glue), label=label)


def _check(m: Manifold, step: RefoldStep, want: Manifold, name: str) -> Manifold:
    after_cut = apply_cuts(m, step)
    if not is_connected(after_cut):
        raise ConnectivityLost(f"{name}: the cut phase disconnects the surface")
    try:
        out = apply_step(m, step)
    except CutDisconnects as e:  # pragma: no cover - guarded above
        raise ConnectivityLost(str(e)) from e
    if not labeled_isomorphic(out, want):
        raise IntermediateError(f"{name}: replay does not reproduce the target gluing")
    return out


def _pair_free(faces: Sequence[Face], glues: Sequence[Glue], eps: float) -> tuple[list[Glue], dict]:
    """Glue leftover boundary arcs of equal length, longest first."""
    m = make_manifold(faces, glues)
    free = sorted(m.free_arcs(), key=lambda a: -a.length)
    used = [False] * len(free)
    out = []
    for i, a in enumerate(free):
        if used[i]:
            continue
        for j in range(i + 1, len(free)):
            if not used[j] and abs(free[j].length - a.length) <= eps * max(1.0, a.length):
                used[i] = used[j] = True
                out.append(Glue(a, replace(free[j], t1=free[j].t0 + a.length), True))
                break
    left = [a for a, u in zip(free, used) if not u]
    return out, {"paired_boundary": len(out), "unpaired_boundary_length": sum(a.length for a in left)}


def _tape(faces: Sequence[Face], glues: Sequence[Glue]) -> list[Glue]:
    """Close every remaining boundary arc by folding their concatenation in half."""
    arcs = make_manifold(faces, glues).free_arcs()
    if not arcs:
        return []
    starts, s = [], 0.0
    for a in arcs:
        starts.append(s)
        s += a.length
    lam = s
    cuts = sorted(set([round(x, 12) for x in starts] + [round(lam - x, 12) for x in starts]
                      + [round(lam / 2, 12), round(lam, 12), 0.0]))
    pts = [cuts[0]]
    for x in cuts[1:]:
        if x - pts[-1] > 1e-10:
            pts.append(x)

    def arc_at(u: float, v: float) -> Arc:
        lo, hi = 0, len(arcs) - 1
        mid = (u + v) / 2
        while lo < hi:
            j = (lo + hi + 1) // 2
            if starts[j] <= mid:
                lo = j
            else:
                hi = j - 1
        a = arcs[lo]
        return Arc(a.face, a.edge, a.t0 + (u - starts[lo]), a.t0 + (v - starts[lo]))

    out = []
    for u, v in zip(pts, pts[1:]):
        if v > lam / 2 + 1e-10:
            break
        out.append(Glue(arc_at(u, v), arc_at(lam - v, lam - u), True))
    return out


@dataclass
class NStepPlan:
    """An intermediate ℐ and, for every input ``i``, one step ``ℐ → input i``."""

    intermediate: Manifold
    scripts: list[RefoldStep]
    targets: list[Manifold]
    method: str
    diagnostics: dict = field(default_factory=dict)

    def verify(self) -> list[dict]:
        rows = []
        for i, (s, t) in enumerate(zip(self.scripts, self.targets)):
            row = {"target": i, "connected_after_cut": is_connected(apply_cuts(self.intermediate, s))}
            try:
                row["replays"] = labeled_isomorphic(apply_step(self.intermediate, s), t)
            except Exception as e:
                row["replays"] = False
                row["error"] = str(e)
            try:
                row["inverse_replays"] = labeled_isomorphic(apply_step(t, invert_step(s)), self.intermediate)
            except Exception as e:
                row["inverse_replays"] = False
                row["error"] = str(e)
            rows.append(row)
        return rows


@dataclass
class TwoStepPlan:
    """``source --script1--> intermediate --script2--> target``."""

    source: Manifold
    intermediate: Manifold
    target: Manifold
    script1: RefoldStep
    script2: RefoldStep
    method: str = "nested"
    diagnostics: dict = field(default_factory=dict)
    pieces: list[DissectionPiece] = field(default_factory=list)

    @property
    def steps(self) -> list[RefoldStep]:
        return [self.script1, self.script2]

    def report(self) -> dict:
        rep = validate(self.intermediate)
        out = {"method": self.method, "intermediate_boundary": rep.boundary_length,
               "intermediate_closed": rep.closed,
               "area": [self.source.area, self.intermediate.area, self.target.area]}
        for name, m, s, want in (("script1", self.source, self.script1, self.intermediate),
                                 ("script2", self.intermediate, self.script2, self.target)):
            out[f"{name}_connected_after_cut"] = is_connected(apply_cuts(m, s))
            try:
                out[f"{name}_replays"] = labeled_isomorphic(apply_step(m, s), want)
            except Exception as e:
                out[f"{name}_replays"] = False
                out[f"{name}_error"] = str(e)
        out["ok"] = all(out[k] for k in ("script1_connected_after_cut", "script2_connected_after_cut",
                                           "script1_replays", "script2_replays"))
        return out

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_TWO_STEP,
            "method": self.method,
            "source": manifold_to_json(self.source),
            "intermediate": manifold_to_json(self.intermediate),
            "target": manifold_to_json(self.target),
            "script1": step_to_json(self.script1),
            "script2": step_to_json(self.script2),
            "diagnostics": self.diagnostics,
            "pieces": [p.to_json() for p in self.pieces],
        }

    @classmethod
    def from_json(cls, d: dict) -> "TwoStepPlan":
        if d.get("schema") != SCHEMA_TWO_STEP:
            raise IntermediateError(f"unsupported schema {d.get('schema')!r}")
        return cls(manifold_from_json(d["source"]), manifold_from_json(d["intermediate"]),
                   manifold_from_json(d["target"]), step_from_json(d["script1"]), step_from_json(d["script2"]),
                   d.get("method", "nested"), d.get("diagnostics", {}),
                   [DissectionPiece.from_json(p) for p in d.get("pieces", [])])


def _assemble(faces: Sequence[Face], inter_glues: list[Glue], gluings: Sequence[Sequence[Glue]],
              method: str, diagnostics: dict, check: bool) -> NStepPlan:
    inter = make_manifold(faces, inter_glues)
    targets = [make_manifold(faces, g) for g in gluings]
    scripts = [script_to(faces, inter.glues, t.glues, label=f"to input {i}") for i, t in enumerate(targets)]
    if check:
        for i, (s, t) in enumerate(zip(scripts, targets)):
            _check(inter, s, t, f"script to input {i}")
    return NStepPlan(inter, scripts, targets, method, diagnostics)


def build_intermediate_n(st: SubdividedTriangulation, check: bool = True, eps: float = 1e-9) -> NStepPlan:
    """ℐ gluing nested pair ``i`` as input ``i``; one script per input."""
    faces = st.ct.triangles
    glues: list[Glue] = []
    for i in range(st.k):
        glues.extend(st.segment_glues(i))
    extra, diag = _pair_free(faces, glues, eps)
    diag["segments_per_edge"] = 2 * st.k
    return _assemble(faces, glues + extra, [st.ct.pairings(i) for i in range(st.k)], "nested", diag, check)


def _two_step(n: NStepPlan) -> TwoStepPlan:
    return TwoStepPlan(n.targets[0], n.intermediate, n.targets[1], invert_step(n.scripts[0]), n.scripts[1],
                       n.method, n.diagnostics)


def build_intermediate(st: SubdividedTriangulation, check: bool = True, eps: float = 1e-9) -> TwoStepPlan:
    """Outer segments glued as P, inner ones as Q; script1 goes P → ℐ, script2 ℐ → Q."""
    if st.k != 2:
        raise IntermediateError("build_intermediate needs exactly two gluings; use build_intermediate_n")
    plan = _two_step(build_intermediate_n(st, check, eps))
    if check:
        _check(plan.source, plan.script1, plan.intermediate, "script1")
    return plan


# --- windows on arbitrary pieces ----------------------------------------------------------


def _van_der_corput(n: int) -> list[float]:
    out = []
    for i in range(1, n + 1):
        x, d = 0.0, 0.5
        while i:
            if i & 1:
                x += d
            i >>= 1
            d /= 2
        out.append(x)
    return out


_POSITIONS = [0.5] + _van_der_corput(63)


def _fits(occ: dict[EdgeKey, list[Interval]], x: Arc, gap: float) -> bool:
    return all(b + gap <= x.t0 or a - gap >= x.t1 for a, b in occ.get((x.face, x.edge), ()))


def window_intermediate(cx: CommonComplex, fraction: float | None = None, check: bool = True) -> NStepPlan:
    """ℐ for a complex whose gluings are not edge to edge.

    Every pairing of every input keeps a window of ``fraction`` of its
    length (default ``1/(4k)``), placed where neither the window nor its
    image touch an earlier window.
    """
    k = cx.k
    fraction = fraction or 1.0 / (4 * k)
    occ: dict[EdgeKey, list[Interval]] = defaultdict(list)
    windows: list[list[Glue]] = [[] for _ in range(k)]
    shrunk = 0
    # short pairings first: they have the least room
    order = sorted(((g.a.length, i, g.a.key(), g.b.key(), g) for i, gl in enumerate(cx.gluings) for g in gl),
                   key=lambda r: r[:4])
    for L, i, _, _, g in order:
        d = L * fraction
        placed = None
        while placed is None and d > L * 1e-4:
            gap = d / 4
            for q in _POSITIONS:
                u0 = g.a.t0 + (L - d) * q
                w = g.sub(u0, u0 + d)
                if (w.a.face, w.a.edge) == (w.b.face, w.b.edge) and \
                        not (w.a.t1 + gap <= w.b.t0 or w.b.t1 + gap <= w.a.t0):
                    continue
                if _fits(occ, w.a, gap) and _fits(occ, w.b, gap):
                    placed = w
                    break
            if placed is None:
                d /= 2
                shrunk += 1
        if placed is None:
            raise IntermediateError(f"no room for a window on {g.a}")
        windows[i].append(placed)
        for x in (placed.a, placed.b):
            occ[(x.face, x.edge)].append((x.t0, x.t1))
    inter: list[Glue] = [w for ws in windows for w in ws]
    inter += _minus(cx.gluings[-1], occ)
    folded = _tape(cx.faces, inter)
    inter += folded
    diag = {"windows": sum(map(len, windows)), "shrunk_windows": shrunk, "folded_arcs": len(folded),
            "folded_length": sum(g.a.length for g in folded) * 2, "window_fraction": fraction}
    return _assemble(cx.faces, inter, cx.gluings, "windows", diag, check)


def window_two_step(cx: CommonComplex, check: bool = True) -> TwoStepPlan:
    if cx.k != 2:
        raise IntermediateError("two gluings expected")
    plan = _two_step(window_intermediate(cx, check=check))
    if check:
        _check(plan.source, plan.script1, plan.intermediate, "script1")
    return plan


# --- front door -----------------------------------------------------------------------------


def plan_intermediate_n(sources: Sequence[Manifold], eps: float = 1e-9, method: str = "auto",
                        max_passes: int = 200) -> tuple[NStepPlan, list[DissectionPiece]]:
    """ℐ and one script per source, plus the faces of the common complex as placed pieces.

    ``method`` is "nested" (needs the common triangulation), "windows", or
    "auto" (nested when the triangulation settles).
    """
    if len(sources) < 2:
        raise IntermediateError("need at least two manifolds")
    areas = [m.area for m in sources]
    if max(areas) - min(areas) > 1e-7 * max(1.0, max(areas)):
        raise dissect.AreaMismatch(f"areas differ: {areas}")
    pieces = dissect.common_dissection_n(list(sources), eps)
    ct, why = None, None
    if method in ("auto", "nested"):
        try:
            ct = dissect.refine_to_common_triangulation(pieces, *sources, eps=eps, max_passes=max_passes)
        except dissect.GluingInconsistent as e:
            if method == "nested":
                raise
            why = str(e)
    plan_pieces = pieces
    if ct is not None:
        plan = build_intermediate_n(subdivide(ct, len(sources)), eps=eps)
        plan.diagnostics.update(triangles=len(ct.triangles), snapped=ct.snapped)
        plan_pieces = ct.as_pieces()
    else:
        plan = window_intermediate(CommonComplex.from_pieces(pieces, sources, eps))
        if why:
            plan.diagnostics["fallback_reason"] = why
    plan.diagnostics["pieces"] = len(pieces)
    return plan, plan_pieces


def plan_intermediate(P: Manifold, Q: Manifold, eps: float = 1e-9, method: str = "auto",
                      max_passes: int = 200) -> TwoStepPlan:
    """Two steps ``P → ℐ → Q`` acting on the common-dissection versions of ``P`` and ``Q``."""
    n, pieces = plan_intermediate_n([P, Q], eps, method, max_passes)
    plan = _two_step(n)
    _check(plan.source, plan.script1, plan.intermediate, "script1")
    plan.pieces = pieces
    return plan
