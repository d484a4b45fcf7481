"""Command-line front end.

Every subcommand prints line-delimited JSON records on stdout and exits 0 on
success, 1 when a verification finds a problem and 2 on bad input or a
failed construction (the last record then has ``"event": "error"``).
"""

from __future__ import annotations

import argparse
import json
import random
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from . import dissect, intermediate, planar, polycube, render
from .geom import P
from .manifold import (
    SCHEMA_MANIFOLD,
    Manifold,
    double_cover,
    labeled_isomorphic,
    manifold_from_json,
    manifold_to_json,
    relabel,
    step_from_json,
    step_to_json,
    validate,
)
from .plan import Plan, verify_plan

SCHEMA_VERSION = 1
SCHEMA_PLAN_FILE = "refold.plan-file/1"
SCHEMA_DISSECTION = "refold.dissection/1"


class InputError(ValueError):
    code = "InputError"


@dataclass
class Config:
    tolerance: float = 1e-9
    strict: bool = True
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if not self.tolerance > 0:
            raise InputError("tolerance must be positive")
        if self.schema_version != SCHEMA_VERSION:
            raise InputError(f"only schema version {SCHEMA_VERSION} is supported")


def emit(rec: dict, out=None) -> None:
    out = out or sys.stdout
    out.write(json.dumps(rec, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x: Any):
    if hasattr(x, "tolist"):
        return x.tolist()
    if isinstance(x, (set, frozenset, tuple)):
        return list(x)
    return str(x)


# --- input parsing ---------------------------------------------------------------------


def load(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"{path}: {e}") from e


def kind_of(d: Any) -> str:
    if isinstance(d, list):
        return "polygon"
    if not isinstance(d, dict):
        return "unknown"
    if "polygon" in d:
        return "polygon"
    if "cells" in d:
        return "polycube"
    schema = d.get("schema", "")
    if schema == SCHEMA_PLAN_FILE:
        return "plan-file"
    if schema == SCHEMA_DISSECTION:
        return "dissection"
    if schema.startswith("refold.plan/") or "steps" in d:
        return "plan"
    if schema == SCHEMA_MANIFOLD or "faces" in d:
        return "manifold"
    return "unknown"


def as_polygon(d: Any) -> list:
    pts = d["polygon"] if isinstance(d, dict) else d
    try:
        out = [P(float(p[0]), float(p[1])) for p in pts]
    except (TypeError, ValueError, IndexError, KeyError) as e:
        raise InputError(f"not a coordinate list: {e}") from e
    if len(out) < 3:
        raise InputError("a polygon needs at least 3 vertices")
    return out


def as_manifold(d: Any) -> Manifold:
    """Manifold JSON as is; a bare polygon becomes its double cover."""
    k = kind_of(d)
    if k == "polygon":
        return double_cover(as_polygon(d))
    if k == "manifold":
        try:
            return manifold_from_json(d)
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"bad manifold: {e}") from e
    raise InputError(f"expected a manifold or polygon, got {k}")


def as_polycube(d: Any) -> polycube.Polycube:
    if kind_of(d) != "polycube":
        raise InputError("expected a polycube {cells, tree}")
    try:
        return polycube.Polycube.from_json(d)
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"bad polycube: {e}") from e


def _faces_json(m: Manifold) -> list:
    return [[f.id, [list(p) for p in f.ring]] for f in m.faces]


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)


def plan_file(kind: str, plan: Plan, target: Manifold | None, **extra) -> dict:
    d = {"schema": SCHEMA_PLAN_FILE, "kind": kind, "plan": plan.to_json()}
    if target is not None:
        d["target"] = manifold_to_json(target)
    d.update(extra)
    return d


# --- subcommands -----------------------------------------------------------------------


def cmd_dissect(args, cfg: Config) -> int:
    A, B = as_manifold(load(args.p)), as_manifold(load(args.q))
    t0 = time.perf_counter()
    pieces = dissect.common_dissection(A, B, cfg.tolerance)
    rep = {s: dissect.tiling_report(pieces, m, s, seed=cfg.seed) for s, m in (("p", A), ("q", B))}
    ok = rep["p"]["ok"] and rep["q"]["ok"]
    doc = {"schema": SCHEMA_DISSECTION, "facesP": _faces_json(A), "facesQ": _faces_json(B),
           "pieces": [pc.to_json() for pc in pieces]}
    _write(args.json, json.dumps(doc))
    _write(args.svg, render.pieces_svg(pieces, A, B))
    emit({"event": "dissect", "pieces": len(pieces), "tilingP": rep["p"], "tilingQ": rep["q"],
          "congruenceError": dissect.congruence_error(pieces), "ok": ok,
          "seconds": time.perf_counter() - t0})
    return 0 if ok else 1


def cmd_planar(args, cfg: Config) -> int:
    A = planar.DoubleCover.of(as_polygon(load(args.p)))
    B = planar.DoubleCover.of(as_polygon(load(args.q)))
    pp = planar.plan_planar(A, B, cfg.tolerance)
    target = pp.target.manifold
    doc = plan_file("planar", pp.plan, target, eliminations=pp.eliminations)
    _write(args.out, json.dumps(doc))
    _write(args.svg, render.plan_svg(pp.plan) if args.svg else "")
    rep = verify_plan(pp.plan, target=target, eps=cfg.tolerance)
    emit({"event": "planar", "steps": len(pp.plan), "eliminations": pp.eliminations, "ok": rep["ok"]})
    return 0 if rep["ok"] else 1


def cmd_polycube(args, cfg: Config) -> int:
    A, B = as_polycube(load(args.p)), as_polycube(load(args.q))
    pp = polycube.plan_polycube(A, B, strict=cfg.strict)
    # the target is stored under the plan's own face names
    inv = {v: k for k, v in pp.final_labels.items()}
    target = relabel(polycube.surface(B), inv)
    doc = plan_file("polycube", pp.plan, target, moves=[mv.to_json() for mv in pp.moves],
                    finalLabels=pp.final_labels, source=A.to_json(), targetPolycube=B.to_json())
    _write(args.out, json.dumps(doc))
    ok = polycube.verify_polycube_plan(pp)
    emit({"event": "polycube", "cubes": A.n, "moves": len(pp.moves), "steps": len(pp.plan), "ok": ok})
    return 0 if ok else 1


def cmd_intermediate(args, cfg: Config) -> int:
    ms = [as_manifold(load(x)) for x in args.inputs]
    if len(ms) < 2:
        raise InputError("need at least two inputs")
    t0 = time.perf_counter()
    if len(ms) == 2:
        tp = intermediate.plan_intermediate(ms[0], ms[1], cfg.tolerance, args.method)
        rep = tp.report()
        doc = plan_file("intermediate", Plan(tp.source, tp.steps), tp.target,
                        checkpoints={"1": manifold_to_json(tp.intermediate)},
                        pieces=[p.to_json() for p in tp.pieces], method=tp.method,
                        diagnostics=tp.diagnostics)
        ok = rep["ok"] and (rep["intermediate_closed"] or not all(validate(m).closed for m in ms))
        emit({"event": "intermediate", "method": tp.method, "faces": len(tp.intermediate.faces),
              "intermediateClosed": rep["intermediate_closed"], "report": rep, "ok": ok,
              "seconds": time.perf_counter() - t0})
    else:
        n, pieces = intermediate.plan_intermediate_n(ms, cfg.tolerance, args.method)
        rows = n.verify()
        doc = {"schema": SCHEMA_PLAN_FILE, "kind": "intermediate-n", "method": n.method,
               "intermediate": manifold_to_json(n.intermediate),
               "scripts": [step_to_json(s) for s in n.scripts],
               "targets": [manifold_to_json(t) for t in n.targets],
               "pieces": [p.to_json() for p in pieces], "diagnostics": n.diagnostics}
        ok = all(r["replays"] and r["connected_after_cut"] for r in rows)
        emit({"event": "intermediate", "method": n.method, "k": len(ms), "faces": len(n.intermediate.faces),
              "intermediateClosed": validate(n.intermediate).closed, "scripts": rows, "ok": ok,
              "seconds": time.perf_counter() - t0})
    _write(args.out, json.dumps(doc))
    return 0 if ok else 1


def _piece_check(doc: dict, given: Manifold, start: Manifold, tol: float) -> float | None:
    """How well the plan's start re-represents ``given`` (None when no pieces are stored)."""
    if not doc.get("pieces"):
        return None
    pcs = [dissect.DissectionPiece.from_json(p) for p in doc["pieces"]]
    return dissect.gluing_consistency(pcs, given, 0, start.glues)


def cmd_verify(args, cfg: Config) -> int:
    doc = load(args.plan)
    given = as_manifold(load(args.manifold)) if args.manifold else None
    k = kind_of(doc)
    if k == "plan":
        plan = Plan.from_json(doc) if "start" in doc else Plan(given, [step_from_json(s) for s in doc["steps"]])
        if plan.start is None:
            raise InputError("the plan has no start; pass --manifold")
        rep = verify_plan(plan, start=given if "start" in doc else None, eps=cfg.tolerance)
        _verify_out(rep)
        return 0 if rep["ok"] else 1
    if k != "plan-file":
        raise InputError(f"expected a plan, got {k}")
    if doc.get("kind") == "intermediate-n":
        return _verify_n(doc, cfg)
    plan = Plan.from_json(doc["plan"])
    target = manifold_from_json(doc["target"]) if "target" in doc else None
    start_check = None
    if given is not None and doc.get("pieces"):
        start_check = _piece_check(doc, given, plan.start, cfg.tolerance)
        given_cmp = None
    else:
        given_cmp = given
    rep = verify_plan(plan, start=given_cmp, target=target, eps=cfg.tolerance)
    rep["kind"] = doc.get("kind")
    if start_check is not None:
        rep["start_represents_input"] = start_check <= 1e-6
        rep["start_mismatch"] = start_check
        rep["ok"] = rep["ok"] and rep["start_represents_input"]
    for idx, mj in doc.get("checkpoints", {}).items():
        want = manifold_from_json(mj)
        got = next(m for i, m in enumerate(plan.states()) if i == int(idx))
        same = labeled_isomorphic(got, want)
        rep[f"checkpoint_{idx}"] = same
        rep[f"checkpoint_{idx}_closed"] = validate(want).closed
        rep["ok"] = rep["ok"] and same
    _verify_out(rep)
    return 0 if rep["ok"] else 1


def _verify_n(doc: dict, cfg: Config) -> int:
    inter = manifold_from_json(doc["intermediate"])
    ok = True
    for i, (s, t) in enumerate(zip(doc["scripts"], doc["targets"])):
        rep = verify_plan(Plan(inter, [step_from_json(s)]), target=manifold_from_json(t), eps=cfg.tolerance)
        rep["script"] = i
        _verify_out(rep)
        ok = ok and rep["ok"]
    return 0 if ok else 1


def _verify_out(rep: dict) -> None:
    rec = {"event": "verify", **rep}
    if rep.get("identity"):
        rec["summary"] = "0 steps, identity"
    else:
        rec["summary"] = f"{rep['steps']} steps, {'ok' if rep['ok'] else 'FAILED'}"
    emit(rec)


def cmd_render(args, cfg: Config) -> int:
    d = load(args.input)
    k = kind_of(d)
    if k == "polycube":
        text, fmt = render.polycube_obj(as_polycube(d)), "obj"
    elif k in ("manifold", "polygon"):
        text, fmt = render.manifold_svg(as_manifold(d)), "svg"
    elif k == "dissection":
        pcs = [dissect.DissectionPiece.from_json(p) for p in d["pieces"]]
        fp = [(fid, [P(*p) for p in r]) for fid, r in d["facesP"]]
        fq = [(fid, [P(*p) for p in r]) for fid, r in d["facesQ"]]
        text, fmt = render.pieces_svg(pcs, fp, fq), "svg"
    elif k == "plan-file" and "plan" in d:
        text, fmt = render.plan_svg(Plan.from_json(d["plan"]), every=max(1, args.every)), "svg"
    elif k == "plan-file":
        text, fmt = render.manifold_svg(manifold_from_json(d["intermediate"]), labels=False), "svg"
    else:
        raise InputError(f"cannot render {k}")
    _write(args.out, text)
    if not args.out:
        sys.stdout.write(text)
    else:
        emit({"event": "render", "format": fmt, "bytes": len(text), "out": args.out})
    return 0


# --- wiring ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="refold", description="Plan and verify cut-and-glue refoldings.")
    ap.add_argument("--tolerance", type=float, default=1e-9, help="numeric tolerance (default 1e-9)")
    ap.add_argument("--strict", dest="strict", action="store_true", default=True,
                    help="reject self-intersecting polycube moves (default)")
    ap.add_argument("--permissive", dest="strict", action="store_false",
                    help="allow self-intersecting polycube intermediates")
    ap.add_argument("--seed", type=int, default=0, help="seed for sampled checks")
    ap.add_argument("--schema-version", type=int, default=SCHEMA_VERSION, help="file schema version")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dissect", help="common dissection of two polygons or manifolds")
    p.add_argument("p")
    p.add_argument("q")
    p.add_argument("--svg")
    p.add_argument("--json")
    p.set_defaults(func=cmd_dissect)

    p = sub.add_parser("planar", help="planar refolding between two convex polygons")
    p.add_argument("p")
    p.add_argument("q")
    p.add_argument("--out")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_planar)

    p = sub.add_parser("polycube", help="refold one tree polycube surface into another")
    p.add_argument("p")
    p.add_argument("q")
    p.add_argument("--out")
    p.set_defaults(func=cmd_polycube)

    p = sub.add_parser("intermediate", help="two-step refolding through an intermediate manifold")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.add_argument("--method", choices=("auto", "nested", "windows"), default="auto")
    p.set_defaults(func=cmd_intermediate)

    p = sub.add_parser("verify", help="replay a plan and report invariants")
    p.add_argument("plan")
    p.add_argument("--manifold", help="the manifold the plan should start from")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("render", help="SVG of a manifold, dissection or plan; OBJ of a polycube")
    p.add_argument("input")
    p.add_argument("--out")
    p.add_argument("--every", type=int, default=1, help="plan states: draw every n-th")
    p.set_defaults(func=cmd_render)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = Config(args.tolerance, args.strict, args.seed, args.schema_version)
        random.seed(cfg.seed)
        return args.func(args, cfg)
    except Exception as e:  # every failure becomes a structured record
        emit({"event": "error", "code": getattr(e, "code", type(e).__name__), "type": type(e).__name__,
              "message": str(e)})
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
