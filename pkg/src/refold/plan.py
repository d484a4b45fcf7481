"""Ordered refolding-step sequences with provenance, replay and verification."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterator

from .manifold import (
    Manifold,
    RefoldStep,
    StepError,
    apply_step,
    invert_step,
    labeled_isomorphic,
    isomorphic,
    manifold_from_json,
    manifold_to_json,
    step_from_json,
    step_to_json,
    validate,
)

SCHEMA_PLAN = "refold.plan/1"


@dataclass
class Plan:
    start: Manifold
    steps: list[RefoldStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def extend(self, steps) -> None:
        self.steps.extend(steps)

    def inverse(self, end: Manifold) -> "Plan":
        return Plan(end, [invert_step(s) for s in reversed(self.steps)])

    def states(self) -> Iterator[Manifold]:
        """Yield the start and every manifold after each step."""
        m = self.start
        yield m
        for s in self.steps:
            m = apply_step(m, s)
            yield m

    def final(self) -> Manifold:
        m = self.start
        for s in self.steps:
            m = apply_step(m, s)
        return m

    @property
    def provenance(self) -> list[str]:
        return [s.label for s in self.steps]

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_PLAN,
            "start": manifold_to_json(self.start),
            "steps": [step_to_json(s) for s in self.steps],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Plan":
        if d.get("schema", SCHEMA_PLAN) != SCHEMA_PLAN:
            raise ValueError(f"unsupported plan schema {d.get('schema')!r}")
        return cls(manifold_from_json(d["start"]), [step_from_json(s) for s in d.get("steps", [])])


def verify_plan(plan: Plan, start: Manifold | None = None, target: Manifold | None = None,
                labeled: bool = True, eps: float = 1e-9) -> dict:
    """Replay ``plan`` and check the per-step invariants.

    Checks: each step applies, area is conserved, connectivity holds, and a
    closed start stays closed whenever the step's glues consume all the
    boundary its cuts create.  Optionally compares the start and final
    manifolds with given ones.
    """
    t0 = time.perf_counter()
    report: dict = {"steps": len(plan.steps), "ok": True, "problems": []}
    m = plan.start
    if start is not None and not _same(start, m, labeled):
        report["ok"] = False
        report["problems"].append("plan start differs from the given manifold")
    a0 = m.area
    closed0 = validate(m).closed
    all_closed = closed0
    for i, s in enumerate(plan.steps):
        try:
            m2 = apply_step(m, s)
        except StepError as e:
            report["ok"] = False
            report["problems"].append(f"step {i} ({s.label}): {e.code}: {e}")
            break
        r = validate(m2)
        if abs(r.area - a0) > eps * max(1.0, abs(a0)):
            report["ok"] = False
            report["problems"].append(f"step {i}: area {r.area} != {a0}")
        if not r.connected:
            report["ok"] = False
            report["problems"].append(f"step {i}: disconnected")
        if r.problems:
            report["ok"] = False
            report["problems"].extend(f"step {i}: {p}" for p in r.problems)
        bal = abs(s.cut_length - s.glue_length) <= 1e-7 * max(1.0, s.cut_length)
        if closed0 and bal and not r.closed:
            report["ok"] = False
            report["problems"].append(f"step {i}: closedness lost")
        all_closed = all_closed and r.closed
        m = m2
    report["area"] = m.area
    report["all_closed"] = all_closed
    report["final_closed"] = validate(m).closed
    if target is not None:
        same = _same(target, m, labeled)
        report["target_match"] = same
        report["ok"] = report["ok"] and same
    if not plan.steps:
        report["identity"] = True
    report["seconds"] = time.perf_counter() - t0
    return report


def _same(a: Manifold, b: Manifold, labeled: bool) -> bool:
    return labeled_isomorphic(a, b) if labeled else isomorphic(a, b) is not None
