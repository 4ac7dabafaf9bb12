"""Compose chains of analysis profiles that turn available layers into a goal kind.

Search runs breadth-first over the set of data kinds available so far, so the
first plan found is a shortest one. At every depth only the lexicographically
smallest profile sequence reaching a given kind set is kept, which makes the
result the smallest among all shortest plans.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from atmocat.errors import MalformedDocument, NoPlan
from atmocat.store import AnalysisProfile, DataKind


@dataclass(frozen=True)
class LayerSource:
    layer_id: int

    def to_dict(self) -> dict:
        return {"layerId": self.layer_id}


@dataclass(frozen=True)
class StepSource:
    step: int
    output: str

    def to_dict(self) -> dict:
        return {"step": self.step, "output": self.output}


Source = Union[LayerSource, StepSource]


@dataclass(frozen=True)
class PlanStep:
    profile_id: str
    bindings: tuple[tuple[str, Source], ...]

    def binding(self, name: str) -> Source | None:
        return dict(self.bindings).get(name)


@dataclass(frozen=True)
class WorkflowPlan:
    goal_kind: DataKind
    steps: tuple[PlanStep, ...] = ()

    @property
    def profile_ids(self) -> tuple[str, ...]:
        return tuple(s.profile_id for s in self.steps)

    def to_dict(self) -> dict:
        return {
            "goalKind": self.goal_kind.value,
            "steps": [{"profileId": s.profile_id,
                       "bindings": {name: src.to_dict() for name, src in s.bindings}}
                      for s in self.steps],
        }


def plan_to_json(plan: WorkflowPlan) -> str:
    return json.dumps(plan.to_dict(), sort_keys=True)


def plan_from_json(text: str | dict) -> WorkflowPlan:
    try:
        doc = json.loads(text) if isinstance(text, str) else text
        steps = []
        for s in doc["steps"]:
            bindings = []
            for name, src in s["bindings"].items():
                if "layerId" in src:
                    bindings.append((name, LayerSource(int(src["layerId"]))))
                else:
                    bindings.append((name, StepSource(int(src["step"]), str(src["output"]))))
            steps.append(PlanStep(str(s["profileId"]), tuple(bindings)))
        return WorkflowPlan(DataKind(doc["goalKind"]), tuple(steps))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise MalformedDocument(f"not a workflow plan: {exc}") from exc


def _kinds(pairs) -> set[DataKind]:
    return {DataKind(k) for _, k in pairs}


def _bind(profiles: Sequence[AnalysisProfile], layers: Sequence[tuple[int, DataKind]]
          ) -> tuple[PlanStep, ...]:
    by_kind: dict[DataKind, int] = {}
    for layer_id, kind in sorted(layers, key=lambda p: p[0]):
        by_kind.setdefault(DataKind(kind), layer_id)
    produced: dict[DataKind, StepSource] = {}
    steps = []
    for i, profile in enumerate(profiles):
        bindings = []
        for name, kind in profile.inputs:
            if kind in by_kind:
                bindings.append((name, LayerSource(by_kind[kind])))
            else:
                bindings.append((name, produced[kind]))
        steps.append(PlanStep(profile.profile_id, tuple(bindings)))
        for out_name, kind in profile.outputs:
            produced.setdefault(kind, StepSource(i, out_name))
    return tuple(steps)


def compose(layers: Iterable[tuple[int, DataKind]], profiles: Iterable[AnalysisProfile],
            goal_kind: DataKind | str) -> WorkflowPlan:
    """Shortest profile chain producing ``goal_kind``; raises NoPlan if none exists."""
    goal = DataKind(goal_kind)
    layers = [(int(i), DataKind(k)) for i, k in layers]
    ordered = sorted(profiles, key=lambda p: p.profile_id)
    start = frozenset(k for _, k in layers)
    if goal in start:
        return WorkflowPlan(goal)
    seen = {start}
    frontier: dict[frozenset, tuple[AnalysisProfile, ...]] = {start: ()}
    while frontier:
        nxt: dict[frozenset, tuple[AnalysisProfile, ...]] = {}
        for state, seq in frontier.items():
            for p in ordered:
                if not _kinds(p.inputs) <= state:
                    continue
                new_state = state | _kinds(p.outputs)
                if new_state == state or new_state in seen:
                    continue
                cand = seq + (p,)
                best = nxt.get(new_state)
                if best is None or [q.profile_id for q in cand] < [q.profile_id for q in best]:
                    nxt[new_state] = cand
        done = [seq for state, seq in nxt.items() if goal in state]
        if done:
            best = min(done, key=lambda s: [q.profile_id for q in s])
            return WorkflowPlan(goal, _bind(best, layers))
        seen.update(nxt)
        frontier = nxt
    raise NoPlan(f"no chain of profiles produces {goal.value}")


def validate_plan(plan: WorkflowPlan, layers: Iterable[tuple[int, DataKind]],
                  profiles: Iterable[AnalysisProfile]) -> tuple[bool, list[str]]:
    """Check a plan's invariants without trusting ``compose``."""
    layer_kind = {int(i): DataKind(k) for i, k in layers}
    by_id = {p.profile_id: p for p in profiles}
    violations: list[str] = []
    resolved: list[AnalysisProfile | None] = []
    for i, step in enumerate(plan.steps):
        profile = by_id.get(step.profile_id)
        resolved.append(profile)
        if profile is None:
            violations.append(f"step {i}: unknown profile {step.profile_id!r}")
            continue
        names = [n for n, _ in step.bindings]
        if len(set(names)) != len(names):
            violations.append(f"step {i}: duplicate binding")
        wanted = dict(profile.inputs)
        for extra in sorted(set(names) - set(wanted)):
            violations.append(f"step {i}: binding for unknown input {extra!r}")
        for name, kind in profile.inputs:
            src = step.binding(name)
            if src is None:
                violations.append(f"step {i}: unbound input {name!r}")
            elif isinstance(src, LayerSource):
                have = layer_kind.get(src.layer_id)
                if have is None:
                    violations.append(f"step {i}: unknown layer {src.layer_id}")
                elif have is not kind:
                    violations.append(f"step {i}: kind mismatch for {name!r}")
            elif src.step >= i or src.step < 0:
                violations.append(f"step {i}: forward reference to step {src.step}")
            else:
                source = resolved[src.step]
                outputs = dict(source.outputs) if source else {}
                if src.output not in outputs:
                    violations.append(f"step {i}: step {src.step} has no output {src.output!r}")
                elif outputs[src.output] is not kind:
                    violations.append(f"step {i}: kind mismatch for {name!r}")
    goal = DataKind(plan.goal_kind)
    if plan.steps:
        last = resolved[-1]
        if last is not None and goal not in _kinds(last.outputs):
            violations.append("goal unmet")
    elif goal not in set(layer_kind.values()):
        violations.append("goal unmet")
    return not violations, violations
