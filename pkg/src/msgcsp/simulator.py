"""Scenario model and the seeded message-passing simulator.

A scenario gives each process a straight-line script of COMMIT / CHOOSE /
SEND / RECEIVE actions.  SEND puts the *evidence id* of an earlier
commitment on an unordered reliable channel; RECEIVE takes any pending
evidence from the named peer and resolves it through the run's evidence
table.  The outcome of a run is the last commitment of every process.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import jsonschema

from .core import (
    ChoicePoint,
    Commitment,
    Event,
    Step,
    Trace,
    Valuation,
    canonical_json,
)
from .errors import (
    DeadlockError,
    DomainError,
    IncompleteChoicesError,
    ScenarioError,
    SizeError,
)

MAX_BRANCHES = 10**6
MAX_SCHEDULES = 10**4
SEED_LIMIT = 1 << 64

ABORT = "a"


# ---------------------------------------------------------------------------
# acceptance rules


def parse_vote(value: str) -> tuple[str, str | None]:
    """Decode a commit-protocol token: ``a`` is abort, ``c(<v>)`` commits ``v``."""
    if value == ABORT:
        return ("abort", None)
    if value.startswith("c(") and value.endswith(")") and len(value) > 3:
        return ("commit", value[2:-1])
    raise ValueError(f"{value!r} is neither 'a' nor 'c(<value>)'")


def _same_vote(x: str, y: str) -> bool:
    return x == y


def _no_conflicting_commit(x: str, y: str) -> bool:
    kx, vx = parse_vote(x)
    ky, vy = parse_vote(y)
    return not (kx == ky == "commit" and vx != vy)


# Both rules are conjunctions of one symmetric predicate over every pair.
PAIRWISE_RULES: dict[str, Callable[[str, str], bool]] = {
    "atomic-commit": _same_vote,
    "weak-commit": _no_conflicting_commit,
}


def rule_accepts(rule: str, valuation: Sequence[str]) -> bool:
    pair_ok = PAIRWISE_RULES[rule]
    n = len(valuation)
    return all(pair_ok(valuation[i], valuation[j]) for i in range(n) for j in range(i + 1, n))


@dataclass(frozen=True)
class Acceptance:
    kind: str
    accept: frozenset[Valuation] = frozenset()
    rule: str | None = None

    @classmethod
    def extensional(cls, accept: Iterable[Sequence[str]]) -> Acceptance:
        return cls("extensional", frozenset(tuple(v) for v in accept))

    @classmethod
    def from_rule(cls, rule: str) -> Acceptance:
        if rule not in PAIRWISE_RULES:
            raise ScenarioError(f"unknown acceptance rule {rule!r}", "acceptance.rule")
        return cls("rule", rule=rule)

    def accepts(self, valuation: Sequence[str]) -> bool:
        if self.kind == "extensional":
            return tuple(valuation) in self.accept
        return rule_accepts(self.rule, valuation)

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "rule":
            return {"type": "rule", "rule": self.rule}
        return {"type": "extensional", "accept": [list(v) for v in sorted(self.accept)]}


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True, slots=True)
class Action:
    op: str  # commit | choose | send | receive
    value: str | None = None
    peer: int | None = None
    index: int | None = None

    @classmethod
    def commit(cls, value: str) -> Action:
        return cls("commit", value=value)

    @classmethod
    def choose(cls) -> Action:
        return cls("choose")

    @classmethod
    def send(cls, to: int, index: int) -> Action:
        return cls("send", peer=to, index=index)

    @classmethod
    def receive(cls, frm: int) -> Action:
        return cls("receive", peer=frm)

    @property
    def commits(self) -> bool:
        return self.op in ("commit", "choose")

    def to_dict(self) -> dict[str, Any]:
        if self.op == "commit":
            return {"op": "commit", "value": self.value}
        if self.op == "choose":
            return {"op": "choose"}
        if self.op == "send":
            return {"op": "send", "to": self.peer, "index": self.index}
        return {"op": "receive", "from": self.peer}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Action:
        op = d["op"]
        if op == "commit":
            return cls.commit(d["value"])
        if op == "choose":
            return cls.choose()
        if op == "send":
            return cls.send(d["to"], d["index"])
        return cls.receive(d["from"])


@dataclass(frozen=True)
class Scenario:
    name: str
    domains: tuple[tuple[str, ...], ...]
    script: tuple[tuple[Action, ...], ...]
    acceptance: Acceptance
    explore_schedules: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "domains", tuple(tuple(d) for d in self.domains))
        object.__setattr__(self, "script", tuple(tuple(s) for s in self.script))
        self._validate()

    @property
    def n(self) -> int:
        return len(self.domains)

    @property
    def choice_points(self) -> tuple[ChoicePoint, ...]:
        return tuple(
            (p, a)
            for p, acts in enumerate(self.script)
            for a, act in enumerate(acts)
            if act.op == "choose"
        )

    def commit_count(self, p: int) -> int:
        return sum(1 for a in self.script[p] if a.commits)

    def final_commit_action(self, p: int) -> Action:
        return [a for a in self.script[p] if a.commits][-1]

    def _validate(self) -> None:
        n = self.n
        if n < 1:
            raise ScenarioError("a scenario needs at least one process", "n")
        if len(self.script) != n:
            raise ScenarioError(f"script has {len(self.script)} processes, expected {n}", "script")
        for i, dom in enumerate(self.domains):
            if not dom:
                raise ScenarioError("domain is empty", f"domains[{i}]")
            if len(set(dom)) != len(dom):
                raise ScenarioError("domain has duplicate values", f"domains[{i}]")
        for p, acts in enumerate(self.script):
            made = 0
            for a, act in enumerate(acts):
                where = f"script[{p}][{a}]"
                if act.op == "commit":
                    if act.value not in self.domains[p]:
                        raise ScenarioError(f"value {act.value!r} not in domain of P{p}", where)
                    made += 1
                elif act.op == "choose":
                    made += 1
                elif act.op in ("send", "receive"):
                    if not 0 <= act.peer < n or act.peer == p:
                        raise ScenarioError(f"peer {act.peer} is not another process", where)
                    if act.op == "send" and not 0 <= act.index < made:
                        raise ScenarioError(
                            f"SEND references commitment {act.index} but only {made} made so far", where)
                else:
                    raise ScenarioError(f"unknown action {act.op!r}", where)
            if made == 0:
                raise ScenarioError("process never commits", f"script[{p}]")
        acc = self.acceptance
        if acc.kind == "extensional":
            for k, v in enumerate(sorted(acc.accept)):
                if len(v) != n:
                    raise ScenarioError(f"valuation {list(v)} has arity {len(v)}", f"acceptance.accept[{k}]")
                for i, x in enumerate(v):
                    if x not in self.domains[i]:
                        raise ScenarioError(f"value {x!r} not in domain of P{i}", f"acceptance.accept[{k}]")
        elif acc.kind == "rule":
            for i, dom in enumerate(self.domains):
                for x in dom:
                    try:
                        parse_vote(x)
                    except ValueError as exc:
                        raise ScenarioError(str(exc), f"domains[{i}]") from None
        else:
            raise ScenarioError(f"unknown acceptance type {acc.kind!r}", "acceptance.type")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "n": self.n,
            "domains": [list(d) for d in self.domains],
            "script": [[a.to_dict() for a in acts] for acts in self.script],
            "acceptance": self.acceptance.to_dict(),
            "choice_points": [list(cp) for cp in self.choice_points],
            "explore_schedules": self.explore_schedules,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


_ACTION_SCHEMA = {
    "oneOf": [
        {"type": "object", "required": ["op", "value"], "additionalProperties": False,
         "properties": {"op": {"const": "commit"}, "value": {"type": "string"}}},
        {"type": "object", "required": ["op"], "additionalProperties": False,
         "properties": {"op": {"const": "choose"}}},
        {"type": "object", "required": ["op", "to", "index"], "additionalProperties": False,
         "properties": {"op": {"const": "send"}, "to": {"type": "integer", "minimum": 0},
                        "index": {"type": "integer", "minimum": 0}}},
        {"type": "object", "required": ["op", "from"], "additionalProperties": False,
         "properties": {"op": {"const": "receive"}, "from": {"type": "integer", "minimum": 0}}},
    ]
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["n", "domains", "script", "acceptance"],
    "properties": {
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "domains": {"type": "array", "items": {"type": "array", "items": {"type": "string"}}},
        "script": {"type": "array", "items": {"type": "array", "items": _ACTION_SCHEMA}},
        "acceptance": {
            "oneOf": [
                {"type": "object", "required": ["type", "accept"], "additionalProperties": False,
                 "properties": {"type": {"const": "extensional"},
                                "accept": {"type": "array",
                                           "items": {"type": "array", "items": {"type": "string"}}}}},
                {"type": "object", "required": ["type", "rule"], "additionalProperties": False,
                 "properties": {"type": {"const": "rule"},
                                "rule": {"enum": sorted(PAIRWISE_RULES)}}},
            ]
        },
        "choice_points": {"type": "array",
                          "items": {"type": "array", "items": {"type": "integer"},
                                    "minItems": 2, "maxItems": 2}},
        "explore_schedules": {"type": "boolean"},
    },
}


def _json_path(parts: Iterable[Any]) -> str:
    out = ""
    for part in parts:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def scenario_from_dict(d: Any, name: str = "") -> Scenario:
    validator = jsonschema.Draft7Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(d), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise ScenarioError(f"schema violation: {err.message}", _json_path(err.absolute_path))
    if d["n"] != len(d["domains"]):
        raise ScenarioError(f"n={d['n']} but {len(d['domains'])} domains given", "domains")
    acc = d["acceptance"]
    acceptance = (Acceptance.from_rule(acc["rule"]) if acc["type"] == "rule"
                  else Acceptance.extensional(acc["accept"]))
    scenario = Scenario(
        name=d.get("name", name),
        domains=tuple(tuple(x) for x in d["domains"]),
        script=tuple(tuple(Action.from_dict(a) for a in acts) for acts in d["script"]),
        acceptance=acceptance,
        explore_schedules=d.get("explore_schedules", False),
    )
    if "choice_points" in d and [tuple(cp) for cp in d["choice_points"]] != list(scenario.choice_points):
        raise ScenarioError(
            f"declared choice points {d['choice_points']} do not match the CHOOSE actions "
            f"{[list(cp) for cp in scenario.choice_points]}", "choice_points")
    return scenario


def scenario_from_json(text: str, name: str = "") -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    return scenario_from_dict(data, name)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return scenario_from_json(path.read_text(encoding="utf-8"), name=path.stem)


# ---------------------------------------------------------------------------
# execution


def choices_from_values(s: Scenario, values: Sequence[str]) -> dict[ChoicePoint, str]:
    """Pair positional values with the scenario's choice points, in script order."""
    points = s.choice_points
    if len(values) < len(points):
        raise IncompleteChoicesError(list(points[len(values):]))
    if len(values) > len(points):
        raise ScenarioError(f"{len(values)} choices given for {len(points)} choice points", "choices")
    return dict(zip(points, values))


def _execute(s: Scenario, choices: Mapping[ChoicePoint, str], decide: Callable[[int], int],
             seed: int) -> Trace:
    n = s.n
    pc = [0] * n
    commits: list[list[Commitment]] = [[] for _ in range(n)]
    seq = [0] * n
    pending: dict[tuple[int, int], list[str]] = {}
    events: list[Event] = []
    schedule: list[Step] = []

    while True:
        enabled = []
        for p in range(n):
            if pc[p] >= len(s.script[p]):
                continue
            act = s.script[p][pc[p]]
            if act.op == "receive" and not pending.get((act.peer, p)):
                continue
            enabled.append(p)
        if not enabled:
            blocked = [p for p in range(n) if pc[p] < len(s.script[p])]
            if blocked:
                raise DeadlockError(blocked)
            break
        p = enabled[decide(len(enabled))] if len(enabled) > 1 else enabled[0]
        act = s.script[p][pc[p]]
        eid = f"p{p}.{seq[p]}"
        if act.commits:
            value = act.value if act.op == "commit" else choices[(p, pc[p])]
            c = Commitment(p, len(commits[p]), value)
            commits[p].append(c)
            events.append(Event.commit(eid, c, seq[p]))
            schedule.append(Step(p, "commit", event=eid, index=c.index, evidence_id=c.evidence_id))
            seq[p] += 1
        elif act.op == "send":
            c = commits[p][act.index]
            pending.setdefault((p, act.peer), []).append(c.evidence_id)
            schedule.append(Step(p, "send", peer=act.peer, index=act.index, evidence_id=c.evidence_id))
        else:
            box = pending[(act.peer, p)]
            evidence_id = box.pop(decide(len(box)) if len(box) > 1 else 0)
            events.append(Event.observe(eid, p, seq[p], evidence_id, act.peer))
            schedule.append(Step(p, "receive", event=eid, peer=act.peer, evidence_id=evidence_id))
            seq[p] += 1
        pc[p] += 1

    ordered_choices = tuple((cp, choices[cp]) for cp in s.choice_points)
    return Trace(s.name, n, seed, tuple(events), tuple(schedule), ordered_choices)


def _check_choices(s: Scenario, choices: Mapping[ChoicePoint, str]) -> None:
    points = s.choice_points
    extra = [cp for cp in choices if cp not in points]
    if extra:
        raise ScenarioError(f"{extra} are not choice points", "choices")
    missing = [cp for cp in points if cp not in choices]
    if missing:
        raise IncompleteChoicesError(missing)
    for (p, a), v in choices.items():
        if v not in s.domains[p]:
            raise DomainError(f"choice {v!r} at P{p}@{a} is not in the domain of P{p}")


def run_scenario(s: Scenario, seed: int, choices: Mapping[ChoicePoint, str] | None = None) -> Trace:
    """Run ``s`` once under the seeded scheduler."""
    if not 0 <= seed < SEED_LIMIT:
        raise ValueError("seed must be an unsigned 64-bit integer")
    choices = dict(choices or {})
    _check_choices(s, choices)
    rng = random.Random(seed)
    return _execute(s, choices, rng.randrange, seed)


def _all_schedules(s: Scenario, choices: Mapping[ChoicePoint, str], limit: int) -> list[Trace]:
    """Every distinct interleaving, by replaying forced decision prefixes."""
    traces = []
    stack: list[list[int]] = [[]]
    while stack:
        prefix = stack.pop()
        taken: list[tuple[int, int]] = []

        def decide(k: int) -> int:
            i = len(taken)
            pick = prefix[i] if i < len(prefix) else 0
            taken.append((pick, k))
            return pick

        traces.append(_execute(s, choices, decide, 0))
        if len(traces) > limit:
            raise SizeError(f"more than {limit} schedules")
        for i in range(len(taken) - 1, len(prefix) - 1, -1):
            _, k = taken[i]
            base = [t[0] for t in taken[:i]]
            for alt in range(k - 1, 0, -1):
                stack.append(base + [alt])
    return traces


def sort_valuations(domains: Sequence[Sequence[str]], vals: Iterable[Valuation]) -> list[Valuation]:
    """Lexicographic order by participant, then by domain declaration order."""
    index = [{v: k for k, v in enumerate(d)} for d in domains]
    return sorted(set(vals), key=lambda v: [index[i].get(x, len(index[i])) for i, x in enumerate(v)])


def enumerate_outcomes(s: Scenario, max_branches: int = MAX_BRANCHES,
                       max_schedules: int = MAX_SCHEDULES) -> list[Valuation]:
    """Accepted final valuations over every choice combination (and schedule, if flagged)."""
    points = s.choice_points
    branches = 1
    for p, _ in points:
        branches *= len(s.domains[p])
    if branches > max_branches:
        raise SizeError(f"{branches} choice combinations exceed the bound of {max_branches}")

    finals: set[Valuation] = set()
    explored = 0
    for combo in product(*(s.domains[p] for p, _ in points)):
        choices = dict(zip(points, combo))
        if s.explore_schedules:
            runs = _all_schedules(s, choices, max_schedules)
            explored += len(runs)
            if explored > max_branches:
                raise SizeError(f"more than {max_branches} branches (choices x schedules)")
            finals.update(t.final_valuation for t in runs)
        else:
            finals.add(_execute(s, choices, lambda k: 0, 0).final_valuation)
    return sort_valuations(s.domains, (v for v in finals if s.acceptance.accepts(v)))
