"""Shared domain types and order analysis.

Commitments, events and traces; precedence relations and their validation;
finite constraint systems; Lamport clock assignment; pomsets and
linear-extension counting.  Everything here is a pure function over
immutable values.
"""

from __future__ import annotations

import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from typing import Any, Iterable, Mapping, Sequence

from .errors import (
    ArityError,
    ConstraintSystemError,
    MalformedRelationError,
    MalformedTraceError,
    OrderViolationError,
    SizeError,
)

Valuation = tuple[str, ...]
ChoicePoint = tuple[int, int]

MAX_LINEAR_EXTENSION_EVENTS = 12

_FNV64_OFFSET = 0xCBF29CE484222325
_FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def canonical_json(obj: Any) -> str:
    """Stable serialization used for every file this package writes."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def fnv1a_64(data: bytes) -> int:
    h = _FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV64_PRIME) & _MASK64
    return h


def evidence_digest(process: int, index: int, value: str) -> str:
    """Content-derived identifier of a commitment: FNV-1a/64 over ``process|index|value``."""
    return f"{fnv1a_64(f'{process}|{index}|{value}'.encode('utf-8')):016x}"


# ---------------------------------------------------------------------------
# commitments, events, traces


@dataclass(frozen=True, slots=True)
class Commitment:
    process: int
    index: int
    value: str
    evidence_id: str = ""

    def __post_init__(self) -> None:
        if self.process < 0 or self.index < 0:
            raise ValueError("process and index must be non-negative")
        digest = evidence_digest(self.process, self.index, self.value)
        if not self.evidence_id:
            object.__setattr__(self, "evidence_id", digest)
        elif self.evidence_id != digest:
            raise MalformedTraceError(
                f"evidence id {self.evidence_id} does not match commitment "
                f"P{self.process}[{self.index}]={self.value!r}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "process": self.process,
            "index": self.index,
            "value": self.value,
            "evidence_id": self.evidence_id,
        }


class EventKind(str, Enum):
    COMMIT = "COMMIT"
    OBSERVE = "OBSERVE"


@dataclass(frozen=True, slots=True)
class Event:
    """A locally distinguishable change: a commitment, or the observation of one.

    ``evidence_id`` is the produced id for COMMIT events and the observed id
    for OBSERVE events; ``source`` is the process the evidence came from.
    """

    id: str
    process: int
    kind: EventKind
    local_seq: int
    evidence_id: str
    commitment: Commitment | None = None
    source: int | None = None

    @classmethod
    def commit(cls, id: str, commitment: Commitment, local_seq: int) -> Event:
        return cls(id, commitment.process, EventKind.COMMIT, local_seq,
                   commitment.evidence_id, commitment=commitment)

    @classmethod
    def observe(cls, id: str, process: int, local_seq: int, evidence_id: str,
                source: int) -> Event:
        return cls(id, process, EventKind.OBSERVE, local_seq, evidence_id, source=source)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "id": self.id,
            "process": self.process,
            "kind": self.kind.value,
            "local_seq": self.local_seq,
            "evidence_id": self.evidence_id,
        }
        if self.commitment is not None:
            d["index"] = self.commitment.index
            d["value"] = self.commitment.value
        if self.source is not None:
            d["source"] = self.source
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Event:
        kind = EventKind(d["kind"])
        if kind is EventKind.COMMIT:
            c = Commitment(d["process"], d["index"], d["value"], d["evidence_id"])
            return cls.commit(d["id"], c, d["local_seq"])
        return cls.observe(d["id"], d["process"], d["local_seq"], d["evidence_id"], d["source"])


@dataclass(frozen=True, slots=True)
class Observation:
    observer: int
    evidence_id: str
    source: int
    step: int


@dataclass(frozen=True, slots=True)
class Step:
    """One resolved scheduler step: which process ran which action."""

    process: int
    op: str
    event: str | None = None
    peer: int | None = None
    index: int | None = None
    evidence_id: str | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"process": self.process, "op": self.op}
        for key in ("event", "peer", "index", "evidence_id"):
            val = getattr(self, key)
            if val is not None:
                d[key] = val
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Step:
        return cls(d["process"], d["op"], d.get("event"), d.get("peer"), d.get("index"),
                   d.get("evidence_id"))


@dataclass(frozen=True)
class Trace:
    """Everything one run recorded.

    ``events`` is in global schedule order.  Commitments and observations are
    views over the events; the schedule additionally records SEND steps,
    which produce no event.
    """

    scenario: str
    n: int
    seed: int
    events: tuple[Event, ...]
    schedule: tuple[Step, ...] = ()
    choices: tuple[tuple[ChoicePoint, str], ...] = ()

    @property
    def commitments(self) -> tuple[tuple[Commitment, ...], ...]:
        per: list[list[Commitment]] = [[] for _ in range(self.n)]
        for ev in self.events:
            if ev.kind is EventKind.COMMIT:
                per[ev.process].append(ev.commitment)
        return tuple(tuple(sorted(cs, key=lambda c: c.index)) for cs in per)

    @property
    def observations(self) -> tuple[Observation, ...]:
        step_of = {s.event: i for i, s in enumerate(self.schedule) if s.event is not None}
        out = []
        for pos, ev in enumerate(self.events):
            if ev.kind is EventKind.OBSERVE:
                out.append(Observation(ev.process, ev.evidence_id, ev.source,
                                       step_of.get(ev.id, pos)))
        return tuple(out)

    @property
    def evidence_table(self) -> dict[str, Commitment]:
        return {
            ev.evidence_id: ev.commitment
            for ev in self.events
            if ev.kind is EventKind.COMMIT
        }

    @property
    def final_valuation(self) -> Valuation:
        """Last commitment of every process (the run's outcome)."""
        out = []
        for p, cs in enumerate(self.commitments):
            if not cs:
                raise MalformedTraceError(f"process P{p} made no commitment")
            out.append(cs[-1].value)
        return tuple(out)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "n": self.n,
            "seed": self.seed,
            "choices": [
                {"process": p, "action": a, "value": v} for (p, a), v in self.choices
            ],
            "commitments": [[c.to_dict() for c in cs] for cs in self.commitments],
            "observations": [
                {"observer": o.observer, "evidence_id": o.evidence_id,
                 "source": o.source, "step": o.step}
                for o in self.observations
            ],
            "schedule": [s.to_dict() for s in self.schedule],
            "events": [e.to_dict() for e in self.events],
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Trace:
        try:
            trace = cls(
                scenario=str(d.get("scenario", "")),
                n=int(d["n"]),
                seed=int(d.get("seed", 0)),
                events=tuple(Event.from_dict(e) for e in d["events"]),
                schedule=tuple(Step.from_dict(s) for s in d.get("schedule", ())),
                choices=tuple(
                    ((int(c["process"]), int(c["action"])), str(c["value"]))
                    for c in d.get("choices", ())
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedTraceError(f"cannot decode trace: {exc!r}") from exc
        if "commitments" in d:
            recorded = [[Commitment(**c) for c in cs] for cs in d["commitments"]]
            if [list(cs) for cs in trace.commitments] != recorded:
                raise MalformedTraceError("commitments table disagrees with events")
        return trace

    @classmethod
    def from_json(cls, text: str) -> Trace:
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise MalformedTraceError(f"line {exc.lineno}: {exc.msg}") from exc


# ---------------------------------------------------------------------------
# precedence relations


@dataclass(frozen=True)
class PrecedenceRelation:
    events: frozenset[str]
    pairs: frozenset[tuple[str, str]]

    @classmethod
    def of(cls, pairs: Iterable[tuple[str, str]], events: Iterable[str] = ()) -> PrecedenceRelation:
        pairs = frozenset(pairs)
        evs = set(events)
        for a, b in pairs:
            evs.update((a, b))
        return cls(frozenset(evs), pairs)

    def successors(self) -> dict[str, set[str]]:
        succ: dict[str, set[str]] = {e: set() for e in self.events}
        for a, b in self.pairs:
            succ.setdefault(a, set()).add(b)
        return succ

    def precedes(self, a: str, b: str) -> bool:
        return (a, b) in self.pairs

    def comparable(self, a: str, b: str) -> bool:
        return (a, b) in self.pairs or (b, a) in self.pairs


@dataclass(frozen=True, slots=True)
class Violation:
    axiom: str
    events: tuple[str, ...]


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def by_axiom(self, axiom: str) -> list[Violation]:
        return [v for v in self.violations if v.axiom == axiom]


def _check_members(rel: PrecedenceRelation) -> None:
    for a, b in rel.pairs:
        for e in (a, b):
            if e not in rel.events:
                raise MalformedRelationError(f"pair ({a}, {b}) references unknown event {e!r}")


def validate_partial_order(rel: PrecedenceRelation) -> ValidationReport:
    """Check the three strict-order axioms independently.

    Each axiom is reported on its own even where one implies another, so a
    single defect may surface under several axioms.  A self-loop counts only
    against irreflexivity.
    """
    _check_members(rel)
    pairs = rel.pairs
    found: list[Violation] = []
    for a, b in sorted(pairs):
        if a == b:
            found.append(Violation("Irreflexivity", (a,)))
    succ = rel.successors()
    for a, b in sorted(pairs):
        for c in sorted(succ.get(b, ())):
            if (a, c) not in pairs:
                found.append(Violation("Transitivity", (a, b, c)))
    for a, b in sorted(pairs):
        if a < b and (b, a) in pairs:
            found.append(Violation("Antisymmetry", (a, b)))
    return ValidationReport(tuple(found))


def transitive_closure(rel: PrecedenceRelation) -> PrecedenceRelation:
    succ = rel.successors()
    closed: set[tuple[str, str]] = set()
    for start in succ:
        seen: set[str] = set()
        todo = list(succ[start])
        while todo:
            x = todo.pop()
            if x in seen:
                continue
            seen.add(x)
            todo.extend(succ.get(x, ()))
        closed.update((start, x) for x in seen)
    return PrecedenceRelation(rel.events, frozenset(closed))


# ---------------------------------------------------------------------------
# constraint systems


@dataclass(frozen=True)
class Constraint:
    scope: tuple[int, ...]
    allowed: frozenset[tuple[str, ...]]
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "scope", tuple(self.scope))
        object.__setattr__(self, "allowed", frozenset(tuple(t) for t in self.allowed))
        if len(set(self.scope)) != len(self.scope):
            raise ConstraintSystemError(f"constraint scope repeats a participant: {self.scope}")
        for t in self.allowed:
            if len(t) != len(self.scope):
                raise ArityError(f"tuple {t} does not match scope {self.scope}")

    def project(self, valuation: Sequence[str]) -> tuple[str, ...]:
        return tuple(valuation[i] for i in self.scope)

    def holds(self, valuation: Sequence[str]) -> bool:
        return self.project(valuation) in self.allowed


def is_symmetric(c: Constraint) -> bool:
    if len(c.scope) != 2:
        raise ArityError(f"symmetry is defined for binary constraints, scope has {len(c.scope)}")
    return all((y, x) in c.allowed for x, y in c.allowed)


@dataclass(frozen=True)
class ConstraintSystem:
    """Finite local domains plus extensional constraints.

    Domain order is significant: it fixes enumeration order everywhere.
    ``emptied`` lists participants whose domain was legitimately emptied by
    evidence narrowing; any other empty domain is rejected.
    """

    domains: tuple[tuple[str, ...], ...]
    constraints: tuple[Constraint, ...] = ()
    emptied: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "domains", tuple(tuple(d) for d in self.domains))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "emptied", frozenset(self.emptied))
        n = len(self.domains)
        for i, dom in enumerate(self.domains):
            if len(set(dom)) != len(dom):
                raise ConstraintSystemError(f"domain {i} has duplicate values")
            if not dom and i not in self.emptied:
                raise ConstraintSystemError(f"domain {i} is empty but not flagged as emptied")
        for i in self.emptied:
            if not 0 <= i < n or self.domains[i]:
                raise ConstraintSystemError(f"participant {i} flagged emptied but has values")
        doms = [set(d) for d in self.domains]
        for k, c in enumerate(self.constraints):
            for i in c.scope:
                if not 0 <= i < n:
                    raise ConstraintSystemError(f"constraint {k} scope references participant {i}")
            for t in c.allowed:
                for i, v in zip(c.scope, t):
                    if v not in doms[i]:
                        raise ConstraintSystemError(
                            f"constraint {k} allows {v!r} outside domain of participant {i}")

    @property
    def n(self) -> int:
        return len(self.domains)

    @property
    def unsatisfiable_by_evidence(self) -> bool:
        return bool(self.emptied)

    def product_size(self) -> int:
        size = 1
        for d in self.domains:
            size *= len(d)
        return size

    def valuations(self) -> Iterable[Valuation]:
        return product(*self.domains)

    def to_dict(self) -> dict[str, Any]:
        index = [{v: k for k, v in enumerate(d)} for d in self.domains]

        def order(c: Constraint):
            return sorted(c.allowed, key=lambda t: [index[i][v] for i, v in zip(c.scope, t)])

        return {
            "domains": [list(d) for d in self.domains],
            "constraints": [
                {"scope": list(c.scope), "label": c.label, "allowed": [list(t) for t in order(c)]}
                for c in self.constraints
            ],
            "emptied": sorted(self.emptied),
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ConstraintSystem:
        try:
            return cls(
                domains=tuple(tuple(str(v) for v in dom) for dom in d["domains"]),
                constraints=tuple(
                    Constraint(tuple(c["scope"]),
                               frozenset(tuple(str(v) for v in t) for t in c["allowed"]),
                               c.get("label", ""))
                    for c in d.get("constraints", ())
                ),
                emptied=frozenset(d.get("emptied", ())),
            )
        except (KeyError, TypeError) as exc:
            raise ConstraintSystemError(f"cannot decode constraint system: {exc!r}") from exc

    @classmethod
    def from_json(cls, text: str) -> ConstraintSystem:
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConstraintSystemError(f"line {exc.lineno}: {exc.msg}") from exc


# ---------------------------------------------------------------------------
# happens-before, clocks, pomsets


def _check_trace(trace: Trace) -> dict[int, list[Event]]:
    ids = [e.id for e in trace.events]
    if len(set(ids)) != len(ids):
        raise MalformedTraceError("duplicate event ids")
    per: dict[int, list[Event]] = defaultdict(list)
    for ev in trace.events:
        if not 0 <= ev.process < trace.n:
            raise MalformedTraceError(f"event {ev.id} names process {ev.process} outside 0..{trace.n - 1}")
        per[ev.process].append(ev)
    for p, evs in per.items():
        evs.sort(key=lambda e: e.local_seq)
        if [e.local_seq for e in evs] != list(range(len(evs))):
            raise MalformedTraceError(f"process P{p} local sequence numbers are not 0..k")
    produced = {e.evidence_id for e in trace.events if e.kind is EventKind.COMMIT}
    for ev in trace.events:
        if ev.kind is EventKind.OBSERVE and ev.evidence_id not in produced:
            raise MalformedTraceError(f"event {ev.id} observes unknown evidence {ev.evidence_id}")
    return per


def _generator_edges(trace: Trace) -> tuple[dict[int, list[Event]], list[tuple[str, str]]]:
    per = _check_trace(trace)
    edges: list[tuple[str, str]] = []
    for evs in per.values():
        edges.extend((a.id, b.id) for a, b in zip(evs, evs[1:]))
    producer = {e.evidence_id: e.id for e in trace.events if e.kind is EventKind.COMMIT}
    for ev in trace.events:
        if ev.kind is EventKind.OBSERVE:
            edges.append((producer[ev.evidence_id], ev.id))
    return per, edges


def derive_happens_before(trace: Trace) -> PrecedenceRelation:
    """Program order plus commit-to-observation edges, transitively closed."""
    _, edges = _generator_edges(trace)
    base = PrecedenceRelation(frozenset(e.id for e in trace.events), frozenset(edges))
    return transitive_closure(base)


def assign_lamport_clocks(trace: Trace) -> dict[str, int]:
    per, edges = _generator_edges(trace)
    report = validate_partial_order(transitive_closure(
        PrecedenceRelation(frozenset(e.id for e in trace.events), frozenset(edges))))
    if not report.ok:
        raise OrderViolationError(f"induced relation is not a strict order: {report.violations[0]}")

    local_pred: dict[str, str] = {}
    for evs in per.values():
        for a, b in zip(evs, evs[1:]):
            local_pred[b.id] = a.id
    producer = {e.evidence_id: e.id for e in trace.events if e.kind is EventKind.COMMIT}
    by_id = {e.id: e for e in trace.events}
    indeg = {e.id: 0 for e in trace.events}
    succ: dict[str, list[str]] = defaultdict(list)
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1

    clock: dict[str, int] = {}
    ready = deque(e.id for e in trace.events if indeg[e.id] == 0)
    while ready:
        eid = ready.popleft()
        ev = by_id[eid]
        prev = clock[local_pred[eid]] if eid in local_pred else 0
        if ev.kind is EventKind.OBSERVE:
            prev = max(prev, clock[producer[ev.evidence_id]])
        clock[eid] = prev + 1
        for nxt in succ[eid]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    return clock


@dataclass(frozen=True)
class Pomset:
    labels: Mapping[str, tuple[int, str]]
    order: PrecedenceRelation

    def __post_init__(self) -> None:
        if set(self.labels) != set(self.order.events):
            raise MalformedRelationError("pomset labels and order cover different events")
        report = validate_partial_order(self.order)
        if not report.ok:
            raise OrderViolationError(f"pomset order is not a strict order: {report.violations[0]}")

    def __len__(self) -> int:
        return len(self.labels)

    def incomparable_pairs(self) -> list[tuple[str, str]]:
        evs = sorted(self.labels)
        return [
            (a, b)
            for i, a in enumerate(evs)
            for b in evs[i + 1:]
            if not self.order.comparable(a, b)
        ]

    def is_total(self) -> bool:
        return not self.incomparable_pairs()


def build_pomset(trace: Trace) -> Pomset:
    order = derive_happens_before(trace)
    labels = {e.id: (e.process, e.kind.value) for e in trace.events}
    return Pomset(labels, order)


def count_linear_extensions(p: Pomset) -> int:
    """Number of total orders extending ``p.order`` (subset dynamic programming)."""
    events = sorted(p.labels)
    k = len(events)
    if k > MAX_LINEAR_EXTENSION_EVENTS:
        raise SizeError(f"{k} events exceeds the linear-extension bound of {MAX_LINEAR_EXTENSION_EVENTS}")
    pos = {e: i for i, e in enumerate(events)}
    need = [0] * k
    for a, b in p.order.pairs:
        need[pos[b]] |= 1 << pos[a]
    ways = [0] * (1 << k)
    ways[0] = 1
    for mask in range(1 << k):
        if not ways[mask]:
            continue
        for i in range(k):
            bit = 1 << i
            if not mask & bit and need[i] & mask == need[i]:
                ways[mask | bit] += ways[mask]
    return ways[(1 << k) - 1]
