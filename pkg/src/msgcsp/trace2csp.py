"""Compile a scenario, optionally with one of its traces, into a ConstraintSystem.

Local domains start as the final values a process's own script can reach.
Observed evidence of a process's final commitment then pins that
process to the observed value.  The acceptance predicate becomes a single
global constraint over the narrowed product.  Rule-form predicates can
instead be emitted as one binary constraint per pair of participants.
"""

from __future__ import annotations

from itertools import product

from .core import Constraint, ConstraintSystem, Trace, Valuation
from .errors import MalformedTraceError, ProvenanceError, SizeError
from .simulator import PAIRWISE_RULES, Scenario

MAX_GLOBAL_PRODUCT = 10**6


def script_domains(s: Scenario) -> tuple[tuple[str, ...], ...]:
    """Final values each process can commit to, judged from its script alone."""
    out = []
    for p in range(s.n):
        last = s.final_commit_action(p)
        out.append((last.value,) if last.op == "commit" else s.domains[p])
    return tuple(out)


def _check_provenance(s: Scenario, t: Trace) -> None:
    if t.scenario and s.name and t.scenario != s.name:
        raise ProvenanceError(f"trace belongs to scenario {t.scenario!r}, not {s.name!r}")
    if t.n != s.n:
        raise ProvenanceError(f"trace has {t.n} processes, scenario has {s.n}")
    for p, cs in enumerate(t.commitments):
        if len(cs) != s.commit_count(p):
            raise ProvenanceError(
                f"P{p} made {len(cs)} commitments in the trace, its script makes {s.commit_count(p)}")
        for c in cs:
            if c.value not in s.domains[p]:
                raise ProvenanceError(f"P{p} committed {c.value!r}, outside its declared domain")


def narrow_domains(s: Scenario, t: Trace) -> tuple[tuple[str, ...], ...]:
    """Per-process final values consistent with the script and the evidence observed in ``t``.

    Only positive observations narrow: a final commitment nobody observed
    leaves its process at the script-reachable domain.
    """
    _check_provenance(s, t)
    table = t.evidence_table
    domains = [list(d) for d in script_domains(s)]
    for obs in t.observations:
        c = table.get(obs.evidence_id)
        if c is None:
            raise MalformedTraceError(f"observation of unknown evidence {obs.evidence_id}")
        if c.index == s.commit_count(c.process) - 1:
            domains[c.process] = [x for x in domains[c.process] if x == c.value]
    return tuple(tuple(d) for d in domains)


def can_factor(s: Scenario) -> bool:
    return s.acceptance.kind == "rule" and s.acceptance.rule in PAIRWISE_RULES


def compile_trace(s: Scenario, t: Trace | None = None, factor: bool = False) -> ConstraintSystem:
    domains = narrow_domains(s, t) if t is not None else script_domains(s)
    emptied = frozenset(i for i, d in enumerate(domains) if not d)

    if factor:
        if not can_factor(s):
            raise ValueError("only rule-form acceptance predicates have a binary factoring")
        rule = s.acceptance.rule
        pair_ok = PAIRWISE_RULES[rule]
        constraints = tuple(
            Constraint((i, j),
                       frozenset((x, y) for x in domains[i] for y in domains[j] if pair_ok(x, y)),
                       f"{rule}:{i},{j}")
            for i in range(s.n)
            for j in range(i + 1, s.n)
        )
        return ConstraintSystem(domains, constraints, emptied)

    size = 1
    for d in domains:
        size *= len(d)
    if size > MAX_GLOBAL_PRODUCT:
        raise SizeError(f"global constraint over {size} tuples exceeds {MAX_GLOBAL_PRODUCT}")
    allowed: frozenset[Valuation] = frozenset(
        v for v in product(*domains) if s.acceptance.accepts(v))
    label = f"acceptance:{s.acceptance.rule}" if s.acceptance.kind == "rule" else "acceptance"
    return ConstraintSystem(domains, (Constraint(tuple(range(s.n)), allowed, label),), emptied)
