from __future__ import annotations

from itertools import permutations
from typing import Iterable

import pytest

from msgcsp.core import Commitment, Event, PrecedenceRelation, Trace

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def build_trace(n: int, steps: Iterable[tuple], scenario: str = "hand") -> Trace:
    """Hand-built trace from ``(name, process, "commit", value)`` and
    ``(name, process, "observe", producer_name)`` steps, in schedule order."""
    seq = [0] * n
    made = [0] * n
    by_name: dict[str, Event] = {}
    events = []
    for name, p, kind, arg in steps:
        if kind == "commit":
            ev = Event.commit(name, Commitment(p, made[p], arg), seq[p])
            made[p] += 1
        else:
            producer = by_name[arg]
            ev = Event.observe(name, p, seq[p], producer.evidence_id, producer.process)
        seq[p] += 1
        by_name[name] = ev
        events.append(ev)
    return Trace(scenario, n, 0, tuple(events))


def reachability(rel: PrecedenceRelation) -> set[tuple[str, str]]:
    """Brute force: (a, b) iff some simple path of generator edges leads from a to b."""
    succ: dict[str, list[str]] = {}
    for a, b in rel.pairs:
        succ.setdefault(a, []).append(b)
    found = set()

    def walk(origin: str, node: str, path: tuple[str, ...]) -> None:
        for nxt in succ.get(node, ()):
            found.add((origin, nxt))
            if nxt not in path:
                walk(origin, nxt, path + (nxt,))

    for e in rel.events:
        walk(e, e, (e,))
    return found


def count_extensions_by_permutation(events: list[str], pairs: Iterable[tuple[str, str]]) -> int:
    pairs = list(pairs)
    total = 0
    for perm in permutations(events):
        pos = {e: i for i, e in enumerate(perm)}
        if all(pos[a] < pos[b] for a, b in pairs):
            total += 1
    return total


@pytest.fixture
def criterion():
    """Record one acceptance criterion line: ``criterion(label, ok, detail)``."""

    def record(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        _ACCEPTANCE.append((label, ok, line))
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in _ACCEPTANCE:
        terminalreporter.write_line(line)
