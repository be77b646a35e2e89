"""Satisfying valuations of a ConstraintSystem.

``solve_bruteforce`` walks the whole domain product and is the ground truth.
``solve_search`` is backtracking in declaration order, maintaining AC-3 arc
consistency over binary constraints and forward checking every wider
constraint.  Both return valuations in the same lexicographic order.
"""

from __future__ import annotations

import json
from collections import deque
from typing import Sequence

from .core import ConstraintSystem, Valuation, canonical_json
from .errors import ArityError, DomainError, SizeError

MAX_PRODUCT = 10**6


def check_valuation(csp: ConstraintSystem, v: Sequence[str]) -> bool:
    if len(v) != csp.n:
        raise ArityError(f"valuation has {len(v)} values, system has {csp.n} participants")
    for i, (x, dom) in enumerate(zip(v, csp.domains)):
        if x not in dom:
            raise DomainError(f"value {x!r} is not in the domain of participant {i}")
    return all(c.holds(v) for c in csp.constraints)


def solve_bruteforce(csp: ConstraintSystem, max_product: int = MAX_PRODUCT) -> list[Valuation]:
    size = csp.product_size()
    if size > max_product:
        raise SizeError(f"domain product {size} exceeds the brute-force bound of {max_product}")
    return [v for v in csp.valuations() if all(c.holds(v) for c in csp.constraints)]


class _Search:
    def __init__(self, csp: ConstraintSystem):
        self.n = csp.n
        self.pairs: dict[tuple[int, int], set[tuple[str, str]]] = {}
        self.wide = []
        self.trivially_unsat = False
        unary: dict[int, set[str]] = {}
        for c in csp.constraints:
            if len(c.scope) == 2:
                i, j = c.scope
                fwd = set(c.allowed)
                bwd = {(y, x) for x, y in c.allowed}
                self.pairs[(i, j)] = self.pairs[(i, j)] & fwd if (i, j) in self.pairs else fwd
                self.pairs[(j, i)] = self.pairs[(j, i)] & bwd if (j, i) in self.pairs else bwd
            elif len(c.scope) == 1:
                keep = {t[0] for t in c.allowed}
                i = c.scope[0]
                unary[i] = unary[i] & keep if i in unary else keep
            elif len(c.scope) == 0:
                if () not in c.allowed:
                    self.trivially_unsat = True
            else:
                self.wide.append((c.scope, list(c.allowed)))
        self.neighbors: dict[int, list[int]] = {i: [] for i in range(self.n)}
        for i, j in self.pairs:
            self.neighbors[i].append(j)
        self.initial = [
            [x for x in dom if i not in unary or x in unary[i]]
            for i, dom in enumerate(csp.domains)
        ]

    def _revise(self, doms: list[list[str]], i: int, j: int) -> bool:
        rel = self.pairs[(i, j)]
        dj = doms[j]
        keep = [x for x in doms[i] if any((x, y) in rel for y in dj)]
        if len(keep) != len(doms[i]):
            doms[i] = keep
            return True
        return False

    def _ac3(self, doms: list[list[str]], queue: deque) -> bool:
        while queue:
            i, j = queue.popleft()
            if self._revise(doms, i, j):
                if not doms[i]:
                    return False
                queue.extend((k, i) for k in self.neighbors[i] if k != j)
        return True

    def _forward_check(self, doms: list[list[str]]) -> set[int] | None:
        """Prune scope domains to values some still-possible allowed tuple supports."""
        changed: set[int] = set()
        for scope, allowed in self.wide:
            live = [set(doms[i]) for i in scope]
            support = [set() for _ in scope]
            for t in allowed:
                if all(x in live[k] for k, x in enumerate(t)):
                    for k, x in enumerate(t):
                        support[k].add(x)
            for k, i in enumerate(scope):
                if len(support[k]) != len(doms[i]):
                    doms[i] = [x for x in doms[i] if x in support[k]]
                    if not doms[i]:
                        return None
                    changed.add(i)
        return changed

    def propagate(self, doms: list[list[str]], queue: deque) -> bool:
        while True:
            if not self._ac3(doms, queue):
                return False
            changed = self._forward_check(doms)
            if changed is None:
                return False
            if not changed:
                return True
            queue = deque((k, i) for i in sorted(changed) for k in self.neighbors[i])

    def solutions(self) -> list[Valuation]:
        if self.trivially_unsat or any(not d for d in self.initial):
            return []
        doms = [list(d) for d in self.initial]
        if not self.propagate(doms, deque(self.pairs)):
            return []
        out: list[Valuation] = []
        self._extend(0, doms, out)
        return out

    def _extend(self, var: int, doms: list[list[str]], out: list[Valuation]) -> None:
        if var == self.n:
            out.append(tuple(d[0] for d in doms))
            return
        for x in doms[var]:
            trial = list(doms)
            trial[var] = [x]
            if self.propagate(trial, deque((k, var) for k in self.neighbors[var])):
                self._extend(var + 1, trial, out)


def solve_search(csp: ConstraintSystem) -> list[Valuation]:
    return _Search(csp).solutions()


def solutions_to_json(solutions: Sequence[Valuation]) -> str:
    return canonical_json([list(v) for v in solutions])


def solutions_from_json(text: str) -> list[Valuation]:
    return [tuple(v) for v in json.loads(text)]
