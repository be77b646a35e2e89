"""A certificate-exchange protocol whose terminal outcomes are a CSP's solutions.

Every agent owns one participant.  In round ``r`` each agent proposes its
component of the ``r``-th candidate in the cyclic lexicographic walk that
starts at the agents' initial proposals, checks the constraints it owns
(those whose lowest-indexed participant it is), and broadcasts a
certificate: SATISFIED, or a COUNTEREXAMPLE naming the violated constraint
and tuple.  Once an agent holds all certificates for the round it either
accepts the candidate or advances.  Messages travel over an unordered
reliable channel stepped by a seeded scheduler; the seed changes the
interleaving and never the outcome.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

from .core import ConstraintSystem, Valuation, canonical_json
from .errors import ArityError, DomainError, ProtocolIntegrityError, SizeError, UnknownConstraintError
from .simulator import sort_valuations

MAX_PRODUCT = 10**6


class Verdict(str, Enum):
    SATISFIED = "SATISFIED"
    COUNTEREXAMPLE = "COUNTEREXAMPLE"


@dataclass(frozen=True, slots=True)
class Certificate:
    issuer: int
    candidate: Valuation
    verdict: Verdict
    constraint_ids: tuple[int, ...]
    round: int
    violating: tuple[str, ...] | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "issuer": self.issuer,
            "candidate": list(self.candidate),
            "verdict": self.verdict.value,
            "constraints": list(self.constraint_ids),
            "round": self.round,
        }
        if self.violating is not None:
            d["violating"] = list(self.violating)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Certificate:
        violating = d.get("violating")
        return cls(d["issuer"], tuple(d["candidate"]), Verdict(d["verdict"]),
                   tuple(d["constraints"]), d["round"],
                   tuple(violating) if violating is not None else None)


def verify_certificate(csp: ConstraintSystem, cert: Certificate) -> bool:
    """True iff the certificate's verdict re-checks against ``csp``."""
    for k in cert.constraint_ids:
        if not 0 <= k < len(csp.constraints):
            raise UnknownConstraintError(f"certificate names constraint {k}; system has {len(csp.constraints)}")
    if cert.round < 0 or len(cert.candidate) != csp.n:
        return False
    if any(x not in dom for x, dom in zip(cert.candidate, csp.domains)):
        return False
    if cert.verdict is Verdict.SATISFIED:
        return cert.violating is None and all(
            csp.constraints[k].holds(cert.candidate) for k in cert.constraint_ids)
    if len(cert.constraint_ids) != 1 or cert.violating is None:
        return False
    c = csp.constraints[cert.constraint_ids[0]]
    return tuple(cert.violating) == c.project(cert.candidate) and tuple(cert.violating) not in c.allowed


def owner_of(scope: Sequence[int]) -> int:
    return min(scope) if scope else 0


class Phase(str, Enum):
    PROPOSING = "PROPOSING"
    VERIFYING = "VERIFYING"
    ADVANCING = "ADVANCING"
    TERMINAL = "TERMINAL"


@dataclass(frozen=True, slots=True)
class Proposal:
    sender: int
    round: int
    value: str


class _Walk:
    """Cyclic lexicographic candidate order over the domain product."""

    def __init__(self, domains: Sequence[Sequence[str]]):
        self.domains = domains
        self.index = [{v: k for k, v in enumerate(d)} for d in domains]
        self.total = 1
        for d in domains:
            self.total *= len(d)

    def rank(self, v: Sequence[str]) -> int:
        r = 0
        for i, x in enumerate(v):
            r = r * len(self.domains[i]) + self.index[i][x]
        return r

    def unrank(self, r: int) -> Valuation:
        out = []
        for d in reversed(self.domains):
            r, k = divmod(r, len(d))
            out.append(d[k])
        return tuple(reversed(out))


class Agent:
    """One participant: proposes its own value, verifies the constraints it owns."""

    def __init__(self, me: int, csp: ConstraintSystem, initial: str):
        if initial not in csp.domains[me]:
            raise DomainError(f"initial proposal {initial!r} not in domain of participant {me}")
        self.me = me
        self.csp = csp
        self.walk = _Walk(csp.domains)
        self.owned = [k for k, c in enumerate(csp.constraints) if owner_of(c.scope) == me]
        self.proposal = initial
        self.cursor = 0
        self.start_rank: int | None = None
        self.phase = Phase.PROPOSING
        self.outcome: Valuation | None = None
        self.proposals: dict[int, dict[int, str]] = {}
        self.certificates: dict[int, dict[int, Certificate]] = {}
        self.issued: list[Certificate] = []

    @property
    def terminal(self) -> bool:
        return self.phase is Phase.TERMINAL

    def _broadcast(self, msg) -> list[tuple[int, Any]]:
        return [(k, msg) for k in range(self.csp.n)]

    def begin(self) -> list[tuple[int, Any]]:
        return self._broadcast(Proposal(self.me, 0, self.proposal))

    def receive(self, msg: Proposal | Certificate) -> list[tuple[int, Any]]:
        if self.terminal or msg.round < self.cursor:
            raise ProtocolIntegrityError(f"agent {self.me} got a stale message for round {msg.round}")
        if isinstance(msg, Proposal):
            self.proposals.setdefault(msg.round, {})[msg.sender] = msg.value
        else:
            if not verify_certificate(self.csp, msg):
                raise ProtocolIntegrityError(f"certificate from agent {msg.issuer} fails verification")
            self.certificates.setdefault(msg.round, {})[msg.issuer] = msg
        return self._progress()

    def _progress(self) -> list[tuple[int, Any]]:
        out: list[tuple[int, Any]] = []
        n = self.csp.n
        while not self.terminal:
            r = self.cursor
            if self.phase is Phase.PROPOSING:
                got = self.proposals.get(r, {})
                if len(got) < n:
                    break
                heard = tuple(got[k] for k in range(n))
                if self.start_rank is None:
                    self.start_rank = self.walk.rank(heard)
                if heard != self._candidate():
                    raise ProtocolIntegrityError(f"round {r} proposals {heard} disagree with the walk")
                self.phase = Phase.VERIFYING
                cert = self._verify_owned(heard)
                self.issued.append(cert)
                out.extend(self._broadcast(cert))
                self.phase = Phase.ADVANCING
            else:
                certs = self.certificates.get(r, {})
                if len(certs) < n:
                    break
                del self.proposals[r], self.certificates[r]
                candidate = self._candidate()
                if any(c.verdict is Verdict.COUNTEREXAMPLE for c in certs.values()):
                    self.cursor += 1
                    if self.cursor == self.walk.total:
                        self.phase = Phase.TERMINAL
                        break
                    self.proposal = self._candidate()[self.me]
                    self.phase = Phase.PROPOSING
                    out.extend(self._broadcast(Proposal(self.me, self.cursor, self.proposal)))
                else:
                    self._check_accept(candidate, certs)
                    self.outcome = candidate
                    self.phase = Phase.TERMINAL
        return out

    def _candidate(self) -> Valuation:
        return self.walk.unrank((self.start_rank + self.cursor) % self.walk.total)

    def _verify_owned(self, candidate: Valuation) -> Certificate:
        for k in self.owned:
            c = self.csp.constraints[k]
            t = c.project(candidate)
            if t not in c.allowed:
                return Certificate(self.me, candidate, Verdict.COUNTEREXAMPLE, (k,), self.cursor, t)
        return Certificate(self.me, candidate, Verdict.SATISFIED, tuple(self.owned), self.cursor)

    def _check_accept(self, candidate: Valuation, certs: dict[int, Certificate]) -> None:
        covered = set()
        for cert in certs.values():
            if cert.candidate != candidate:
                raise ProtocolIntegrityError("certificates in one round name different candidates")
            covered.update(cert.constraint_ids)
        mine = {k for k, c in enumerate(self.csp.constraints) if self.me in c.scope}
        if not mine <= covered:
            raise ProtocolIntegrityError(f"agent {self.me} would accept without covering {mine - covered}")


@dataclass(frozen=True)
class Realization:
    start: Valuation
    seed: int
    outcome: Valuation | None
    transcript: tuple[Certificate, ...]
    rounds: int
    deliveries: int

    @property
    def accepted(self) -> bool:
        return self.outcome is not None

    def outcome_line(self) -> str:
        if self.outcome is None:
            return "REJECT"
        return "ACCEPT " + json.dumps(list(self.outcome), ensure_ascii=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "start": list(self.start),
            "seed": self.seed,
            "outcome": self.outcome_line(),
            "valuation": list(self.outcome) if self.outcome is not None else None,
            "rounds": self.rounds,
            "deliveries": self.deliveries,
            "transcript": [c.to_dict() for c in self.transcript],
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


def realize(csp: ConstraintSystem, start: Sequence[str], seed: int = 0) -> Realization:
    start = tuple(start)
    if csp.n == 0:
        raise ArityError("a realization needs at least one participant")
    if len(start) != csp.n:
        raise ArityError(f"start has {len(start)} values, system has {csp.n} participants")
    if csp.product_size() > MAX_PRODUCT:
        raise SizeError(f"domain product {csp.product_size()} exceeds {MAX_PRODUCT}")
    agents = [Agent(i, csp, start[i]) for i in range(csp.n)]
    rng = random.Random(seed)
    transcript: list[Certificate] = []
    inflight: list[tuple[int, Any]] = []
    for a in agents:
        inflight.extend(a.begin())
    deliveries = 0
    while inflight:
        k = rng.randrange(len(inflight))
        inflight[k], inflight[-1] = inflight[-1], inflight[k]
        dest, msg = inflight.pop()
        deliveries += 1
        agent = agents[dest]
        before = len(agent.issued)
        inflight.extend(agent.receive(msg))
        transcript.extend(agent.issued[before:])

    if not all(a.terminal for a in agents):
        raise ProtocolIntegrityError("channel drained before every agent reached a terminal phase")
    outcomes = {a.outcome for a in agents}
    if len(outcomes) != 1:
        raise ProtocolIntegrityError(f"agents disagree on the outcome: {outcomes}")
    outcome = outcomes.pop()
    rounds = agents[0].cursor + 1 if outcome is not None else agents[0].cursor
    return Realization(start, seed, outcome, tuple(transcript), rounds, deliveries)


def terminal_outcome_set(csp: ConstraintSystem, seed: int = 0) -> list[Valuation]:
    """Outcomes accepted by ``realize`` from some start, running it from every start."""
    if csp.product_size() > MAX_PRODUCT:
        raise SizeError(f"domain product {csp.product_size()} exceeds {MAX_PRODUCT}")
    accepted = set()
    for start in csp.valuations():
        r = realize(csp, start, seed)
        if r.accepted:
            accepted.add(r.outcome)
    return sort_valuations(csp.domains, accepted)


def transcript_to_json(transcript: Sequence[Certificate]) -> str:
    return canonical_json([c.to_dict() for c in transcript])
