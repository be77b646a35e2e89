"""Bilateral reflective link over a lossy channel.

Three legs: A proposes; B reflects what it heard together with its own
proposal; A confirms that it heard B hearing it.  Each endpoint is a pure
state machine accumulating evidence tokens.  Lost legs are retried a
bounded number of *attempts*; nothing here measures time.

Decision rule:

* COMMIT once an endpoint holds all three evidence tokens.
* The initiator A aborts when attempts run out before it committed.  The
  responder commits only on A's confirmation, which A sends only after
  committing, so this cannot diverge.
* The responder never aborts: without the confirmation it cannot tell
  whether A committed, so it ends UNDECIDED.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable

from .core import Constraint, canonical_json
from .errors import StateError, TransitionError

OWN_PROPOSAL = "own_proposal"
PEER_PROPOSAL_HEARD = "peer_proposal_heard"
PEER_HEARD_ME = "peer_heard_me"
FULL_EVIDENCE = frozenset({OWN_PROPOSAL, PEER_PROPOSAL_HEARD, PEER_HEARD_ME})


class Side(str, Enum):
    A = "A"
    B = "B"


class Phase(str, Enum):
    IDLE = "IDLE"
    PROPOSED = "PROPOSED"
    HEARD = "HEARD"
    DECIDED = "DECIDED"
    UNDECIDED = "UNDECIDED"


class Decision(str, Enum):
    COMMIT = "COMMIT"
    ABORT = "ABORT"


class Input(str, Enum):
    SEND_PROPOSAL = "send_proposal"
    RECV_PROPOSAL = "recv_proposal"
    RECV_HEARD_ME = "recv_heard_me"
    SEND_CONFIRM = "send_confirm"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True, slots=True)
class EndpointState:
    side: Side
    phase: Phase = Phase.IDLE
    evidence: frozenset[str] = frozenset()
    attempts: int = 0
    decision: Decision | None = None

    @property
    def terminal(self) -> bool:
        return self.phase in (Phase.DECIDED, Phase.UNDECIDED)

    @property
    def verdict(self) -> str:
        """COMMIT, ABORT or UNDECIDED for terminal states, else the phase name."""
        return self.decision.value if self.decision else self.phase.value

    def to_dict(self) -> dict[str, Any]:
        return {
            "side": self.side.value,
            "phase": self.phase.value,
            "decision": self.decision.value if self.decision else None,
            "evidence": sorted(self.evidence),
            "attempts": self.attempts,
        }


def step_link(state: EndpointState, event: Input) -> EndpointState:
    phase = state.phase
    if phase in (Phase.DECIDED, Phase.UNDECIDED):
        if event in (Input.SEND_PROPOSAL, Input.SEND_CONFIRM):
            return replace(state, attempts=state.attempts + 1)
        return state

    if event is Input.SEND_PROPOSAL:
        grown = replace(state, evidence=state.evidence | {OWN_PROPOSAL}, attempts=state.attempts + 1)
        if phase is Phase.IDLE:
            return replace(grown, phase=Phase.PROPOSED)
        return grown
    if event is Input.RECV_PROPOSAL:
        return replace(state, phase=Phase.HEARD, evidence=state.evidence | {PEER_PROPOSAL_HEARD})
    if event is Input.RECV_HEARD_ME and phase is Phase.HEARD and OWN_PROPOSAL in state.evidence:
        evidence = state.evidence | {PEER_HEARD_ME}
        if evidence >= FULL_EVIDENCE:
            return replace(state, phase=Phase.DECIDED, evidence=evidence, decision=Decision.COMMIT)
        return replace(state, evidence=evidence)
    if event is Input.EXHAUSTED:
        if state.side is Side.A and OWN_PROPOSAL in state.evidence:
            return replace(state, phase=Phase.DECIDED, decision=Decision.ABORT)
        return replace(state, phase=Phase.UNDECIDED)
    raise TransitionError(phase.value, event.value)


@dataclass(frozen=True, slots=True)
class LinkConfig:
    max_attempts: int = 5
    loss: float = 0.0

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if not 0.0 <= self.loss <= 1.0:
            raise ValueError("loss probability must lie in [0, 1]")


@dataclass(frozen=True, slots=True)
class ChannelEvent:
    leg: str
    attempt: int
    delivered: bool


@dataclass(frozen=True)
class LinkRun:
    config: LinkConfig
    seed: int
    transcript: tuple[ChannelEvent, ...]
    terminal: tuple[EndpointState, EndpointState]
    history: tuple[tuple[EndpointState, EndpointState], ...] = ()

    @property
    def pair(self) -> tuple[str, str]:
        return (self.terminal[0].verdict, self.terminal[1].verdict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": {"max_attempts": self.config.max_attempts, "loss": self.config.loss},
            "seed": self.seed,
            "transcript": [
                {"leg": e.leg, "attempt": e.attempt, "delivered": e.delivered} for e in self.transcript
            ],
            "terminal": [s.to_dict() for s in self.terminal],
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())


LEGS = (
    # name, sender, sender input, receiver inputs on delivery
    ("propose", 0, Input.SEND_PROPOSAL, (Input.RECV_PROPOSAL,)),
    ("reflect", 1, Input.SEND_PROPOSAL, (Input.RECV_PROPOSAL, Input.RECV_HEARD_ME)),
    ("confirm", 0, Input.SEND_CONFIRM, (Input.RECV_HEARD_ME,)),
)


def run_link_exchange(config: LinkConfig, seed: int) -> LinkRun:
    rng = random.Random(seed)
    ends = [EndpointState(Side.A), EndpointState(Side.B)]
    transcript: list[ChannelEvent] = []
    history = [tuple(ends)]
    for leg, sender, send_input, on_delivery in LEGS:
        receiver = 1 - sender
        delivered = False
        for attempt in range(1, config.max_attempts + 1):
            ends[sender] = step_link(ends[sender], send_input)
            delivered = rng.random() >= config.loss
            transcript.append(ChannelEvent(leg, attempt, delivered))
            if delivered:
                for inp in on_delivery:
                    ends[receiver] = step_link(ends[receiver], inp)
            history.append(tuple(ends))
            if delivered:
                break
        if not delivered:
            break
    ends = [step_link(e, Input.EXHAUSTED) for e in ends]
    history.append(tuple(ends))
    return LinkRun(config, seed, tuple(transcript), (ends[0], ends[1]), tuple(history))


UNDECIDED = Phase.UNDECIDED.value
_VERDICTS = (Decision.COMMIT.value, Decision.ABORT.value, UNDECIDED)

# Bilateral agreement as a symmetric binary compatibility relation.
AGREEMENT = Constraint(
    (0, 1),
    frozenset(
        {(Decision.COMMIT.value, Decision.COMMIT.value), (Decision.ABORT.value, Decision.ABORT.value)}
        | {(UNDECIDED, x) for x in _VERDICTS}
        | {(x, UNDECIDED) for x in _VERDICTS}
    ),
    "bilateral-agreement",
)


def link_outcome_constraint(run: LinkRun) -> bool:
    a, b = run.terminal
    if not (a.terminal and b.terminal):
        raise StateError(f"link run is not terminal: ({a.phase.value}, {b.phase.value})")
    return AGREEMENT.holds(run.pair)


def is_divergent(run: LinkRun) -> bool:
    return set(run.pair) == {Decision.COMMIT.value, Decision.ABORT.value}


def sweep(losses: Iterable[float], max_attempts: int, seeds: int) -> dict[str, Any]:
    """Terminal-pair histogram per loss rate over seeds ``0..seeds-1``."""
    rates = []
    for loss in losses:
        config = LinkConfig(max_attempts, loss)
        counts: Counter[str] = Counter()
        divergences = violations = 0
        for seed in range(seeds):
            run = run_link_exchange(config, seed)
            counts[f"{run.pair[0]}/{run.pair[1]}"] += 1
            divergences += is_divergent(run)
            violations += not link_outcome_constraint(run)
        rates.append({
            "loss": loss,
            "runs": seeds,
            "pairs": dict(sorted(counts.items())),
            "divergences": divergences,
            "constraint_violations": violations,
        })
    return {"max_attempts": max_attempts, "rates": rates,
            "ok": all(r["divergences"] == 0 and r["constraint_violations"] == 0 for r in rates)}
