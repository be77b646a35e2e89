"""Exception hierarchy shared by every module."""

from __future__ import annotations


class MsgCspError(Exception):
    """Base class for all errors raised by msgcsp."""


class MalformedRelationError(MsgCspError):
    """A precedence pair references an event outside the relation's event set."""


class MalformedTraceError(MsgCspError):
    """A trace is internally inconsistent (dangling evidence, bad sequencing)."""


class OrderViolationError(MsgCspError):
    """An induced precedence relation is not a strict partial order."""


class ArityError(MsgCspError):
    pass


class SizeError(MsgCspError):
    """An exhaustive procedure would exceed its configured bound."""


class DomainError(MsgCspError):
    """A value lies outside the domain it is supposed to be drawn from."""


class ConstraintSystemError(MsgCspError):
    pass


class ScenarioError(MsgCspError):
    """A scenario document or object violates the scenario schema."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if path:
            where.append(f"at {path}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class DeadlockError(MsgCspError):
    def __init__(self, blocked: list[int]):
        self.blocked = list(blocked)
        names = ", ".join(f"P{p}" for p in self.blocked)
        super().__init__(f"deadlock: every unfinished process is blocked on RECEIVE ({names})")


class IncompleteChoicesError(MsgCspError):
    def __init__(self, missing: list[tuple[int, int]]):
        self.missing = list(missing)
        points = ", ".join(f"P{p}@{a}" for p, a in self.missing)
        super().__init__(f"no value supplied for choice point(s): {points}")


class ProvenanceError(MsgCspError):
    """A trace does not belong to the scenario it is paired with."""


class ProtocolIntegrityError(MsgCspError):
    """A realizer certificate failed re-verification; this is an implementation bug."""


class UnknownConstraintError(MsgCspError, LookupError):
    pass


class TransitionError(MsgCspError):
    def __init__(self, phase: object, event: object):
        self.phase = phase
        self.event = event
        super().__init__(f"illegal link transition: phase {phase} cannot accept {event}")


class StateError(MsgCspError):
    pass
