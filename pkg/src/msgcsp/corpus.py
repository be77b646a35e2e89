"""Built-in scenarios and seeded generators for random scenarios and CSPs."""

from __future__ import annotations

import random
from itertools import product
from pathlib import Path

from .core import Constraint, ConstraintSystem
from .simulator import Acceptance, Action, Scenario

VOTES = ("c(v1)", "c(v2)", "a")
BINARY_VOTES = ("c(v1)", "a")

C, CH, S, R = Action.commit, Action.choose, Action.send, Action.receive


def _exchange2(rule: str, name: str, explore: bool = False) -> Scenario:
    return Scenario(
        name,
        (VOTES, VOTES),
        ((CH(), S(1, 0), R(1)), (CH(), S(0, 0), R(0))),
        Acceptance.from_rule(rule),
        explore_schedules=explore,
    )


def tpc2_atomic() -> Scenario:
    return _exchange2("atomic-commit", "tpc2-atomic")


def tpc2_weak() -> Scenario:
    return _exchange2("weak-commit", "tpc2-weak")


def tpc2_explore() -> Scenario:
    return _exchange2("atomic-commit", "tpc2-explore", explore=True)


def tpc3() -> Scenario:
    """Coordinator P0 collects two votes, commits a decision, participants commit after it."""
    coordinator = (R(1), R(2), CH(), S(1, 0), S(2, 0))
    participant = lambda: (CH(), S(0, 0), R(0), CH())  # noqa: E731
    return Scenario(
        "tpc3",
        (VOTES, VOTES, VOTES),
        (coordinator, participant(), participant()),
        Acceptance.from_rule("atomic-commit"),
    )


def chain3() -> Scenario:
    return Scenario(
        "chain3",
        (VOTES, VOTES, VOTES),
        ((CH(), S(1, 0)), (R(0), CH(), S(2, 0)), (R(1), CH())),
        Acceptance.from_rule("weak-commit"),
    )


def nocomm() -> Scenario:
    return Scenario(
        "nocomm",
        (("x", "y"), ("x", "y", "z")),
        ((CH(),), (CH(),)),
        Acceptance.extensional([("x", "x"), ("y", "y"), ("y", "z")]),
    )


def empty_accept() -> Scenario:
    return Scenario(
        "empty-accept",
        (("x", "y"), ("x", "y")),
        ((CH(), S(1, 0), R(1)), (CH(), S(0, 0), R(0))),
        Acceptance.extensional([]),
    )


def singleton() -> Scenario:
    return Scenario(
        "singleton",
        (("x",), ("y",)),
        ((C("x"), S(1, 0)), (R(0), C("y"))),
        Acceptance.extensional([("x", "y")]),
    )


def fixed_coordinator() -> Scenario:
    """P0 always commits c(v1); its domain is wider than what its script can reach."""
    return Scenario(
        "fixed-coordinator",
        (VOTES, VOTES),
        ((C("c(v1)"), S(1, 0)), (R(0), CH())),
        Acceptance.from_rule("weak-commit"),
    )


def revote() -> Scenario:
    """Two commitments per process; only the second is the outcome."""
    script = lambda peer: (CH(), S(peer, 0), R(peer), CH(), S(peer, 1), R(peer))  # noqa: E731
    return Scenario(
        "revote",
        (VOTES, VOTES),
        (script(1), script(0)),
        Acceptance.from_rule("atomic-commit"),
    )


def ring3() -> Scenario:
    return Scenario(
        "ring3",
        (BINARY_VOTES,) * 3,
        ((CH(), S(1, 0), R(2)), (CH(), S(2, 0), R(0)), (CH(), S(0, 0), R(1))),
        Acceptance.from_rule("weak-commit"),
        explore_schedules=True,
    )


def star4() -> Scenario:
    hub = (CH(), S(1, 0), S(2, 0), S(3, 0), R(1), R(2), R(3))
    leaf = (CH(), S(0, 0), R(0))
    return Scenario(
        "star4",
        (BINARY_VOTES,) * 4,
        (hub, leaf, leaf, leaf),
        Acceptance.from_rule("atomic-commit"),
    )


def mixed_extensional() -> Scenario:
    return Scenario(
        "mixed-extensional",
        (("lo", "hi"), ("lo", "mid", "hi"), ("on", "off")),
        ((CH(), S(1, 0)), (R(0), CH(), S(2, 0)), (R(1), CH())),
        Acceptance.extensional([("lo", "lo", "on"), ("lo", "mid", "off"), ("hi", "hi", "on"),
                                ("hi", "hi", "off")]),
    )


CORPUS = {
    s.name: s
    for s in (
        tpc2_atomic(), tpc2_weak(), tpc2_explore(), tpc3(), chain3(), nocomm(), empty_accept(),
        singleton(), fixed_coordinator(), revote(), ring3(), star4(), mixed_extensional(),
    )
}


def write_corpus(directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, s in CORPUS.items():
        path = directory / f"{name}.json"
        path.write_text(s.to_json(), encoding="utf-8")
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# generators


def random_scenario(rng: random.Random, n: int | None = None, steps: int | None = None,
                    name: str = "random") -> Scenario:
    """A deadlock-free random protocol.

    Scripts are cut from one random global action sequence in which every
    RECEIVE follows a matching SEND.  Blocking receives make control flow
    independent of the schedule, so no interleaving can deadlock.
    """
    n = n or rng.randint(2, 4)
    steps = steps or rng.randint(n, 3 * n)
    domains = tuple(tuple(f"v{k}" for k in range(rng.randint(1, 3))) for _ in range(n))
    script: list[list[Action]] = [[] for _ in range(n)]
    made = [0] * n
    inflight = {(p, q): 0 for p in range(n) for q in range(n) if p != q}
    for p in range(n):
        script[p].append(CH() if rng.random() < 0.5 else C(rng.choice(domains[p])))
        made[p] = 1
    for _ in range(steps):
        p = rng.randrange(n)
        options = ["commit", "send"]
        if any(inflight[(q, p)] for q in range(n) if q != p):
            options.append("receive")
        op = rng.choice(options)
        if op == "commit":
            script[p].append(CH() if rng.random() < 0.5 else C(rng.choice(domains[p])))
            made[p] += 1
        elif op == "send":
            q = rng.choice([q for q in range(n) if q != p])
            script[p].append(S(q, rng.randrange(made[p])))
            inflight[(p, q)] += 1
        else:
            q = rng.choice([q for q in range(n) if q != p and inflight[(q, p)]])
            script[p].append(R(q))
            inflight[(q, p)] -= 1
    accept = [v for v in product(*domains) if rng.random() < 0.5]
    return Scenario(name, domains, tuple(tuple(s) for s in script), Acceptance.extensional(accept))


def random_csp(rng: random.Random, max_n: int = 4, max_domain: int = 4,
               density: float | None = None, wide: bool | None = None) -> ConstraintSystem:
    """Random finite CSP: binary constraints, sometimes a unary or a wider one."""
    n = rng.randint(min(2, max_n), max_n)
    domains = tuple(
        tuple(f"d{i}_{k}" for k in range(rng.randint(1, max_domain))) for i in range(n)
    )
    density = rng.uniform(0.4, 0.9) if density is None else density
    constraints = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.6:
                allowed = {(x, y) for x in domains[i] for y in domains[j] if rng.random() < density}
                constraints.append(Constraint((i, j), frozenset(allowed), f"b{i}{j}"))
    if n >= 1 and rng.random() < 0.2:
        i = rng.randrange(n)
        keep = {(x,) for x in domains[i] if rng.random() < 0.8}
        constraints.append(Constraint((i,), frozenset(keep), f"u{i}"))
    if (wide if wide is not None else rng.random() < 0.3) and n >= 3:
        scope = tuple(sorted(rng.sample(range(n), 3)))
        allowed = {t for t in product(*(domains[i] for i in scope)) if rng.random() < density}
        constraints.append(Constraint(scope, frozenset(allowed), "w"))
    return ConstraintSystem(domains, tuple(constraints))
