from __future__ import annotations

import random
from itertools import product

import pytest

from msgcsp.core import Constraint, ConstraintSystem
from msgcsp.corpus import CORPUS, random_csp, tpc2_atomic
from msgcsp.errors import ProtocolIntegrityError, UnknownConstraintError
from msgcsp.realizer import (
    Agent,
    Certificate,
    Verdict,
    realize,
    terminal_outcome_set,
    transcript_to_json,
    verify_certificate,
)
from msgcsp.solver import solve_bruteforce
from msgcsp.trace2csp import compile_trace

VOTES = ("c(v1)", "c(v2)", "a")


def cyclic_first_satisfying(csp, start):
    """Oracle: walk the lexicographic product list cyclically from ``start``."""
    order = list(product(*csp.domains))
    k = order.index(tuple(start))
    for step in range(len(order)):
        v = order[(k + step) % len(order)]
        if all(c.project(v) in c.allowed for c in csp.constraints):
            return v, step + 1
    return None, len(order)


def test_all_allowed_accepts_start_immediately():
    doms = (("x", "y"), ("p", "q"))
    csp = ConstraintSystem(doms, (Constraint((0, 1), frozenset(product(*doms))),))
    run = realize(csp, ("y", "p"), seed=4)
    assert run.outcome == ("y", "p") and run.rounds == 1
    assert run.outcome_line() == 'ACCEPT ["y", "p"]'


def test_unsatisfiable_rejects_after_full_cycle():
    doms = (("x", "y"), ("p", "q", "r"))
    csp = ConstraintSystem(doms, (Constraint((0, 1), frozenset()),))
    run = realize(csp, ("y", "q"), seed=1)
    assert run.outcome is None and run.outcome_line() == "REJECT"
    assert run.rounds == 6
    assert {c.round for c in run.transcript} == set(range(6))


def test_tpc2_atomic_from_mixed_start():
    csp = compile_trace(tpc2_atomic())
    expected, rounds = cyclic_first_satisfying(csp, ("c(v1)", "c(v2)"))
    assert expected == ("c(v2)", "c(v2)")
    run = realize(csp, ("c(v1)", "c(v2)"))
    assert run.outcome == expected and run.rounds == rounds


def test_walk_wraps_around():
    doms = (("x", "y"), ("p", "q"))
    csp = ConstraintSystem(doms, (Constraint((0, 1), frozenset({("x", "p")})),))
    run = realize(csp, ("y", "q"))
    assert run.outcome == ("x", "p") and run.rounds == 2


@pytest.mark.parametrize("seed", range(15))
def test_outcome_matches_cyclic_oracle(seed):
    rng = random.Random(seed)
    csp = random_csp(rng)
    for start in product(*csp.domains):
        expected, rounds = cyclic_first_satisfying(csp, start)
        run = realize(csp, start, seed)
        assert run.outcome == expected
        assert run.rounds == rounds <= csp.product_size()


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_terminal_outcomes_equal_solutions(name):
    csp = compile_trace(CORPUS[name])
    assert terminal_outcome_set(csp) == solve_bruteforce(csp)


def test_singleton_domains():
    csp = compile_trace(CORPUS["singleton"])
    assert terminal_outcome_set(csp) == [("x", "y")]


def test_unsatisfiable_outcome_set_is_empty():
    csp = compile_trace(CORPUS["empty-accept"])
    assert terminal_outcome_set(csp) == []


def test_schedule_independence():
    csp = compile_trace(CORPUS["tpc3"])
    for start in [("a", "c(v1)", "c(v2)"), ("c(v2)", "a", "a"), ("c(v1)", "c(v1)", "c(v1)")]:
        outcomes = {realize(csp, start, seed).outcome for seed in range(20)}
        assert len(outcomes) == 1
    transcripts = {tuple(realize(csp, ("a", "c(v1)", "c(v2)"), seed).transcript) for seed in range(20)}
    assert len(transcripts) > 1


@pytest.mark.parametrize("name", ["tpc2-weak", "tpc3", "mixed-extensional"])
def test_every_transcript_certificate_verifies(name):
    csp = compile_trace(CORPUS[name], factor=name != "mixed-extensional")
    for seed, start in enumerate(product(*csp.domains)):
        for cert in realize(csp, start, seed).transcript:
            assert verify_certificate(csp, cert)


def test_verify_certificate_examples():
    csp = compile_trace(tpc2_atomic())
    good = Certificate(0, ("a", "a"), Verdict.SATISFIED, (0,), 0)
    assert verify_certificate(csp, good)
    forged = Certificate(0, ("a", "a"), Verdict.COUNTEREXAMPLE, (0,), 0, ("a", "a"))
    assert not verify_certificate(csp, forged)
    honest = Certificate(0, ("a", "c(v1)"), Verdict.COUNTEREXAMPLE, (0,), 3, ("a", "c(v1)"))
    assert verify_certificate(csp, honest)
    mismatched = Certificate(0, ("a", "c(v1)"), Verdict.COUNTEREXAMPLE, (0,), 3, ("c(v2)", "c(v1)"))
    assert not verify_certificate(csp, mismatched)
    false_claim = Certificate(0, ("a", "c(v1)"), Verdict.SATISFIED, (0,), 0)
    assert not verify_certificate(csp, false_claim)
    with pytest.raises(UnknownConstraintError):
        verify_certificate(csp, Certificate(0, ("a", "a"), Verdict.SATISFIED, (7,), 0))


def test_agent_rejects_forged_certificate():
    csp = compile_trace(tpc2_atomic())
    agent = Agent(1, csp, "a")
    forged = Certificate(0, ("a", "a"), Verdict.COUNTEREXAMPLE, (0,), 0, ("a", "a"))
    with pytest.raises(ProtocolIntegrityError):
        agent.receive(forged)


def test_constraint_ownership_is_lowest_participant():
    csp = compile_trace(CORPUS["chain3"], factor=True)
    owners = [Agent(i, csp, csp.domains[i][0]).owned for i in range(csp.n)]
    assert owners == [[0, 1], [2], []]


def test_transcript_export_is_stable():
    csp = compile_trace(CORPUS["tpc2-weak"])
    a = realize(csp, ("c(v1)", "c(v2)"), seed=9)
    b = realize(csp, ("c(v1)", "c(v2)"), seed=9)
    assert a.to_json() == b.to_json()
    assert transcript_to_json(a.transcript) == transcript_to_json(b.transcript)
    assert Certificate.from_dict(a.transcript[0].to_dict()) == a.transcript[0]
