from __future__ import annotations

import random
from itertools import product

import pytest

from msgcsp.core import Trace
from msgcsp.corpus import CORPUS, tpc2_atomic, tpc2_weak
from msgcsp.errors import ProvenanceError
from msgcsp.simulator import Acceptance, Action, Scenario, choices_from_values, enumerate_outcomes, run_scenario
from msgcsp.solver import solve_bruteforce
from msgcsp.trace2csp import compile_trace, narrow_domains, script_domains

VOTES = ("c(v1)", "c(v2)", "a")
C, CH, S, R = Action.commit, Action.choose, Action.send, Action.receive


def one_way_tpc2() -> Scenario:
    """Only P0's evidence travels."""
    return Scenario("one-way", (VOTES, VOTES), ((CH(), S(1, 0)), (R(0), CH())),
                    Acceptance.from_rule("atomic-commit"))


def test_observed_final_commitment_is_pinned():
    s = one_way_tpc2()
    t = run_scenario(s, 0, choices_from_values(s, ["c(v1)", "a"]))
    assert narrow_domains(s, t) == (("c(v1)",), VOTES)


def test_unobserved_choice_keeps_full_domain():
    s = CORPUS["nocomm"]
    t = run_scenario(s, 0, choices_from_values(s, ["y", "z"]))
    assert narrow_domains(s, t) == s.domains


def test_tpc2_only_p0_evidence_delivered():
    # drop every observation except the one made by P1 of P0's commitment
    s = tpc2_atomic()
    full = run_scenario(s, 0, choices_from_values(s, ["c(v2)", "a"]))
    kept = tuple(e for e in full.events if not (e.kind.value == "OBSERVE" and e.process == 0))
    partial = Trace(full.scenario, full.n, full.seed, kept, (), full.choices)
    assert [(o.observer, o.source) for o in partial.observations] == [(1, 0)]
    assert narrow_domains(s, partial) == (("c(v2)",), VOTES)
    assert narrow_domains(s, full) == (("c(v2)",), ("a",))


def test_earlier_commitment_does_not_pin_final_value():
    s = CORPUS["revote"]
    t = run_scenario(s, 0, choices_from_values(s, ["a", "c(v1)", "a", "c(v1)"]))
    # every commitment, early and final, is observed by the peer
    assert narrow_domains(s, t) == (("c(v1)",), ("c(v1)",))
    early_only = Trace(t.scenario, t.n, t.seed,
                       tuple(e for e in t.events
                             if e.kind.value == "COMMIT" or t.evidence_table[e.evidence_id].index == 0))
    assert narrow_domains(s, early_only) == (VOTES, VOTES)


def test_fixed_script_value_narrows_without_trace():
    s = CORPUS["fixed-coordinator"]
    assert script_domains(s) == (("c(v1)",), VOTES)


def test_provenance_mismatch():
    t = run_scenario(tpc2_atomic(), 0, {(0, 0): "a", (1, 0): "a"})
    with pytest.raises(ProvenanceError):
        narrow_domains(CORPUS["tpc3"], t)
    with pytest.raises(ProvenanceError):
        narrow_domains(tpc2_weak(), t)


def test_conflicting_evidence_empties_domain():
    # a trace claims P0 finally committed c(v2) although its script fixes c(v1)
    s = CORPUS["fixed-coordinator"]
    other = Scenario("fixed-coordinator", (VOTES, VOTES), ((CH(), S(1, 0)), (R(0), CH())),
                     Acceptance.from_rule("weak-commit"))
    t = run_scenario(other, 0, choices_from_values(other, ["c(v2)", "a"]))
    csp = compile_trace(s, t)
    assert csp.domains[0] == ()
    assert csp.unsatisfiable_by_evidence and csp.emptied == {0}
    assert solve_bruteforce(csp) == []


def test_vacuous_acceptance_allows_full_product():
    doms = (("x", "y"), ("p", "q", "r"))
    s = Scenario("all", doms, ((CH(),), (CH(),)), Acceptance.extensional(product(*doms)))
    csp = compile_trace(s)
    assert len(csp.constraints) == 1
    assert csp.constraints[0].scope == (0, 1)
    assert csp.constraints[0].allowed == set(product(*doms))


def test_tpc2_atomic_global_constraint():
    expected = {v for v in product(VOTES, VOTES) if v[0] == v[1]}
    csp = compile_trace(tpc2_atomic())
    assert csp.constraints[0].allowed == expected == {("c(v1)", "c(v1)"), ("c(v2)", "c(v2)"), ("a", "a")}


def test_tpc2_weak_factored_matches_global():
    s = tpc2_weak()
    factored = compile_trace(s, factor=True)
    assert all(len(c.scope) == 2 for c in factored.constraints)
    brute = {v for v in product(VOTES, VOTES)
             if not (v[0].startswith("c(") and v[1].startswith("c(") and v[0] != v[1])}
    assert set(solve_bruteforce(factored)) == set(solve_bruteforce(compile_trace(s))) == brute
    assert len(brute) == 7


@pytest.mark.parametrize("name", ["tpc3", "chain3", "star4", "revote", "ring3", "fixed-coordinator"])
def test_factored_and_global_agree(name):
    s = CORPUS[name]
    assert set(solve_bruteforce(compile_trace(s, factor=True))) == set(solve_bruteforce(compile_trace(s)))


def test_extensional_predicates_are_not_factored():
    with pytest.raises(ValueError):
        compile_trace(CORPUS["nocomm"], factor=True)


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_outcomes_equal_compiled_solutions(name):
    s = CORPUS[name]
    assert set(enumerate_outcomes(s)) == set(solve_bruteforce(compile_trace(s)))


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_trace_refinement(name):
    s = CORPUS[name]
    unconstrained = set(solve_bruteforce(compile_trace(s)))
    rng = random.Random(name)
    for seed in range(10):
        choices = {cp: rng.choice(s.domains[cp[0]]) for cp in s.choice_points}
        t = run_scenario(s, seed, choices)
        refined = set(solve_bruteforce(compile_trace(s, t)))
        assert refined <= unconstrained
        if s.acceptance.accepts(t.final_valuation):
            assert t.final_valuation in refined
