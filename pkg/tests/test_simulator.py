from __future__ import annotations

import json
import random
from itertools import product

import pytest

from msgcsp.core import validate_partial_order, derive_happens_before
from msgcsp.corpus import CORPUS, random_scenario, tpc2_atomic, tpc2_weak
from msgcsp.errors import DeadlockError, DomainError, IncompleteChoicesError, ScenarioError, SizeError
from msgcsp.simulator import (
    Acceptance,
    Action,
    Scenario,
    choices_from_values,
    enumerate_outcomes,
    parse_vote,
    run_scenario,
    scenario_from_dict,
    scenario_from_json,
)

C, CH, S, R = Action.commit, Action.choose, Action.send, Action.receive
VOTES = ("c(v1)", "c(v2)", "a")


def brute_force_accepted(domains, predicate):
    return {v for v in product(*domains) if predicate(v)}


def weak_pair(x, y):
    return not (x.startswith("c(") and y.startswith("c(") and x != y)


def test_no_messages_means_no_observations():
    s = CORPUS["nocomm"]
    t = run_scenario(s, 0, choices_from_values(s, ["x", "z"]))
    assert t.observations == ()
    assert t.final_valuation == ("x", "z")


def test_tpc2_both_sides_observe_each_other():
    s = tpc2_atomic()
    t = run_scenario(s, 0, choices_from_values(s, ["c(v1)", "c(v1)"]))
    obs = t.observations
    assert len(obs) == 2
    assert {(o.observer, o.source) for o in obs} == {(0, 1), (1, 0)}
    assert t.final_valuation == ("c(v1)", "c(v1)")


def test_seeds_change_schedule_not_commitments():
    s = tpc2_atomic()
    choices = choices_from_values(s, ["c(v2)", "a"])
    runs = {seed: run_scenario(s, seed, choices) for seed in range(8)}
    commitments = {r.commitments for r in runs.values()}
    assert len(commitments) == 1
    assert len({r.schedule for r in runs.values()}) > 1
    for seed, trace in runs.items():
        assert run_scenario(s, seed, choices).to_json() == trace.to_json()


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_determinism_and_evidence_soundness(name):
    s = CORPUS[name]
    rng = random.Random(name)
    choices = {cp: rng.choice(s.domains[cp[0]]) for cp in s.choice_points}
    finals = set()
    for seed in range(20):
        t = run_scenario(s, seed, choices)
        assert run_scenario(s, seed, choices) == t
        table = t.evidence_table
        for o in t.observations:
            matches = [c for cs in t.commitments for c in cs if c.evidence_id == o.evidence_id]
            assert len(matches) == 1 and table[o.evidence_id] == matches[0]
            assert matches[0].process == o.source
        finals.add(t.final_valuation)
    # no CHOOSE depends on a RECEIVE in this model, so the outcome is seed independent
    assert len(finals) == 1


def test_deadlock_names_blocked_processes():
    s = Scenario("stuck", (("x",), ("y",)),
                 ((R(1), C("x"), S(1, 0)), (R(0), C("y"), S(0, 0))),
                 Acceptance.extensional([]))
    with pytest.raises(DeadlockError) as err:
        run_scenario(s, 0)
    assert err.value.blocked == [0, 1]


def test_missing_choice_is_reported():
    s = tpc2_atomic()
    with pytest.raises(IncompleteChoicesError) as err:
        run_scenario(s, 0, {(0, 0): "a"})
    assert err.value.missing == [(1, 0)]
    with pytest.raises(DomainError):
        run_scenario(s, 0, {(0, 0): "a", (1, 0): "zzz"})


def test_enumerate_singleton_domains():
    s = Scenario("xy", (("x",), ("y",)), ((C("x"),), (C("y"),)), Acceptance.extensional([("x", "y")]))
    assert enumerate_outcomes(s) == [("x", "y")]


def test_enumerate_tpc2_atomic_against_brute_force():
    expected = brute_force_accepted((VOTES, VOTES), lambda v: v[0] == v[1])
    assert expected == {("c(v1)", "c(v1)"), ("c(v2)", "c(v2)"), ("a", "a")}
    assert set(enumerate_outcomes(tpc2_atomic())) == expected


def test_enumerate_tpc2_weak_against_brute_force():
    expected = brute_force_accepted((VOTES, VOTES), lambda v: weak_pair(*v))
    assert len(expected) == 9 - 2
    assert set(enumerate_outcomes(tpc2_weak())) == expected


def test_enumerate_is_seed_free_and_within_product():
    for s in CORPUS.values():
        out = enumerate_outcomes(s)
        assert set(out) <= set(product(*s.domains))
        assert out == enumerate_outcomes(s)


def test_explored_schedules_agree_with_single_schedule():
    s = CORPUS["tpc2-explore"]
    assert enumerate_outcomes(s) == enumerate_outcomes(tpc2_atomic())


def test_schedule_bound():
    with pytest.raises(SizeError):
        enumerate_outcomes(CORPUS["ring3"], max_schedules=3)
    with pytest.raises(SizeError):
        enumerate_outcomes(CORPUS["tpc3"], max_branches=100)


@pytest.mark.parametrize("seed", range(25))
def test_random_scenarios_never_deadlock(seed):
    rng = random.Random(seed)
    s = random_scenario(rng)
    choices = {cp: rng.choice(s.domains[cp[0]]) for cp in s.choice_points}
    for run_seed in range(5):
        t = run_scenario(s, run_seed, choices)
        assert validate_partial_order(derive_happens_before(t)).ok


def test_vote_grammar():
    assert parse_vote("a") == ("abort", None)
    assert parse_vote("c(v1)") == ("commit", "v1")
    with pytest.raises(ValueError):
        parse_vote("commit")


# -- scenario files ----------------------------------------------------------

@pytest.mark.parametrize("name", sorted(CORPUS))
def test_scenario_json_roundtrip(name):
    s = CORPUS[name]
    assert scenario_from_json(s.to_json()) == s


def test_schema_errors_carry_field_paths():
    doc = json.loads(tpc2_atomic().to_json())
    doc["script"][1][1] = {"op": "send", "to": 0}
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert err.value.path == "script[1][1]"


def test_invalid_json_carries_line():
    with pytest.raises(ScenarioError) as err:
        scenario_from_json('{\n  "n": 2,\n  oops\n}')
    assert err.value.line == 3


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d["script"][0].insert(0, {"op": "send", "to": 1, "index": 0}), "script[0][0]"),
    (lambda d: d.update(acceptance={"type": "rule", "rule": "atomic-commit"},
                        domains=[["x", "y"], ["x", "y"]]), "domains[0]"),
    (lambda d: d.update(choice_points=[[0, 0]]), "choice_points"),
    (lambda d: d.update(n=3), "domains"),
])
def test_semantic_scenario_errors(mutate, path):
    doc = json.loads(CORPUS["empty-accept"].to_json())
    mutate(doc)
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc)
    assert err.value.path == path
