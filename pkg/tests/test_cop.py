"""The cumulative offer process and its order independence."""

from __future__ import annotations

import json
from dataclasses import replace

import pytest

import reservematch as rm


def test_nobody_acceptable_means_nobody_proposes(ex1):
    empty = ex1.with_preferences(
        {s: rm.PreferenceOrder(s, ()) for s in ex1.students}
    )
    result = rm.run_cop(empty, rm.default_proposal_order(empty))
    assert result.allocation == frozenset()
    assert result.steps == ()


def test_single_acceptable_contract_is_held_after_one_proposal(ex1, X):
    prefs = {s: rm.PreferenceOrder(s, ()) for s in ex1.students}
    prefs["k"] = rm.PreferenceOrder("k", (X.z3,))
    solo = ex1.with_preferences(prefs)
    result = rm.run_cop(solo, rm.default_proposal_order(solo))
    assert result.allocation == {X.z3}
    assert len(result.steps) == 1


def test_worked_example_run_exhausts_the_low_priority_students(ex1, X):
    result = rm.run_cop(ex1, rm.default_proposal_order(ex1))
    assert result.allocation == {X.x1, X.y2}
    proposed = {step.proposed for step in result.steps}
    # k and l run through their whole lists without ever being held
    assert {X.z2, X.z3, X.w1, X.w3} <= proposed


def test_default_run_matches_explicit_default_order(ex1):
    assert rm.run_cop_default(ex1) == rm.run_cop(ex1, rm.default_proposal_order(ex1)).allocation


def test_transcript_accumulates_one_contract_per_step(ex1):
    result = rm.run_cop(ex1, rm.default_proposal_order(ex1))
    assert len(result.steps) <= len(ex1.contracts)
    previous = frozenset()
    for step in result.steps:
        assert step.proposed not in previous
        assert previous < step.available
        assert len(step.available) == len(previous) + 1
        previous = step.available
        for held in step.held.values():
            students = [c.student for c in held]
            assert len(set(students)) == len(students)


def test_transcript_proposable_sets_drive_the_process(ex1):
    result = rm.run_cop(ex1, rm.default_proposal_order(ex1))
    # each proposal is drawn from the previous step's proposable set, every
    # proposable contract is its owner's best unproposed acceptable option,
    # and the process stops exactly when nothing is proposable
    for before, after in zip(result.steps, result.steps[1:]):
        assert after.proposed in before.proposable
    assert result.steps[-1].proposable == frozenset()
    for step in result.steps:
        held_students = {c.student for held in step.held.values() for c in held}
        for c in step.proposable:
            assert c.student not in held_students
            assert c not in step.available
            pref = ex1.preferences[c.student]
            better = [x for x in pref.ranked if pref.prefers(x, c)]
            assert all(x in step.available for x in better)


def test_contract_listing_order_does_not_matter(ex1, tmp_path):
    doc = json.loads(rm.ex1_path().read_text())
    doc["contracts"] = list(reversed(doc["contracts"]))
    shuffled = tmp_path / "shuffled.instance"
    shuffled.write_text(json.dumps(doc))
    assert rm.run_cop_default(rm.load_instance(shuffled)) == rm.run_cop_default(ex1)


def test_relabelling_students_relabels_the_outcome(ex1):
    relabel = {"i": "pd", "j": "pc", "k": "pb", "l": "pa"}  # reverses the id order

    def rc(c):
        return rm.Contract(relabel[c.student], c.school, c.privilege)

    renamed = rm.ProblemInstance(
        students=tuple(relabel[s] for s in ex1.students),
        profile=rm.TypeProfile(
            ex1.profile.types,
            {relabel[s]: ts for s, ts in ex1.profile.claims.items()},
        ),
        schools=tuple(
            replace(
                cfg,
                priority=rm.PriorityOrder(
                    cfg.school, tuple(relabel[s] for s in cfg.priority.ranked)
                ),
            )
            for cfg in ex1.schools
        ),
        contracts=frozenset(rc(c) for c in ex1.contracts),
        preferences={
            relabel[s]: rm.PreferenceOrder(relabel[s], tuple(rc(c) for c in p.ranked))
            for s, p in ex1.preferences.items()
        },
    )
    expected = frozenset(rc(c) for c in rm.run_cop_default(ex1))
    assert rm.run_cop_default(renamed) == expected


def test_order_independence_is_trivial_with_one_student(X):
    inst = rm.ProblemInstance(
        students=("k",),
        profile=rm.TypeProfile(("t2", "t3"), {"k": frozenset({"t2", "t3"})}),
        schools=(
            rm.SchoolConfig(
                "s", 1, rm.PriorityOrder("s", ("k",)), ("t2", "t3"), (1, 0),
                rm.ForwardSumScheme(((), (0,))),
            ),
        ),
        contracts=frozenset({X.z2, X.z3}),
        preferences={"k": rm.PreferenceOrder("k", (X.z2, X.z3))},
    )
    assert rm.check_order_independence(inst, trials=5, seed=1).ok


def test_worked_example_outcome_is_order_independent(ex1):
    result = rm.check_order_independence(ex1, trials=50, seed=7)
    assert result.ok
    assert result.baseline == rm.run_cop_default(ex1)


def test_validation_guards_the_process_against_broken_schemes(ex1, ex1_config):
    broken = ex1.with_school(
        replace(ex1_config, scheme=rm.TableScheme({2: {(1, 1): 0, (1, 0): 2}}))
    )
    with pytest.raises(rm.ValidationError):
        rm.run_cop_default(broken)
    with pytest.raises(rm.ValidationError):
        rm.check_order_independence(broken, trials=5, seed=1)


def test_proposal_order_must_cover_all_contracts(ex1):
    with pytest.raises(rm.InvalidInputError):
        rm.run_cop(ex1, tuple(sorted(ex1.contracts))[:-1])


def test_outcomes_are_feasible_allocations_on_random_instances(small_instances):
    from reservematch.cop import allocation_is_feasible

    for instance in small_instances[:60]:
        allocation = rm.run_cop_default(instance)
        assert allocation_is_feasible(instance, allocation) == []
