"""Choice functions: sub-choices, transfer schemes, traces, slot rules."""

from __future__ import annotations

import random

import pytest

import reservematch as rm
from reservematch._engine import Compiled


def rows(X):
    return [
        ({X.x1, X.y2, X.z2, X.z3, X.w1, X.w3}, {X.x1, X.y2}),
        ({X.y2, X.z2, X.z3}, {X.y2, X.z3}),
        ({X.x1, X.z2, X.z3}, {X.x1, X.z2}),
        ({X.y2, X.w1, X.w3}, {X.y2, X.w1}),
        ({X.x1, X.w1, X.w3}, {X.x1, X.w3}),
        ({X.z2, X.z3}, {X.z2}),
        ({X.w1, X.w3}, {X.w1}),
    ]


# ----------------------------------------------------------------------
# sub-choice


def test_sub_choice_takes_the_top_ranked_claimant(ex1, ex1_config, X):
    ranking = rm.derive_type_priority(ex1_config.priority, "t1", ex1.profile)
    assert rm.sub_choice({X.x1, X.w1}, 1, "t1", ranking) == {X.x1}


def test_sub_choice_with_zero_capacity_is_empty(ex1, ex1_config, X):
    ranking = rm.derive_type_priority(ex1_config.priority, "t1", ex1.profile)
    assert rm.sub_choice({X.x1, X.w1}, 0, "t1", ranking) == frozenset()


def test_sub_choice_takes_everything_under_slack_capacity(ex1, ex1_config, X):
    ranking = rm.derive_type_priority(ex1_config.priority, "t3", ex1.profile)
    assert rm.sub_choice({X.z3, X.w3}, 2, "t3", ranking) == {X.z3, X.w3}


def test_sub_choice_filters_other_types_and_unranked_students(ex1, ex1_config, X):
    ranking = rm.derive_type_priority(
        rm.PriorityOrder("s", ("i", "j", "l")), "t3", ex1.profile
    )
    assert rm.sub_choice({X.x1, X.z3, X.w3}, 5, "t3", ranking) == {X.w3}


# ----------------------------------------------------------------------
# monotonicity


def test_worked_example_scheme_is_monotone(ex1_config):
    assert rm.check_monotonic(ex1_config.scheme, ex1_config.targets, bound=2).ok


def test_constant_scheme_is_monotone():
    scheme = rm.ForwardSumScheme(((), (), ()))
    assert rm.check_monotonic(scheme, (1, 1, 1), bound=3).ok


def test_capacity_drop_is_caught_with_its_witness():
    # third group's capacity falls from 1 to 0 when the first group empties
    scheme = rm.TableScheme({2: {(1, 0): 0}})
    report = rm.check_monotonic(scheme, (1, 1, 1), bound=1)
    assert not report.ok
    assert report.condition == 1
    assert (report.low, report.high) == ((0, 0), (1, 0))
    assert report.group == 2


def test_overclaiming_transfers_are_caught():
    # one vacancy upstream cannot add two seats downstream
    scheme = rm.TableScheme({1: {(1,): 3}})
    report = rm.check_monotonic(scheme, (1, 1), bound=1)
    assert not report.ok
    assert report.condition == 2


def test_monotonicity_refuses_oversized_domains():
    scheme = rm.ForwardSumScheme(tuple(() for _ in range(12)))
    with pytest.raises(rm.SearchCapExceededError):
        rm.check_monotonic(scheme, (1,) * 12, bound=4, pair_cap=10_000)


def test_chained_single_donor_schemes_are_certified():
    scheme = rm.ForwardSumScheme(((), (0,), (1,), (2,)))
    assert scheme.certified_monotone()
    assert rm.check_monotonic(scheme, (2, 0, 0, 0), bound=2).ok


def test_double_donation_is_not_certified_and_checked_exhaustively():
    scheme = rm.ForwardSumScheme(((), (0,), (0,)))
    assert not scheme.certified_monotone()
    # the second grant only forwards what the first recipient left unused
    assert scheme.capacity(2, (3, 5), (0, 0, 0)) == 3
    assert scheme.capacity(2, (3, 1), (0, 0, 0)) == 1


# ----------------------------------------------------------------------
# the overall dynamic reserves choice


def test_worked_example_choice_table(ex1_config, X):
    for offers, want in rows(X):
        got, _ = rm.dynamic_reserves_choice(offers, ex1_config)
        assert got == frozenset(want), offers


def test_empty_offer_trace_shows_the_full_transfer(ex1_config):
    chosen, trace = rm.dynamic_reserves_choice(set(), ex1_config)
    assert chosen == frozenset()
    assert trace.residuals == (1, 1, 2)
    assert trace.capacities == (1, 1, 2)


def test_choice_never_takes_two_contracts_of_one_student(ex1, ex1_config):
    pool = sorted(ex1.contracts)
    for mask in range(1 << len(pool)):
        offers = {pool[i] for i in range(len(pool)) if (mask >> i) & 1}
        chosen, trace = rm.dynamic_reserves_choice(offers, ex1_config)
        students = [c.student for c in chosen]
        assert len(set(students)) == len(students)
        assert chosen <= offers
        for record in trace.groups:
            assert all(c.privilege == record.privilege for c in record.chosen)
            assert record.residual == record.capacity - len(record.chosen) >= 0


# ----------------------------------------------------------------------
# completion


def test_completion_keeps_a_chosen_students_other_contracts(ex1_config, X):
    chosen, trace = rm.completion_choice({X.z2, X.z3}, ex1_config)
    assert chosen == {X.z2, X.z3}
    assert trace.residuals == (1, 0, 0)


def test_completion_agrees_when_no_student_offers_twice(ex1_config, X):
    assert rm.completion_choice({X.x1, X.y2}, ex1_config)[0] == {X.x1, X.y2}


def test_completion_agrees_whenever_it_picks_one_contract_per_student(ex1, ex1_config):
    pool = sorted(ex1.contracts)
    for mask in range(1 << len(pool)):
        offers = {pool[i] for i in range(len(pool)) if (mask >> i) & 1}
        completed, _ = rm.completion_choice(offers, ex1_config)
        students = [c.student for c in completed]
        if len(set(students)) == len(students):
            assert completed == rm.dynamic_reserves_choice(offers, ex1_config)[0]


# ----------------------------------------------------------------------
# slot-specific rules and their conversion


def _slot_school(*slots):
    contracts = tuple(sorted({c for slot in slots for c in slot}))
    return rm.SlotSpecificSchool("s", contracts, tuple(tuple(s) for s in slots))


def test_single_slot_takes_its_best_available():
    x = rm.Contract("a", "s", "t1")
    y = rm.Contract("b", "s", "t1")
    school = _slot_school([x, y])
    assert rm.slot_specific_choice({y}, school) == {y}
    assert rm.slot_specific_choice({x, y}, school) == {x}


def test_two_slots_share_one_student_once():
    x = rm.Contract("a", "s", "t1")
    y = rm.Contract("a", "s", "t2")
    school = _slot_school([x, y], [x, y])
    assert rm.slot_specific_choice({x, y}, school) == {x}


def test_empty_offers_leave_every_slot_null():
    x = rm.Contract("a", "s", "t1")
    school = _slot_school([x], [x])
    assert rm.slot_specific_choice(set(), school) == frozenset()


def test_conversion_of_a_one_contract_slot():
    x = rm.Contract("a", "s", "t1")
    conv = rm.convert_slot_specific(_slot_school([x]))
    assert conv.config.targets == (1,)
    assert conv.choice(set()) == frozenset()
    assert conv.choice({x}) == {x}


def test_conversion_cascades_the_seat_down_the_slot_ranking():
    x = rm.Contract("a", "s", "t1")
    y = rm.Contract("b", "s", "t1")
    school = _slot_school([x, y])
    conv = rm.convert_slot_specific(school)
    assert conv.config.targets == (1, 0)
    assert conv.config.scheme.donors == ((), (0,))
    assert conv.choice({y}) == {y}
    assert conv.choice({x, y}) == {x}


def test_conversion_matches_slot_choice_on_every_offer_set():
    for seed in range(12):
        school = rm.generate_slot_specific_school(3100 + seed)
        conv = rm.convert_slot_specific(school)
        assert conv.config.scheme.certified_monotone()
        assert sum(conv.config.targets) == conv.config.capacity
        pool = sorted(school.contracts)
        for mask in range(1 << len(pool)):
            offers = frozenset(pool[i] for i in range(len(pool)) if (mask >> i) & 1)
            assert conv.choice(offers) == rm.slot_specific_choice(offers, school), (
                seed,
                offers,
            )


# ----------------------------------------------------------------------
# the bitmask engine must agree with the reference implementation


@pytest.mark.parametrize("seed", range(30))
def test_engine_choices_match_reference(seed):
    cfg, contracts = rm.generate_school_pool(seed)
    compiled = Compiled(contracts, sorted({c.student for c in contracts}), [cfg], {})
    school = compiled.schools[0]
    rng = random.Random(seed)
    subsets = [
        frozenset(c for c in contracts if rng.random() < 0.5) for _ in range(40)
    ]
    subsets.append(frozenset(contracts))
    subsets.append(frozenset())
    for offers in subsets:
        want, trace = rm.dynamic_reserves_choice(offers, cfg)
        got, residuals, caps = school.choose(compiled.to_mask(offers))
        assert compiled.to_set(got) == want
        assert residuals == trace.residuals
        assert caps == trace.capacities
        want_c, trace_c = rm.completion_choice(offers, cfg)
        got_c, res_c, _ = school.choose(compiled.to_mask(offers), completion=True)
        assert compiled.to_set(got_c) == want_c
        assert res_c == trace_c.residuals


def test_engine_slot_school_matches_reference():
    for seed in range(10):
        school = rm.generate_slot_specific_school(7000 + seed)
        students = sorted({c.student for c in school.contracts})
        compiled = Compiled(school.contracts, students, [school], {})
        engine = compiled.schools[0]
        pool = sorted(school.contracts)
        for mask in range(1 << len(pool)):
            offers = frozenset(pool[i] for i in range(len(pool)) if (mask >> i) & 1)
            got = compiled.to_set(engine.choose(compiled.to_mask(offers))[0])
            assert got == rm.slot_specific_choice(offers, school)
