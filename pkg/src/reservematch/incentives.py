"""Incentive audits and comparative statics for the cumulative offer mechanism.

Three families of checks live here. Misreport search enumerates a student's
(or small coalition's) entire strategy space and looks for a report that beats
truth-telling. Priority-improvement checks verify that cleanly rising in a
school's ranking never hurts the student who rose. Flexibility comparison
pits two capacity transfer schemes against each other: the more flexible one
should weakly Pareto-improve the outcome, and the reseating chain rebuilds
the improved outcome from the old one, moving students only upward.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence

from ._engine import Compiled
from .choice import SchoolConfig, TableScheme, check_monotonic, dynamic_reserves_choice
from .cop import run_cop_default
from .errors import InvalidInputError, SearchCapExceededError, ValidationError
from .instance import ProblemInstance, validate_instance
from .model import Contract, PreferenceOrder, PriorityOrder

__all__ = [
    "Misreport",
    "preference_space",
    "preference_space_size",
    "find_profitable_misreport",
    "find_group_misreport",
    "is_unambiguous_improvement",
    "ImprovementCheck",
    "check_respects_improvements",
    "is_more_flexible",
    "improvement_chains",
    "FlexibilityComparison",
    "check_flexibility_pareto",
    "allocation_waste",
]


# ----------------------------------------------------------------------
# misreport search


@dataclass(frozen=True)
class Misreport:
    """A profitable deviation: who lied, what they said, what it bought them."""

    students: tuple[str, ...]
    reported: tuple[PreferenceOrder, ...]
    truthful: tuple[Optional[Contract], ...]
    deviant: tuple[Optional[Contract], ...]


def preference_space(student: str, contracts: Sequence[Contract]):
    """Every strict preference a student could report: each ordered subset of
    their contracts read as the acceptable prefix, including the empty report."""
    pool = sorted(contracts)
    for k in range(len(pool) + 1):
        for combo in itertools.permutations(pool, k):
            yield PreferenceOrder(student, combo)


def preference_space_size(n: int) -> int:
    total, running = 1, 1
    for k in range(1, n + 1):
        running *= n - k + 1
        total += running
    return total


def _compiled_valid(instance: ProblemInstance) -> Compiled:
    violations = validate_instance(instance)
    if violations:
        raise ValidationError(violations)
    return Compiled.from_instance(instance)


def _held_contract(compiled: Compiled, mask: int, student_index: int) -> Optional[Contract]:
    own = mask & compiled.student_mask[student_index]
    if not own:
        return None
    return compiled.contracts[own.bit_length() - 1]


def _outcome_under(compiled: Compiled) -> int:
    return compiled.cop(compiled.default_order_rank())


def find_profitable_misreport(
    student: str, instance: ProblemInstance, cap: int = 200_000
) -> Optional[Misreport]:
    """Search the student's full strategy space for a report whose mechanism
    outcome they truly prefer to the truthful outcome.

    Returns the first profitable misreport in enumeration order, or ``None``
    after exhausting the space. Refuses if the space exceeds ``cap``.
    """
    compiled = _compiled_valid(instance)
    si = compiled.student_index[student]
    truth = instance.preferences[student]
    truth_held = _held_contract(compiled, _outcome_under(compiled), si)
    truth_rank = truth.rank(truth_held)
    if truth_rank == 0:
        return None  # already holds their single most preferred contract

    own = sorted(instance.contracts_of(student))
    space = preference_space_size(len(own))
    if space > cap:
        raise SearchCapExceededError(space, cap, f"misreports for student {student}")

    for reported in preference_space(student, own):
        if reported.ranked == truth.ranked:
            continue
        trial = compiled.with_preferences({**instance.preferences, student: reported})
        held = _held_contract(trial, _outcome_under(trial), si)
        if truth.rank(held) < truth_rank:
            return Misreport((student,), (reported,), (truth_held,), (held,))
    return None


def find_group_misreport(
    coalition: Iterable[str],
    instance: ProblemInstance,
    cap: int = 200_000,
    max_coalition: int = 2,
) -> Optional[Misreport]:
    """Search for a joint misreport that strictly benefits every coalition
    member. The joint space is the product of the members' strategy spaces;
    a member who already holds their top contract makes the coalition
    hopeless, so those are dismissed without enumeration.
    """
    members = tuple(sorted(set(coalition)))
    if not members:
        return None
    if len(members) > max_coalition:
        raise SearchCapExceededError(len(members), max_coalition, "coalition size")

    compiled = _compiled_valid(instance)
    indices = [compiled.student_index[s] for s in members]
    truths = [instance.preferences[s] for s in members]
    truth_mask = _outcome_under(compiled)
    truth_held = [_held_contract(compiled, truth_mask, si) for si in indices]
    truth_ranks = [p.rank(c) for p, c in zip(truths, truth_held)]
    if any(r == 0 for r in truth_ranks):
        return None

    pools = [sorted(instance.contracts_of(s)) for s in members]
    space = 1
    for pool in pools:
        space *= preference_space_size(len(pool))
    if space > cap:
        raise SearchCapExceededError(space, cap, f"joint misreports for {members}")

    spaces = [list(preference_space(s, pool)) for s, pool in zip(members, pools)]
    for joint in itertools.product(*spaces):
        if all(rep.ranked == t.ranked for rep, t in zip(joint, truths)):
            continue
        prefs = dict(instance.preferences)
        for s, rep in zip(members, joint):
            prefs[s] = rep
        trial = compiled.with_preferences(prefs)
        mask = _outcome_under(trial)
        held = [_held_contract(trial, mask, si) for si in indices]
        if all(p.rank(h) < r for p, h, r in zip(truths, held, truth_ranks)):
            return Misreport(members, tuple(joint), tuple(truth_held), tuple(held))
    return None


# ----------------------------------------------------------------------
# respect for priority improvements


def is_unambiguous_improvement(
    base: Mapping[str, PriorityOrder],
    improved: Mapping[str, PriorityOrder],
    student: str,
) -> bool:
    """True when ``improved`` only ever moves ``student`` up.

    At every school the other students keep their exact relative order and
    acceptability, every student the beneficiary used to beat is still
    beaten, and the beneficiary never loses acceptability.
    """
    if set(base) != set(improved):
        return False
    for school, old in base.items():
        new = improved[school]
        others_old = tuple(s for s in old.ranked if s != student)
        others_new = tuple(s for s in new.ranked if s != student)
        if others_old != others_new:
            return False
        if old.accepts(student):
            if not new.accepts(student):
                return False
            beaten_old = set(old.ranked[old.rank(student) + 1 :])
            beaten_new = set(new.ranked[new.rank(student) + 1 :])
            if not beaten_old <= beaten_new:
                return False
    return True


@dataclass(frozen=True)
class ImprovementCheck:
    ok: bool
    base_assignment: Optional[Contract]
    improved_assignment: Optional[Contract]

    def __bool__(self) -> bool:
        return self.ok


def school_priorities(instance: ProblemInstance) -> dict[str, PriorityOrder]:
    return {cfg.school: cfg.priority for cfg in instance.schools}


def check_respects_improvements(
    instance: ProblemInstance,
    improved: Mapping[str, PriorityOrder],
    student: str,
) -> ImprovementCheck:
    """Run the mechanism before and after a priority improvement and verify
    the beneficiary is weakly better off under their true preferences."""
    base = school_priorities(instance)
    if not is_unambiguous_improvement(base, improved, student):
        raise InvalidInputError(
            f"priorities are not an unambiguous improvement for {student}"
        )
    lifted = instance
    for cfg in instance.schools:
        lifted = lifted.with_school(replace(cfg, priority=improved[cfg.school]))

    pref = instance.preferences[student]
    before = _assignment_of(run_cop_default(instance), student)
    after = _assignment_of(run_cop_default(lifted), student)
    return ImprovementCheck(pref.rank(after) <= pref.rank(before), before, after)


def _assignment_of(allocation: frozenset, student: str) -> Optional[Contract]:
    for c in allocation:
        if c.student == student:
            return c
    return None


# ----------------------------------------------------------------------
# flexibility comparison and the vacancy-chain algorithm


def _domain(groups: int, bound: int):
    for k in range(1, groups):
        for vec in itertools.product(range(bound + 1), repeat=k):
            yield k, vec


def is_more_flexible(first, second, targets: tuple[int, ...], bound: int) -> bool:
    """True when ``first`` grants every group at least the capacity ``second``
    does at every residual vector in the bounded domain, with at least one
    strict gain. Both schemes are assumed monotone with matching targets."""
    strict = False
    for k, vec in _domain(len(targets), bound):
        a = first.capacity(k, vec, targets)
        b = second.capacity(k, vec, targets)
        if a < b:
            return False
        if a > b:
            strict = True
    return strict


def _single_scheme_change(
    rigid: ProblemInstance, flexible: ProblemInstance
) -> tuple[str, SchoolConfig, SchoolConfig]:
    changed = _changed_schools(rigid, flexible)
    if len(changed) != 1:
        raise InvalidInputError(f"expected exactly one school to change, got {changed}")
    sid = changed[0]
    return sid, rigid.school(sid), flexible.school(sid)


def _changed_schools(rigid: ProblemInstance, flexible: ProblemInstance) -> list[str]:
    if rigid.contracts != flexible.contracts or rigid.students != flexible.students:
        raise InvalidInputError("instances describe different markets")
    if rigid.preferences != flexible.preferences:
        raise InvalidInputError("instances must share one preference profile")
    ids = [cfg.school for cfg in rigid.schools]
    if ids != [cfg.school for cfg in flexible.schools]:
        raise InvalidInputError("instances list different schools")
    changed = []
    for a, b in zip(rigid.schools, flexible.schools):
        if (a.priority, a.precedence, a.targets, a.capacity) != (
            b.priority,
            b.precedence,
            b.targets,
            b.capacity,
        ):
            raise InvalidInputError(f"school {a.school}: only the scheme may differ")
        if a.scheme != b.scheme:
            changed.append(a.school)
    return changed


def _unit_increment_point(
    rigid_cfg: SchoolConfig, flex_cfg: SchoolConfig
) -> Optional[tuple[int, tuple[int, ...]]]:
    """The single residual-domain point where the flexible scheme grants one
    extra seat; ``None`` when the schemes agree on the whole domain."""
    bound = rigid_cfg.capacity
    diffs = []
    for k, vec in _domain(rigid_cfg.group_count, bound):
        a = rigid_cfg.scheme.capacity(k, vec, rigid_cfg.targets)
        b = flex_cfg.scheme.capacity(k, vec, flex_cfg.targets)
        if b != a:
            diffs.append((k, vec, b - a))
    if not diffs:
        return None
    if len(diffs) > 1 or diffs[0][2] != 1:
        raise InvalidInputError(
            "schemes must differ by a single unit increment; found "
            + ", ".join(f"group {k} at {v}: {d:+d}" for k, v, d in diffs)
        )
    return diffs[0][0], diffs[0][1]


def improvement_chains(
    z: Iterable[Contract],
    rigid: ProblemInstance,
    flexible: ProblemInstance,
) -> frozenset:
    """Reseat students after a one-seat capacity expansion.

    ``flexible`` must differ from ``rigid`` by a unit increment of one
    school's transfer scheme at one residual vector, and ``z`` should be the
    mechanism outcome under ``rigid``. The expansion can only pull students
    upward: the newly fundable seat is taken by the best-ranked student who
    prefers it, the seat that student vacates is offered onward, and so on.
    Greedily committing each seat is not sound, though, because a taker may
    pass on a seat once a better one opens further down the chain and a
    withdrawn claim can re-settle a whole school. So the reseating is run as
    a deferred offer process over exactly the chain's move space: every
    student's list is truncated at their seat under ``z`` (their floor, which
    the expansion can never push them below), and the offer process re-runs
    on the flexible profile within that restricted market. No student ends
    worse than ``z``, reseated students are strictly better off, and the
    result equals the mechanism outcome under ``flexible``.
    """
    z = frozenset(z)
    _, rigid_cfg, flex_cfg = _single_scheme_change(rigid, flexible)
    if _unit_increment_point(rigid_cfg, flex_cfg) is None:
        return z

    floor = {c.student: c for c in z}
    trimmed = {}
    for s in flexible.students:
        pref = flexible.preferences[s]
        current = floor.get(s)
        if current is None:
            trimmed[s] = pref
        else:
            trimmed[s] = PreferenceOrder(s, pref.ranked[: pref.rank(current) + 1])
    compiled = Compiled.from_instance(flexible.with_preferences(trimmed))
    return compiled.to_set(compiled.cop(compiled.default_order_rank()))


# ----------------------------------------------------------------------
# end-to-end flexibility comparison


@dataclass(frozen=True)
class FlexibilityComparison:
    dominates: bool
    rigid_outcome: frozenset
    flexible_outcome: frozenset
    deltas: tuple[tuple[str, Optional[Contract], Optional[Contract], str], ...]
    chain_agrees: Optional[bool]
    decomposed: bool

    def __bool__(self) -> bool:
        return self.dominates


def check_flexibility_pareto(
    rigid: ProblemInstance, flexible: ProblemInstance
) -> FlexibilityComparison:
    """Compare mechanism outcomes under two transfer-scheme profiles.

    Every changed school's flexible scheme must be more flexible than its
    rigid counterpart. The comparison always runs both mechanisms directly
    and verifies weak Pareto dominance student by student. When the gap can
    be decomposed into monotone unit increments (one school at a time, one
    seat at a time), the reseating chain is replayed along the decomposition
    and must land exactly on the rerun mechanism's outcome at each school
    boundary; ``chain_agrees`` is ``None`` when no such decomposition exists.
    """
    changed = _changed_schools(rigid, flexible)
    for sid in changed:
        r_cfg = rigid.school(sid)
        f_cfg = flexible.school(sid)
        if not is_more_flexible(f_cfg.scheme, r_cfg.scheme, r_cfg.targets, r_cfg.capacity):
            raise InvalidInputError(f"school {sid}: flexible scheme is not more flexible")

    rigid_outcome = run_cop_default(rigid)
    flexible_outcome = run_cop_default(flexible)

    chain_agrees: Optional[bool] = True
    decomposed = True
    working = rigid
    outcome = rigid_outcome
    for sid in changed:
        target = working.with_school(flexible.school(sid))
        steps = _unit_instances(working, target, sid)
        direct = run_cop_default(target)
        if steps is None or chain_agrees is None:
            decomposed = decomposed and steps is not None
            chain_agrees = None
        else:
            previous = working
            replay = outcome
            agreed = True
            for inst in steps:
                replay = improvement_chains(replay, previous, inst)
                previous = inst
            if replay != direct:
                agreed = False
            chain_agrees = chain_agrees and agreed
        working, outcome = target, direct

    deltas = []
    dominates = True
    for student in rigid.students:
        pref = rigid.preferences[student]
        before = _assignment_of(rigid_outcome, student)
        after = _assignment_of(flexible_outcome, student)
        rb, ra = pref.rank(before), pref.rank(after)
        verdict = "same" if ra == rb else ("better" if ra < rb else "worse")
        if verdict == "worse":
            dominates = False
        deltas.append((student, before, after, verdict))
    return FlexibilityComparison(
        dominates, rigid_outcome, flexible_outcome, tuple(deltas), chain_agrees, decomposed
    )


def _full_table(cfg: SchoolConfig) -> dict[int, dict[tuple[int, ...], int]]:
    bound = cfg.capacity
    return {
        k: {
            vec: cfg.scheme.capacity(k, vec, cfg.targets)
            for vec in itertools.product(range(bound + 1), repeat=k)
        }
        for k in range(1, cfg.group_count)
    }


def _unit_instances(
    working: ProblemInstance, target: ProblemInstance, sid: str
) -> Optional[list[ProblemInstance]]:
    """Instances stepping one seat at a time from ``working`` to ``target`` at
    school ``sid``; the last entry is ``target`` itself. Each round bumps the
    first candidate point that keeps the intermediate table monotone (upper
    corners of the gap first, necessarily, since a bump below an unlifted
    point would overshoot it). ``None`` when no monotone bump order exists.
    """
    base_cfg = working.school(sid)
    goal_cfg = target.school(sid)
    table = _full_table(base_cfg)
    goal = _full_table(goal_cfg)

    def as_scheme(tab):
        entries = {
            k: {vec: cap for vec, cap in rows.items() if cap != base_cfg.targets[k]}
            for k, rows in tab.items()
        }
        return TableScheme({k: rows for k, rows in entries.items() if rows})

    intermediates: list[ProblemInstance] = []
    while table != goal:
        candidates = [
            (k, vec)
            for k in sorted(goal)
            for vec in sorted(goal[k])
            if table[k][vec] < goal[k][vec]
        ]
        placed = None
        for k, vec in candidates:
            table[k][vec] += 1
            scheme = as_scheme(table)
            if check_monotonic(scheme, base_cfg.targets, base_cfg.capacity).ok:
                placed = scheme
                break
            table[k][vec] -= 1
        if placed is None:
            return None
        if table == goal:
            intermediates.append(target)
        else:
            intermediates.append(working.with_school(replace(base_cfg, scheme=placed)))
    return intermediates


def allocation_waste(instance: ProblemInstance, allocation: Iterable[Contract]) -> int:
    """Unfilled reserved seats that the transfer schemes left on the table.

    For each school's choice over its own assignment, a group's unmet target
    counts as waste unless zeroing that group's residual would have reduced a
    later group's realized capacity, i.e. unless the vacancies were passed
    on. An artifact-level diagnostic, not a quantity from the model itself.
    """
    allocation = frozenset(allocation)
    total = 0
    for cfg in instance.schools:
        _, trace = dynamic_reserves_choice(allocation, cfg)
        residuals = list(trace.residuals)
        for k, record in enumerate(trace.groups):
            if record.residual == 0:
                continue
            zeroed = list(residuals)
            zeroed[k] = 0
            transferred = any(
                cfg.dynamic_capacity(m, tuple(residuals[:m]))
                > cfg.dynamic_capacity(m, tuple(zeroed[:m]))
                for m in range(k + 1, cfg.group_count)
            )
            if not transferred:
                total += max(0, cfg.targets[k] - len(record.chosen))
    return total
