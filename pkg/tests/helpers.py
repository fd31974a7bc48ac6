"""Independent oracles used to cross-check the library's own verifiers.

Everything here re-derives results by unstructured enumeration, leaning only
on the choice functions themselves, so a library bug in the stability or
blocking-set code cannot hide behind itself.
"""

from __future__ import annotations

import itertools

import reservematch as rm


def enumerate_allocations(instance: rm.ProblemInstance):
    """Every feasible allocation: each student unmatched or holding one of
    their contracts, school loads within capacity. Exponential; tiny only."""
    per_student = []
    for s in instance.students:
        per_student.append([None] + sorted(instance.contracts_of(s)))
    capacities = {cfg.school: cfg.capacity for cfg in instance.schools}
    for combo in itertools.product(*per_student):
        chosen = [c for c in combo if c is not None]
        loads: dict = {}
        ok = True
        for c in chosen:
            loads[c.school] = loads.get(c.school, 0) + 1
            if loads[c.school] > capacities[c.school]:
                ok = False
                break
        if ok:
            yield frozenset(chosen)


def brute_is_stable(y: frozenset, instance: rm.ProblemInstance) -> bool:
    """Direct re-implementation of the three stability conditions."""
    held = {c.student: c for c in y}
    for c in y:
        if not instance.preferences[c.student].accepts(c):
            return False
    for cfg in instance.schools:
        mine = frozenset(c for c in y if c.school == cfg.school)
        if rm.dynamic_reserves_choice(y, cfg)[0] != mine:
            return False
    for cfg in instance.schools:
        pool = sorted(c for c in instance.contracts if c.school == cfg.school)
        for size in range(1, cfg.capacity + 1):
            for z in itertools.combinations(pool, size):
                z = frozenset(z)
                if z & y:
                    continue
                chosen = rm.dynamic_reserves_choice(y | z, cfg)[0]
                if not z <= chosen:
                    continue
                if all(
                    rm.student_choice((y | z), instance.preferences[s])
                    in frozenset(c for c in z if c.student == s)
                    and sum(1 for c in z if c.student == s) == 1
                    for s in {c.student for c in z}
                ):
                    return False
    return True


def brute_stable_set(instance: rm.ProblemInstance) -> list:
    return [y for y in enumerate_allocations(instance) if brute_is_stable(y, instance)]
