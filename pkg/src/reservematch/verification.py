"""Stability checking and choice-function axiom verification.

``is_stable`` tests the three stability conditions: students hold acceptable
contracts, schools would re-choose exactly what they hold, and no school can
assemble a blocking set of contracts that it would accept and whose students
would all take. The axiom checkers run a choice function over every subset of
a contract pool and verify rejection irrelevance, substitutability, the law
of aggregate demand, and the completion relationship; they are exhaustive or
they refuse, never sampled.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Callable, Iterable, Optional

from ._engine import Compiled
from .choice import SchoolConfig, completion_choice, dynamic_reserves_choice
from .errors import InvalidInputError, SearchCapExceededError
from .instance import ProblemInstance
from .model import Contract

__all__ = [
    "StabilityReport",
    "is_stable",
    "find_blocking_set",
    "PropertyCheck",
    "check_irc",
    "check_substitutability",
    "check_lad",
    "check_completion",
    "choice_handle",
    "completion_handle",
]

ChoiceHandle = Callable[[frozenset], frozenset]


def choice_handle(config: SchoolConfig) -> ChoiceHandle:
    """Wrap a school config's overall choice as a plain set-to-set function."""
    return lambda offers: dynamic_reserves_choice(offers, config)[0]


def completion_handle(config: SchoolConfig) -> ChoiceHandle:
    return lambda offers: completion_choice(offers, config)[0]


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of a stability check, with a witness for every failure."""

    unacceptable_assignments: tuple[Contract, ...]
    school_choice_mismatch: Optional[tuple[str, frozenset, frozenset]]
    blocking: Optional[tuple[str, frozenset]]

    @property
    def students_ok(self) -> bool:
        return not self.unacceptable_assignments

    @property
    def schools_ok(self) -> bool:
        return self.school_choice_mismatch is None

    @property
    def unblocked(self) -> bool:
        return self.blocking is None

    @property
    def passed(self) -> bool:
        return self.students_ok and self.schools_ok and self.unblocked

    def __bool__(self) -> bool:
        return self.passed


def is_stable(
    y: Iterable[Contract], instance: ProblemInstance, blocking_cap: int = 2_000_000
) -> StabilityReport:
    """Evaluate all three stability conditions for allocation ``y``."""
    y = frozenset(y)
    _require_allocation(y, instance)

    bad = tuple(
        sorted(c for c in y if not instance.preferences[c.student].accepts(c))
    )

    mismatch = None
    for cfg in instance.schools:
        held = frozenset(c for c in y if c.school == cfg.school)
        chosen, _ = dynamic_reserves_choice(y, cfg)
        if chosen != held:
            mismatch = (cfg.school, held, chosen)
            break

    blocking = None
    for cfg in instance.schools:
        z = find_blocking_set(y, cfg.school, instance, cap=blocking_cap)
        if z is not None:
            blocking = (cfg.school, z)
            break

    return StabilityReport(bad, mismatch, blocking)


def find_blocking_set(
    y: Iterable[Contract],
    school: str,
    instance: ProblemInstance,
    cap: int = 2_000_000,
) -> Optional[frozenset]:
    """Search for a blocking set at one school.

    A blocking set is a nonempty set of the school's contracts from outside
    ``y``, at most one per student, that the school would keep in full when
    offered on top of ``y`` and that every involved student strictly prefers
    to their current assignment. (Equivalently: the school's re-chosen
    portfolio would differ from its current one and be chosen by everyone in
    it. Allowing the set to overlap ``y`` would make any subset of a school's
    own held contracts "block", so blocking contracts must be new.)
    Candidates are enumerated smallest first, in lexicographic contract
    order, up to the school's capacity; the search refuses (rather than
    truncates) if the candidate count exceeds ``cap``.
    """
    y = frozenset(y)
    compiled = Compiled.from_instance(instance)
    cfg = instance.school(school)
    si = compiled.school_index[school]
    engine_school = compiled.schools[si]

    y_mask = compiled.to_mask(y)
    current = {c.student: c for c in y}

    # A contract can only belong to a blocking set if its student strictly
    # prefers it to their current assignment and the school could ever pick
    # it; filter before enumerating subsets.
    candidates = []
    for c in sorted(instance.contracts):
        if c.school != school or c in y or not cfg.priority.accepts(c.student):
            continue
        pref = instance.preferences[c.student]
        if not pref.accepts(c):
            continue
        if pref.rank(c) < pref.rank(current.get(c.student)):
            candidates.append(compiled.index[c])

    max_size = min(cfg.capacity, len(candidates))
    total = sum(comb(len(candidates), k) for k in range(1, max_size + 1))
    if total > cap:
        raise SearchCapExceededError(total, cap, f"blocking sets at school {school}")

    for size in range(1, max_size + 1):
        for combo in itertools.combinations(candidates, size):
            students = {compiled.student_bit[ci] for ci in combo}
            if len(students) != size:
                continue
            z_mask = 0
            for ci in combo:
                z_mask |= 1 << ci
            rechosen = engine_school.choose(y_mask | z_mask)[0]
            if rechosen & z_mask == z_mask:
                return compiled.to_set(z_mask)
    return None


def _require_allocation(y: frozenset, instance: ProblemInstance) -> None:
    problems = []
    stray = y - instance.contracts
    if stray:
        problems.append(f"unknown contracts {sorted(stray)}")
    per_student: dict[str, int] = {}
    for c in y:
        per_student[c.student] = per_student.get(c.student, 0) + 1
    doubled = [s for s, n in per_student.items() if n > 1]
    if doubled:
        problems.append(f"students with several contracts: {sorted(doubled)}")
    for cfg in instance.schools:
        load = sum(1 for c in y if c.school == cfg.school)
        if load > cfg.capacity:
            problems.append(f"school {cfg.school} over capacity ({load} > {cfg.capacity})")
    if problems:
        raise InvalidInputError("not an allocation: " + "; ".join(problems))


# ----------------------------------------------------------------------
# choice-function axioms, checked over every subset of a contract pool


@dataclass(frozen=True)
class PropertyCheck:
    holds: bool
    counterexample: Optional[tuple] = None

    def __bool__(self) -> bool:
        return self.holds


def _tabulate(
    choice: ChoiceHandle, contracts: Iterable[Contract], mode: str, cap: int
) -> tuple[list[Contract], list[frozenset]]:
    if mode != "exhaustive":
        raise InvalidInputError(f"unsupported mode {mode!r}; only exhaustive runs are sound")
    pool = sorted(set(contracts))
    n = len(pool)
    if 2**n > cap:
        raise SearchCapExceededError(2**n, cap, "subset enumeration")
    table = []
    for mask in range(2**n):
        offers = frozenset(pool[i] for i in range(n) if (mask >> i) & 1)
        table.append(frozenset(choice(offers)))
    return pool, table


def check_irc(
    choice: ChoiceHandle,
    contracts: Iterable[Contract],
    mode: str = "exhaustive",
    cap: int = 1 << 14,
) -> PropertyCheck:
    """Irrelevance of rejected contracts: dropping a rejected contract from
    the offer set never changes what is chosen. Counterexample: (Y, z) with
    z rejected from Y + z yet C(Y) != C(Y + z)."""
    pool, table = _tabulate(choice, contracts, mode, cap)
    n = len(pool)
    for mask in range(2**n):
        chosen = table[mask]
        for z in range(n):
            if not (mask >> z) & 1:
                continue
            if pool[z] in chosen:
                continue
            without = mask & ~(1 << z)
            if table[without] != chosen:
                y = frozenset(pool[i] for i in range(n) if (without >> i) & 1)
                return PropertyCheck(False, (y, pool[z]))
    return PropertyCheck(True)


def check_substitutability(
    choice: ChoiceHandle,
    contracts: Iterable[Contract],
    mode: str = "exhaustive",
    cap: int = 1 << 14,
) -> PropertyCheck:
    """A contract rejected from an offer set stays rejected when the set
    grows. Counterexample: (Y, z, z2) with z rejected from Y + z but chosen
    from Y + z + z2."""
    pool, table = _tabulate(choice, contracts, mode, cap)
    n = len(pool)
    for mask in range(2**n):
        chosen = table[mask]
        for z in range(n):
            if not (mask >> z) & 1 or pool[z] in chosen:
                continue
            for extra in range(n):
                if (mask >> extra) & 1:
                    continue
                if pool[z] in table[mask | (1 << extra)]:
                    y = frozenset(
                        pool[i] for i in range(n) if (mask >> i) & 1 and i != z
                    )
                    return PropertyCheck(False, (y, pool[z], pool[extra]))
    return PropertyCheck(True)


def check_lad(
    choice: ChoiceHandle,
    contracts: Iterable[Contract],
    mode: str = "exhaustive",
    cap: int = 1 << 14,
) -> PropertyCheck:
    """Law of aggregate demand: larger offer sets never yield fewer chosen
    contracts. Single-element extensions are checked, which covers every
    nested pair by chaining. Counterexample: (Y, Y + z)."""
    pool, table = _tabulate(choice, contracts, mode, cap)
    n = len(pool)
    for mask in range(2**n):
        size = len(table[mask])
        for z in range(n):
            if (mask >> z) & 1:
                continue
            if len(table[mask | (1 << z)]) < size:
                y = frozenset(pool[i] for i in range(n) if (mask >> i) & 1)
                return PropertyCheck(False, (y, y | {pool[z]}))
    return PropertyCheck(True)


def check_completion(
    base: ChoiceHandle,
    candidate: ChoiceHandle,
    contracts: Iterable[Contract],
    mode: str = "exhaustive",
    cap: int = 1 << 14,
) -> PropertyCheck:
    """``candidate`` completes ``base`` when, on every offer set, it either
    agrees with ``base`` exactly or selects two contracts of one student.
    Counterexample: the offending offer set."""
    pool, base_table = _tabulate(base, contracts, mode, cap)
    _, cand_table = _tabulate(candidate, contracts, mode, cap)
    n = len(pool)
    for mask in range(2**n):
        picked = cand_table[mask]
        if picked == base_table[mask]:
            continue
        students = [c.student for c in picked]
        if len(set(students)) < len(students):
            continue
        return PropertyCheck(
            False, (frozenset(pool[i] for i in range(n) if (mask >> i) & 1),)
        )
    return PropertyCheck(True)
