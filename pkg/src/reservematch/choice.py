"""Dynamic reserves choice functions and capacity transfer schemes.

A school partitions its seats into groups of slots, each reserved for one
privilege type, and fills the groups in a fixed precedence order. Seats left
vacant by a group can be transferred to later groups through a capacity
transfer scheme, which maps the vector of upstream vacancies to each group's
dynamic capacity. The overall choice chains q-responsive sub-choices, one per
group, removing every contract of a student as soon as one of their contracts
is chosen. The completion variant keeps a chosen student's other contracts in
play, which is what makes it substitutable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Union

from .errors import InvalidInputError, SearchCapExceededError
from .model import Contract, DerivedTypePriority, PriorityOrder, TypeProfile

__all__ = [
    "ForwardSumScheme",
    "TableScheme",
    "CapacityTransferScheme",
    "SchoolConfig",
    "GroupRecord",
    "ChoiceTrace",
    "MonotonicityReport",
    "check_monotonic",
    "sub_choice",
    "dynamic_reserves_choice",
    "completion_choice",
    "SlotSpecificSchool",
    "slot_specific_choice",
    "ConvertedSlotSpecific",
    "convert_slot_specific",
]


@dataclass(frozen=True)
class ForwardSumScheme:
    """Transfer scheme that forwards donor groups' vacancies at unit weight.

    ``donors[k]`` lists the earlier groups whose residual vacancies feed group
    ``k``; ``donors[0]`` must be empty since the first group always runs at
    its target capacity. A vacancy already spent by an earlier recipient is
    not granted twice: recipients are settled in precedence order and each
    donor's remaining balance is drawn down earliest-donor-first, so the
    realized capacity stays a pure function of the residual vector.

    When every donor group feeds at most one recipient the scheme is monotone
    by construction (see :meth:`certified_monotone`).
    """

    donors: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.donors and self.donors[0]:
            raise InvalidInputError("the first group of slots cannot receive transfers")
        for k, ds in enumerate(self.donors):
            if len(set(ds)) != len(ds):
                raise InvalidInputError(f"group {k}: duplicate donor entries {ds}")
            if any(d < 0 or d >= k for d in ds):
                raise InvalidInputError(f"group {k}: donors {ds} must be earlier groups")

    def capacity(self, k: int, residuals: tuple[int, ...], targets: tuple[int, ...]) -> int:
        if k == 0:
            return targets[0]
        consumed = [0] * k
        for m in range(1, k):
            dm = self.donors[m]
            if not dm:
                continue
            inflow = sum(residuals[j] - consumed[j] for j in dm)
            spent = max(0, inflow - residuals[m])
            for j in sorted(dm):
                take = min(spent, residuals[j] - consumed[j])
                consumed[j] += take
                spent -= take
        return targets[k] + sum(residuals[j] - consumed[j] for j in self.donors[k])

    def certified_monotone(self) -> bool:
        """True when no group donates to more than one recipient, a shape for
        which both monotonicity conditions hold for every residual vector."""
        seen: set[int] = set()
        for ds in self.donors:
            for d in ds:
                if d in seen:
                    return False
                seen.add(d)
        return True


@dataclass(frozen=True)
class TableScheme:
    """Transfer scheme given pointwise as residual-vector -> capacity tables.

    ``entries[k]`` overrides group ``k``'s capacity for the listed residual
    vectors; any vector not listed falls back to the group's target capacity.
    """

    entries: Mapping[int, Mapping[tuple[int, ...], int]]

    def __post_init__(self):
        for k, table in self.entries.items():
            if k <= 0:
                raise InvalidInputError("table entries start at the second group")
            for vec, cap in table.items():
                if len(vec) != k:
                    raise InvalidInputError(
                        f"group {k}: residual vector {vec} must have length {k}"
                    )
                if any(r < 0 for r in vec) or cap < 0:
                    raise InvalidInputError(f"group {k}: negative entry in {vec} -> {cap}")

    def capacity(self, k: int, residuals: tuple[int, ...], targets: tuple[int, ...]) -> int:
        if k == 0:
            return targets[0]
        return self.entries.get(k, {}).get(tuple(residuals), targets[k])

    def certified_monotone(self) -> bool:
        return False


CapacityTransferScheme = Union[ForwardSumScheme, TableScheme]


@dataclass(frozen=True)
class SchoolConfig:
    """Everything a school needs to run its dynamic reserves choice."""

    school: str
    capacity: int
    priority: PriorityOrder
    precedence: tuple[str, ...]
    targets: tuple[int, ...]
    scheme: CapacityTransferScheme

    def __post_init__(self):
        if len(self.precedence) != len(self.targets):
            raise InvalidInputError(
                f"school {self.school}: {len(self.precedence)} groups but "
                f"{len(self.targets)} targets"
            )
        if not self.precedence:
            raise InvalidInputError(f"school {self.school}: needs at least one group")

    @property
    def group_count(self) -> int:
        return len(self.precedence)

    def dynamic_capacity(self, k: int, residuals: tuple[int, ...]) -> int:
        return self.scheme.capacity(k, residuals, self.targets)


@dataclass(frozen=True)
class GroupRecord:
    """One group's step in a choice run: what it saw, took, and left vacant."""

    group: int
    privilege: str
    available: frozenset
    capacity: int
    chosen: frozenset
    residual: int


@dataclass(frozen=True)
class ChoiceTrace:
    """Group-by-group evidence of a single choice-function evaluation."""

    school: str
    groups: tuple[GroupRecord, ...]
    chosen: frozenset

    @property
    def residuals(self) -> tuple[int, ...]:
        return tuple(g.residual for g in self.groups)

    @property
    def capacities(self) -> tuple[int, ...]:
        return tuple(g.capacity for g in self.groups)


@dataclass(frozen=True)
class MonotonicityReport:
    ok: bool
    group: Optional[int] = None
    low: Optional[tuple[int, ...]] = None
    high: Optional[tuple[int, ...]] = None
    condition: Optional[int] = None

    def __bool__(self) -> bool:
        return self.ok


def _pair_count(groups: int, bound: int) -> int:
    per_coordinate = (bound + 1) * (bound + 2) // 2
    return sum(per_coordinate ** (k - 1) for k in range(2, groups + 1))


def check_monotonic(
    scheme: CapacityTransferScheme,
    targets: tuple[int, ...],
    bound: int,
    pair_cap: int = 2_000_000,
) -> MonotonicityReport:
    """Exhaustively verify both monotonicity conditions over ``[0, bound]``.

    For every group and every componentwise-ordered pair of residual vectors
    the dynamic capacity must not shrink, and the cumulative capacity gain up
    to any group must not exceed the extra vacancies feeding it. Returns the
    first violating pair, scanning vectors in lexicographic order. Raises
    :class:`SearchCapExceededError` rather than sampling when the pair space
    is too large to enumerate.
    """
    groups = len(targets)
    if bound < 0:
        raise InvalidInputError("bound must be non-negative")
    needed = _pair_count(groups, bound)
    if needed > pair_cap:
        raise SearchCapExceededError(needed, pair_cap, "monotonicity pair enumeration")

    cache: dict[tuple[int, tuple[int, ...]], int] = {}

    def cap(k: int, vec: tuple[int, ...]) -> int:
        key = (k, vec)
        if key not in cache:
            cache[key] = scheme.capacity(k, vec, targets)
        return cache[key]

    for k in range(1, groups):
        for low in itertools.product(range(bound + 1), repeat=k):
            for high in itertools.product(*(range(r, bound + 1) for r in low)):
                if cap(k, high) < cap(k, low):
                    return MonotonicityReport(False, k, low, high, condition=1)
                gain = sum(cap(m, high[:m]) - cap(m, low[:m]) for m in range(1, k + 1))
                if gain > sum(high) - sum(low):
                    return MonotonicityReport(False, k, low, high, condition=2)
    return MonotonicityReport(True)


def _ranked_by_priority(
    candidates: Iterable[Contract], priority: PriorityOrder
) -> list[Contract]:
    """Contracts of priority-acceptable students, best student first."""
    keyed = []
    for c in candidates:
        r = priority.rank(c.student)
        if r is not None:
            keyed.append((r, c))
    keyed.sort()
    return [c for _, c in keyed]


def sub_choice(
    offers: Iterable[Contract],
    capacity: int,
    privilege: str,
    ranking: DerivedTypePriority,
) -> frozenset:
    """Pick up to ``capacity`` contracts naming ``privilege``, best-ranked
    students first; contracts of other schools, other types, or unranked
    students are filtered out."""
    pos = {s: n for n, s in enumerate(ranking.ranked)}
    keyed = sorted(
        (pos[c.student], c)
        for c in offers
        if c.privilege == privilege and c.school == ranking.school and c.student in pos
    )
    return frozenset(c for _, c in keyed[: max(capacity, 0)])


def _run_groups(
    offers: Iterable[Contract], config: SchoolConfig, remove_whole_student: bool
) -> tuple[frozenset, ChoiceTrace]:
    available = {c for c in offers if c.school == config.school}
    residuals: list[int] = []
    records: list[GroupRecord] = []
    chosen_union: set = set()
    for k, privilege in enumerate(config.precedence):
        capacity = config.dynamic_capacity(k, tuple(residuals))
        snapshot = frozenset(available)
        picks: list[Contract] = []
        if capacity > 0:
            for c in _ranked_by_priority(
                (c for c in available if c.privilege == privilege), config.priority
            ):
                picks.append(c)
                if len(picks) >= capacity:
                    break
        records.append(
            GroupRecord(k, privilege, snapshot, capacity, frozenset(picks), capacity - len(picks))
        )
        residuals.append(capacity - len(picks))
        chosen_union.update(picks)
        if remove_whole_student:
            taken = {c.student for c in picks}
            available = {c for c in available if c.student not in taken}
        else:
            available.difference_update(picks)
    chosen = frozenset(chosen_union)
    return chosen, ChoiceTrace(config.school, tuple(records), chosen)


def dynamic_reserves_choice(
    offers: Iterable[Contract], config: SchoolConfig
) -> tuple[frozenset, ChoiceTrace]:
    """The school's overall choice: run the groups in precedence order and,
    whenever a contract is chosen, drop the student's remaining contracts for
    the rest of the run. At most one contract per student is ever selected."""
    return _run_groups(offers, config, remove_whole_student=True)


def completion_choice(
    offers: Iterable[Contract], config: SchoolConfig
) -> tuple[frozenset, ChoiceTrace]:
    """Like :func:`dynamic_reserves_choice` except a chosen student's other
    contracts stay available to later groups, so two contracts of one student
    may be selected. Agrees with the overall choice whenever that happens not
    to occur, and satisfies rejection irrelevance, substitutability, and the
    law of aggregate demand."""
    return _run_groups(offers, config, remove_whole_student=False)


@dataclass(frozen=True)
class SlotSpecificSchool:
    """A school whose seats are individual slots with their own contract
    rankings, filled one slot at a time in precedence order."""

    school: str
    contracts: tuple[Contract, ...]
    slots: tuple[tuple[Contract, ...], ...]

    def __post_init__(self):
        universe = set(self.contracts)
        if len(universe) != len(self.contracts):
            raise InvalidInputError(f"school {self.school}: duplicate contracts")
        for c in self.contracts:
            if c.school != self.school:
                raise InvalidInputError(f"contract {c} does not belong to {self.school}")
        for n, slot in enumerate(self.slots):
            if len(set(slot)) != len(slot):
                raise InvalidInputError(f"slot {n}: duplicate entries")
            if not universe.issuperset(slot):
                raise InvalidInputError(f"slot {n}: ranks contracts outside the school")


def slot_specific_choice(offers: Iterable[Contract], school: SlotSpecificSchool) -> frozenset:
    """Fill each slot with its top-ranked remaining contract, skipping
    contracts of students already seated; unfillable slots stay empty."""
    pool = set(offers)
    taken_students: set = set()
    out: set = set()
    for slot in school.slots:
        for c in slot:
            if c in pool and c.student not in taken_students:
                out.add(c)
                taken_students.add(c.student)
                break
    return frozenset(out)


@dataclass(frozen=True)
class ConvertedSlotSpecific:
    """A dynamic reserves rule equivalent to some slot-specific rule.

    Each original contract gets its own artificial privilege type, so the
    converted config's sub-choices see exactly one contract each. ``mapping``
    rewrites original contracts into the artificial type space;
    :meth:`choice` does the round trip for you.
    """

    config: SchoolConfig
    profile: TypeProfile
    mapping: Mapping[Contract, Contract]
    inverse: Mapping[Contract, Contract]

    def choice(self, offers: Iterable[Contract]) -> frozenset:
        translated = [self.mapping[c] for c in offers if c in self.mapping]
        chosen, _ = dynamic_reserves_choice(translated, self.config)
        return frozenset(self.inverse[c] for c in chosen)


def convert_slot_specific(school: SlotSpecificSchool) -> ConvertedSlotSpecific:
    """Rebuild a slot-specific rule as a dynamic reserves rule.

    Every slot becomes a run of single-contract groups: the first group in
    the run holds the slot's one seat, and each later group inherits the
    seat exactly when the previous group left it vacant, i.e. when the more
    preferred contract was unavailable. Contracts no slot finds acceptable
    get trailing zero-capacity groups so every artificial type is covered.
    The resulting choice function selects the same set as the original on
    every offer set.
    """
    xs = sorted(school.contracts)
    if not xs:
        raise InvalidInputError(f"school {school.school}: no contracts to convert")
    tau = {c: f"v{n}" for n, c in enumerate(xs)}

    precedence: list[str] = []
    targets: list[int] = []
    donors: list[tuple[int, ...]] = []
    for slot in school.slots:
        for pos, c in enumerate(slot):
            precedence.append(tau[c])
            targets.append(1 if pos == 0 else 0)
            donors.append(() if pos == 0 else (len(precedence) - 2,))
    covered = set(precedence)
    for c in xs:
        if tau[c] not in covered:
            precedence.append(tau[c])
            targets.append(0)
            donors.append(())
            covered.add(tau[c])

    students = tuple(sorted({c.student for c in xs}))
    config = SchoolConfig(
        school=school.school,
        capacity=sum(targets),
        priority=PriorityOrder(school.school, students),
        precedence=tuple(precedence),
        targets=tuple(targets),
        scheme=ForwardSumScheme(tuple(donors)),
    )
    profile = TypeProfile(
        types=tuple(tau[c] for c in xs),
        claims={s: frozenset(tau[c] for c in xs if c.student == s) for s in students},
    )
    mapping = {c: Contract(c.student, c.school, tau[c]) for c in xs}
    inverse = {v: k for k, v in mapping.items()}
    return ConvertedSlotSpecific(config, profile, mapping, inverse)
