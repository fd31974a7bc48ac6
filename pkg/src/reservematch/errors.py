"""Exception types shared across the package."""

from __future__ import annotations


class ReserveMatchError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ReserveMatchError):
    """An argument violates a documented precondition."""


class InstanceFormatError(ReserveMatchError):
    """An instance file could not be parsed.

    ``location`` points at the offending part of the file (a JSON path or a
    line/column pair), when known.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ValidationError(ReserveMatchError):
    """An instance failed validation; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SearchCapExceededError(ReserveMatchError):
    """An exhaustive search would exceed its configured cap.

    Raised instead of silently sampling or truncating, so a passing check
    always means the whole space was covered.
    """

    def __init__(self, needed: int, cap: int, what: str):
        self.needed = needed
        self.cap = cap
        super().__init__(f"{what}: {needed} cases exceed the cap of {cap}")
