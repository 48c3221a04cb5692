"""Shared vocabulary: value profiles, assignments, outcomes and their metrics.

Every sum over bidders runs in ascending bidder index so welfare, revenue and
utility are bit-reproducible across runs and thread counts.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InvariantViolation, UsageError


@dataclass(frozen=True, eq=False)
class ValueProfile:
    """Reported values, one row per bidder and one column per item."""
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2:
            raise UsageError(f"value profile must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise UsageError(f"value profile needs n >= 1 and m >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise UsageError("value profile contains non-finite entries")
        if np.any(arr < 0):
            raise UsageError("value profile contains negative entries")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def m(self) -> int:
        return int(self.values.shape[1])

    def value(self, bidder: int, item: int) -> float:
        if not (0 <= bidder < self.n and 0 <= item < self.m):
            raise UsageError(f"pair ({bidder}, {item}) outside {self.n}x{self.m} profile")
        return float(self.values[bidder, item])

    def with_row(self, bidder: int, row: Sequence[float]) -> "ValueProfile":
        """Copy of the profile with ``bidder``'s row replaced."""
        if len(row) != self.m:
            raise UsageError(f"row has {len(row)} entries, profile has {self.m} items")
        arr = np.array(self.values, dtype=float)
        arr[bidder] = row
        return ValueProfile(arr)

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]]) -> "ValueProfile":
        return cls(np.array([list(r) for r in rows], dtype=float))


@dataclass(frozen=True)
class Assignment:
    """Set of (bidder, item) pairs, kept sorted by bidder then item.

    Without ``copies`` this is a partial matching. In copies accounting each
    item is still won at most once but a bidder may win several items.
    """
    pairs: Tuple[Tuple[int, int], ...] = ()
    copies: bool = False

    def __post_init__(self) -> None:
        pairs = tuple(sorted((int(b), int(j)) for b, j in self.pairs))
        items = [j for _, j in pairs]
        if len(set(items)) != len(items):
            raise InvariantViolation(f"item assigned twice in {pairs}")
        if not self.copies and not is_partial_matching(pairs):
            raise InvariantViolation(f"bidder assigned twice in {pairs}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, int]) -> "Assignment":
        return cls(tuple(mapping.items()))

    @property
    def bidders(self) -> List[int]:
        """Distinct bidders holding at least one item, ascending."""
        return sorted({b for b, _ in self.pairs})

    def items_of(self, bidder: int) -> List[int]:
        return [j for b, j in self.pairs if b == bidder]

    def item_of(self, bidder: int) -> Optional[int]:
        items = self.items_of(bidder)
        if not items:
            return None
        if len(items) > 1:
            raise UsageError(f"bidder {bidder} holds several items; use items_of")
        return items[0]

    def as_dict(self) -> Dict[int, int]:
        if self.copies:
            raise UsageError("copies assignment is not a bidder->item map")
        return {b: j for b, j in self.pairs}


@dataclass(frozen=True)
class Outcome:
    """Assignment plus one nonnegative payment per bidder."""
    assignment: Assignment
    payments: Tuple[float, ...]

    def __post_init__(self) -> None:
        payments = tuple(float(p) for p in self.payments)
        if any(p < 0 for p in payments):
            raise InvariantViolation(f"negative payment in {payments}")
        object.__setattr__(self, "payments", payments)

    @property
    def n(self) -> int:
        return len(self.payments)

    @classmethod
    def build(
        cls,
        n: int,
        pairs: Iterable[Tuple[int, int]],
        prices: Optional[Mapping[int, float]] = None,
        copies: bool = False,
    ) -> "Outcome":
        """Assemble an outcome; ``prices`` maps bidder -> total payment."""
        payments = [0.0] * n
        for bidder, price in (prices or {}).items():
            payments[bidder] += float(price)
        return cls(Assignment(tuple(pairs), copies=copies), tuple(payments))


@dataclass(frozen=True, eq=False)
class FractionalAllocation:
    """Doubly substochastic matrix of allocation probabilities."""
    probs: np.ndarray
    tol: float = field(default=1e-9, repr=False)

    def __post_init__(self) -> None:
        arr = np.array(self.probs, dtype=float)
        if arr.ndim != 2:
            raise UsageError(f"allocation must be 2-D, got shape {arr.shape}")
        if np.any(arr < -self.tol) or np.any(arr > 1 + self.tol):
            raise InvariantViolation("allocation probability outside [0, 1]")
        if np.any(arr.sum(axis=1) > 1 + self.tol) or np.any(arr.sum(axis=0) > 1 + self.tol):
            raise InvariantViolation("allocation is not doubly substochastic")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def unallocated(self) -> np.ndarray:
        """Per-item probability of being discarded."""
        return np.clip(1.0 - self.probs.sum(axis=0), 0.0, None)


def welfare(profile: ValueProfile, assignment: Assignment) -> float:
    """Sum of assigned values, bidder index ascending."""
    total = 0.0
    for bidder, item in assignment.pairs:
        total += profile.value(bidder, item)
    return total


def revenue(payments: Sequence[float]) -> float:
    total = 0.0
    for p in payments:
        total += float(p)
    return total


def utility(profile: ValueProfile, outcome: Outcome) -> float:
    """Welfare minus revenue (money burnt is lost)."""
    if outcome.n != profile.n:
        raise UsageError(f"outcome has {outcome.n} payments for {profile.n} bidders")
    return welfare(profile, outcome.assignment) - revenue(outcome.payments)


def check_outcome(profile: ValueProfile, outcome: Outcome, tol: float = 1e-9) -> None:
    """Raise InvariantViolation unless ``outcome`` is valid on ``profile``.

    Checks dimensions, that unassigned bidders pay zero, and ex-post IR: no
    bidder pays more than the reported value of what they won.
    """
    if outcome.n != profile.n:
        raise InvariantViolation(f"outcome has {outcome.n} payments for {profile.n} bidders")
    won: Dict[int, float] = {}
    for bidder, item in outcome.assignment.pairs:
        if not (0 <= bidder < profile.n and 0 <= item < profile.m):
            raise InvariantViolation(f"pair ({bidder}, {item}) outside profile")
        won[bidder] = won.get(bidder, 0.0) + profile.value(bidder, item)
    for bidder, payment in enumerate(outcome.payments):
        if bidder not in won and payment != 0.0:
            raise InvariantViolation(f"unassigned bidder {bidder} pays {payment}")
        if payment > won.get(bidder, 0.0) + tol:
            raise InvariantViolation(
                f"bidder {bidder} pays {payment} above reported value {won.get(bidder, 0.0)}"
            )


def is_partial_matching(pairs: Iterable[Tuple[int, int]]) -> bool:
    """No bidder and no item appears twice."""
    pairs = list(pairs)
    return (len({b for b, _ in pairs}) == len(pairs)
            and len({j for _, j in pairs}) == len(pairs))
