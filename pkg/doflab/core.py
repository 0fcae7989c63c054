"""
Shared value types: exact rationals, user subsets, DoF points and CSIT configurations.

Every type here is immutable, so values can be passed between threads freely.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

from .errors import DimensionError, ParameterError

Rational = Fraction

MAX_USERS = 16

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*$")


def rational_reduce(n: int, d: int) -> Fraction:
    """Reduced form of n/d with a positive denominator; d = 0 raises ZeroDivisionError."""
    if d == 0:
        raise ZeroDivisionError(f"rational with zero denominator: {n}/0")
    return Fraction(int(n), int(d))


def parse_rational(text: str) -> Fraction:
    """Parses "p/q" or "p" exactly. Decimal notation is rejected."""
    match = _RATIONAL_RE.match(text)
    if not match:
        raise ParameterError(f"not a rational in p/q form: {text!r}")
    numerator, denominator = match.group(1), match.group(2)
    return rational_reduce(int(numerator), int(denominator) if denominator else 1)


_PAIR_RE = re.compile(r"\s*([^=]+?)\s*=\s*([^,=]*?)\s*(?:,|$)")


def split_pairs(text: str) -> list[tuple[str, str]]:
    """Splits "d_1=1,d_1,10=1/2" into (label, value) pairs.

    Values never contain a comma, so a comma inside a label such as d_1,10 or
    {1,10} stays with the label that follows it.
    """
    pairs = []
    position, end = 0, len(text.rstrip())
    while position < end:
        match = _PAIR_RE.match(text, position)
        if not match:
            raise ParameterError(f"expected label=value, got {text[position:].strip()!r}")
        pairs.append((match.group(1), match.group(2)))
        position = match.end()
    return pairs


def format_rational(value: Fraction | int) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _check_users(K: int) -> None:
    if not isinstance(K, int) or not 1 <= K <= MAX_USERS:
        raise ParameterError(f"user count must be in 1..{MAX_USERS}, got {K!r}")


@dataclass(frozen=True, order=False)
class UserSubset:
    """A set of users encoded as a bitmask (bit i-1 set for user i)."""

    mask: int

    def __post_init__(self):
        if self.mask < 0 or self.mask >= 1 << MAX_USERS:
            raise ParameterError(f"subset mask out of range: {self.mask}")

    @classmethod
    def of(cls, *users: int) -> UserSubset:
        mask = 0
        for user in users:
            if not 1 <= user <= MAX_USERS:
                raise ParameterError(f"user index out of range: {user}")
            mask |= 1 << (user - 1)
        return cls(mask)

    @classmethod
    def from_members(cls, users: Iterable[int]) -> UserSubset:
        return cls.of(*users)

    @classmethod
    def from_label(cls, label: str) -> UserSubset:
        """Accepts "d_12", "12", "d_1,10" or "{1,2}"."""
        text = label.strip()
        if text.startswith("d_"):
            text = text[2:]
        text = text.strip("{}")
        if not text:
            raise ParameterError(f"empty subset label: {label!r}")
        if "," in text:
            parts = [part.strip() for part in text.split(",")]
        else:
            parts = list(text)
        if not all(part.isdigit() for part in parts):
            raise ParameterError(f"bad subset label: {label!r}")
        return cls.of(*(int(part) for part in parts))

    @property
    def members(self) -> tuple[int, ...]:
        return tuple(i + 1 for i in range(MAX_USERS) if self.mask >> i & 1)

    @property
    def size(self) -> int:
        return bin(self.mask).count("1")

    @property
    def is_empty(self) -> bool:
        return self.mask == 0

    def __contains__(self, user: int) -> bool:
        return 1 <= user <= MAX_USERS and bool(self.mask >> (user - 1) & 1)

    def __iter__(self):
        return iter(self.members)

    def __len__(self) -> int:
        return self.size

    def issubset(self, other: UserSubset) -> bool:
        return self.mask & ~other.mask == 0

    def union(self, other: UserSubset) -> UserSubset:
        return UserSubset(self.mask | other.mask)

    def difference(self, other: UserSubset) -> UserSubset:
        return UserSubset(self.mask & ~other.mask)

    def fits(self, K: int) -> bool:
        return self.mask >> K == 0

    def relabel(self, mapping: Mapping[int, int]) -> UserSubset:
        return UserSubset.of(*(mapping.get(user, user) for user in self.members))

    def sort_key(self) -> tuple[int, int]:
        return (self.size, self.mask)

    @property
    def label(self) -> str:
        members = self.members
        if any(user >= 10 for user in members):
            return "d_" + ",".join(str(user) for user in members)
        return "d_" + "".join(str(user) for user in members)

    def __str__(self) -> str:
        return "{" + ",".join(str(user) for user in self.members) + "}"


@lru_cache(maxsize=None)
def canonical_subsets(K: int) -> tuple[UserSubset, ...]:
    """All 2^K - 1 nonempty subsets of {1..K}, by (cardinality, bitmask)."""
    _check_users(K)
    return tuple(
        sorted((UserSubset(mask) for mask in range(1, 1 << K)), key=UserSubset.sort_key)
    )


@lru_cache(maxsize=None)
def _subset_positions(K: int) -> dict[UserSubset, int]:
    return {subset: index for index, subset in enumerate(canonical_subsets(K))}


def index_of_subset(K: int, subset: UserSubset) -> int:
    try:
        return _subset_positions(K)[subset]
    except KeyError:
        raise DimensionError(f"{subset.label} is not a nonempty subset of 1..{K}") from None


def subset_at_index(K: int, index: int) -> UserSubset:
    subsets = canonical_subsets(K)
    if not 0 <= index < len(subsets):
        raise ParameterError(f"subset index {index} out of range for K={K}")
    return subsets[index]


@dataclass(frozen=True, init=False)
class DofPoint:
    """Nonnegative DoF values per message subset; absent subsets are zero."""

    K: int
    items: tuple[tuple[UserSubset, Fraction], ...] = ()

    def __init__(self, K: int, values: Mapping[UserSubset, Fraction | int] | None = None):
        _check_users(K)
        stored = []
        for subset, value in (values or {}).items():
            if subset.is_empty or not subset.fits(K):
                raise DimensionError(f"{subset.label} is not a nonempty subset of 1..{K}")
            value = Fraction(value)
            if value < 0:
                raise ParameterError(f"negative DoF for {subset.label}: {value}")
            if value != 0:
                stored.append((subset, value))
        stored.sort(key=lambda item: item[0].sort_key())
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "items", tuple(stored))

    @classmethod
    def from_values(
        cls, K: int, variables: Iterable[UserSubset], values: Iterable[Fraction | int]
    ) -> DofPoint:
        variables, values = list(variables), list(values)
        if len(variables) != len(values):
            raise DimensionError(
                f"expected {len(variables)} coordinates, got {len(values)}"
            )
        return cls(K, dict(zip(variables, values)))

    @classmethod
    def private(cls, *values: Fraction | int) -> DofPoint:
        """Point with d_i = values[i-1] and no common messages."""
        return cls(len(values), {UserSubset.of(i + 1): v for i, v in enumerate(values)})

    @property
    def values(self) -> dict[UserSubset, Fraction]:
        return dict(self.items)

    def __getitem__(self, subset: UserSubset) -> Fraction:
        return self.values.get(subset, Fraction(0))

    def coordinates(self, variables: Iterable[UserSubset]) -> tuple[Fraction, ...]:
        values = self.values
        return tuple(values.get(subset, Fraction(0)) for subset in variables)

    def total(self) -> Fraction:
        return sum((value for _, value in self.items), Fraction(0))

    def scaled(self, factor: Fraction | int) -> DofPoint:
        return DofPoint(self.K, {subset: value * factor for subset, value in self.items})

    def to_dict(self) -> dict[str, str]:
        return {subset.label: format_rational(value) for subset, value in self.items}

    def __str__(self) -> str:
        body = ", ".join(f"{s.label}={format_rational(v)}" for s, v in self.items)
        return f"({body})"


class CsitState(Enum):
    PERFECT = "P"
    DELAYED = "D"
    NONE = "N"

    @classmethod
    def parse(cls, letter: str) -> CsitState:
        try:
            return cls(letter.upper())
        except ValueError:
            raise ParameterError(f"unknown CSIT state {letter!r} (use P, D or N)") from None


@dataclass(frozen=True)
class CsitConfig:
    """CSIT state per (slot, user); slot and user indices are 1-based in accessors."""

    K: int
    states: tuple[tuple[CsitState, ...], ...] = field(default_factory=tuple)

    def __post_init__(self):
        _check_users(self.K)
        for row in self.states:
            if len(row) != self.K:
                raise ParameterError(f"CSIT row has {len(row)} entries for K={self.K}")

    @classmethod
    def hybrid(cls, K: int, K_P: int, slots: int) -> CsitConfig:
        """Static hybrid model: users 1..K_P perfect, the rest delayed, every slot."""
        _check_users(K)
        if not 0 <= K_P <= K:
            raise ParameterError(f"K_P must be in 0..{K}, got {K_P}")
        row = tuple(
            CsitState.PERFECT if user <= K_P else CsitState.DELAYED
            for user in range(1, K + 1)
        )
        return cls(K, (row,) * slots)

    @property
    def slots(self) -> int:
        return len(self.states)

    def state(self, slot: int, user: int) -> CsitState:
        return self.states[slot - 1][user - 1]

    def row_text(self, slot: int) -> str:
        return " ".join(state.value for state in self.states[slot - 1])
