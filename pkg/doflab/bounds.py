"""
Outer-bound inequalities for the K-user MISO broadcast channel with hybrid CSIT.

Users 1..K_P are seen instantaneously by the transmitter, users K_P+1..K with a
unit delay. Every nonempty subset E_D of the delayed users together with an
ordering of the instantaneous users and an ordering of E_D gives one bound.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .core import (
    MAX_USERS,
    DofPoint,
    UserSubset,
    canonical_subsets,
    format_rational,
    parse_rational,
)
from .errors import DimensionError, EmptyRegionError, ParameterError

logger = logging.getLogger(__name__)

# enumeration sizes above this get a warning
LARGE_ENUMERATION = 100_000


@dataclass(frozen=True)
class Theorem1Provenance:
    ed: UserSubset
    pi_p: tuple[int, ...]
    pi_d: tuple[int, ...]

    def __str__(self) -> str:
        pi_p = ",".join(map(str, self.pi_p))
        pi_d = ",".join(map(str, self.pi_d))
        return f"E_D={self.ed} pi_P=({pi_p}) pi_D=({pi_d})"


@dataclass(frozen=True)
class CompanionProvenance:
    """Bound built from only part of the instantaneous-CSIT users."""

    ep: UserSubset
    ed: UserSubset
    pi_p: tuple[int, ...]
    pi_d: tuple[int, ...]

    def __str__(self) -> str:
        pi_p = ",".join(map(str, self.pi_p))
        pi_d = ",".join(map(str, self.pi_d))
        return f"E_P'={self.ep} E_D={self.ed} pi_P=({pi_p}) pi_D=({pi_d})"


@dataclass(frozen=True)
class BoxProvenance:
    subset: UserSubset

    def __str__(self) -> str:
        return f"box({self.subset.label})"


@dataclass(frozen=True)
class NonnegProvenance:
    subset: UserSubset

    def __str__(self) -> str:
        return f"nonneg({self.subset.label})"


@dataclass(frozen=True)
class ManualProvenance:
    note: str = "manual"

    def __str__(self) -> str:
        return self.note


Provenance = (
    Theorem1Provenance
    | CompanionProvenance
    | BoxProvenance
    | NonnegProvenance
    | ManualProvenance
)


def _canonical(
    coefficients: tuple[tuple[UserSubset, Fraction], ...], rhs: Fraction
) -> tuple[tuple[tuple[int, int], ...], Fraction]:
    denominators = [c.denominator for _, c in coefficients] + [rhs.denominator]
    scale = math.lcm(*denominators)
    ints = [(s.mask, int(c * scale)) for s, c in coefficients]
    g = math.gcd(*(abs(v) for _, v in ints)) if ints else 1
    g = g or 1
    return tuple((mask, v // g) for mask, v in ints), Fraction(int(rhs * scale), g)


@dataclass(frozen=True, eq=False)
class Inequality:
    """sum(coefficients[S] * d_S) <= rhs over DoF variables of a K-user channel."""

    K: int
    coefficients: tuple[tuple[UserSubset, Fraction], ...]
    rhs: Fraction
    provenance: Provenance = field(default_factory=ManualProvenance)

    @classmethod
    def make(
        cls,
        K: int,
        coefficients: Mapping[UserSubset, Fraction | int],
        rhs: Fraction | int,
        provenance: Provenance | None = None,
    ) -> Inequality:
        for subset in coefficients:
            if subset.is_empty or not subset.fits(K):
                raise DimensionError(f"{subset.label} is not a subset of 1..{K}")
        cleaned = tuple(
            sorted(
                ((s, Fraction(c)) for s, c in coefficients.items() if c != 0),
                key=lambda item: item[0].sort_key(),
            )
        )
        return cls(K, cleaned, Fraction(rhs), provenance or ManualProvenance())

    @property
    def key(self) -> tuple:
        return (self.K,) + _canonical(self.coefficients, self.rhs)

    @property
    def direction(self) -> tuple:
        return (self.K, _canonical(self.coefficients, Fraction(0))[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Inequality):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    @property
    def variables(self) -> tuple[UserSubset, ...]:
        return tuple(s for s, _ in self.coefficients)

    def coefficient(self, subset: UserSubset) -> Fraction:
        return dict(self.coefficients).get(subset, Fraction(0))

    def lhs(self, values: Mapping[UserSubset, Fraction | int]) -> Fraction:
        return sum(
            (c * Fraction(values.get(s, 0)) for s, c in self.coefficients), Fraction(0)
        )

    def evaluate(self, point: DofPoint) -> Fraction:
        return self.lhs(point.values)

    def holds(self, point: DofPoint) -> bool:
        return self.evaluate(point) <= self.rhs

    def relabel(self, mapping: Mapping[int, int]) -> Inequality:
        moved = {s.relabel(mapping): c for s, c in self.coefficients}
        return Inequality.make(self.K, moved, self.rhs, self.provenance)

    def substitute(self, fixes: Mapping[UserSubset, Fraction]) -> Inequality | None:
        """Moves fixed variables to the right-hand side; None when the row becomes vacuous."""
        rhs = self.rhs
        kept = {}
        for subset, c in self.coefficients:
            if subset in fixes:
                rhs -= c * fixes[subset]
            else:
                kept[subset] = c
        if not kept:
            if rhs < 0:
                raise EmptyRegionError(f"fixing variables makes {self} unsatisfiable")
            return None
        return Inequality.make(self.K, kept, rhs, self.provenance)

    def __str__(self) -> str:
        if not self.coefficients:
            return f"0 <= {format_rational(self.rhs)}"
        flip = all(c < 0 for _, c in self.coefficients)
        sign = -1 if flip else 1
        parts = []
        for subset, c in self.coefficients:
            c = c * sign
            magnitude = abs(c)
            term = subset.label if magnitude == 1 else f"{format_rational(magnitude)} {subset.label}"
            if not parts:
                parts.append(term if c > 0 else f"-{term}")
            else:
                parts.append(f"+ {term}" if c > 0 else f"- {term}")
        relation = ">=" if flip else "<="
        return f"{' '.join(parts)} {relation} {format_rational(self.rhs * sign)}"


@dataclass(frozen=True)
class Region:
    """A finite set of halfspaces over an ordered list of DoF variables."""

    K: int
    variables: tuple[UserSubset, ...]
    inequalities: tuple[Inequality, ...]

    def __post_init__(self):
        allowed = set(self.variables)
        for row in self.inequalities:
            if row.K != self.K:
                raise DimensionError(f"inequality for K={row.K} in a K={self.K} region")
            missing = [s.label for s in row.variables if s not in allowed]
            if missing:
                raise DimensionError(f"{row} uses variables outside the region: {missing}")

    def __len__(self) -> int:
        return len(self.inequalities)

    def __iter__(self):
        return iter(self.inequalities)

    @property
    def dimension(self) -> int:
        return len(self.variables)

    def constraint_set(self) -> frozenset[Inequality]:
        return frozenset(self.inequalities)

    def with_inequalities(self, rows: Iterable[Inequality]) -> Region:
        return Region(self.K, self.variables, tuple(rows))

    def extended(self, rows: Iterable[Inequality]) -> Region:
        return Region(self.K, self.variables, self.inequalities + tuple(rows))

    def deduplicated(self) -> Region:
        return self.with_inequalities(dedupe(self.inequalities))

    def substitute(self, fixes: Mapping[UserSubset, Fraction]) -> Region:
        """Fixes variables, drops them and the vacuous rows, keeps the tightest of parallel rows."""
        fixes = {s: Fraction(v) for s, v in fixes.items()}
        rows = []
        for row in self.inequalities:
            reduced = row.substitute(fixes)
            if reduced is not None:
                rows.append(reduced)
        variables = tuple(s for s in self.variables if s not in fixes)
        return Region(self.K, variables, tighten(dedupe(rows)))


def dedupe(rows: Iterable[Inequality]) -> tuple[Inequality, ...]:
    """Drops rows identical in canonical form, keeping first occurrences."""
    seen = set()
    kept = []
    for row in rows:
        if row.key not in seen:
            seen.add(row.key)
            kept.append(row)
    return tuple(kept)


def tighten(rows: Sequence[Inequality]) -> tuple[Inequality, ...]:
    """Among rows with the same normal direction keeps only the smallest right-hand side."""
    best: dict[tuple, Inequality] = {}
    order: list[tuple] = []
    for row in rows:
        direction = row.direction
        if direction not in best:
            order.append(direction)
            best[direction] = row
        elif row.key[2] < best[direction].key[2]:
            best[direction] = row
    return tuple(best[d] for d in order)


def _check_params(K: int, K_P: int) -> None:
    if not isinstance(K, int) or not 1 <= K <= MAX_USERS:
        raise ParameterError(f"user count must be in 1..{MAX_USERS}, got {K!r}")
    if not isinstance(K_P, int) or not 0 <= K_P <= K:
        raise ParameterError(f"perfect-CSIT user count must be in 0..{K}, got {K_P!r}")


def _submasks_containing(allowed: int, bit: int) -> Iterable[int]:
    sub = allowed
    while sub:
        if sub & bit:
            yield sub
        sub = (sub - 1) & allowed


def _chain_inequality(
    K: int, ep_order: Sequence[int], ed_order: Sequence[int], provenance: Provenance
) -> Inequality:
    """One bound for the degraded chain ep_order[0] -> ... -> ed_order[-1]."""
    coefficients: dict[UserSubset, Fraction] = {}
    kp, kd = len(ep_order), len(ed_order)
    ep_mask = UserSubset.of(*ep_order).mask
    ed_mask = UserSubset.of(*ed_order).mask

    for i in range(1, kp + 1):
        weight = Fraction(1, kp + kd - i + 1)
        later = UserSubset.of(*ep_order[i:]).mask
        bit = 1 << (ep_order[i - 1] - 1)
        for sub in _submasks_containing(ep_mask & ~later, bit):
            coefficients[UserSubset(sub)] = weight

    for i in range(1, kd + 1):
        weight = Fraction(1, kd - i + 1)
        later = UserSubset.of(*ed_order[i:]).mask
        bit = 1 << (ed_order[i - 1] - 1)
        for sub in _submasks_containing((ep_mask | ed_mask) & ~later, bit):
            coefficients[UserSubset(sub)] = weight

    return Inequality.make(K, coefficients, 1, provenance)


def _delayed_subsets(K: int, K_P: int) -> list[UserSubset]:
    delayed = [u for u in range(K_P + 1, K + 1)]
    subsets = [
        UserSubset.of(*combo)
        for size in range(1, len(delayed) + 1)
        for combo in itertools.combinations(delayed, size)
    ]
    return sorted(subsets, key=UserSubset.sort_key)


def theorem1_inequalities(K: int, K_P: int) -> list[Inequality]:
    """All outer-bound rows for (K, K_P), deduplicated in canonical form, in a fixed order."""
    _check_params(K, K_P)
    if K_P == K:
        return []

    count = sum(
        math.factorial(K_P) * math.factorial(ed.size) for ed in _delayed_subsets(K, K_P)
    )
    if count > LARGE_ENUMERATION:
        logger.warning("enumerating %d orderings for K=%d, K_P=%d", count, K, K_P)

    rows = []
    ep = tuple(range(1, K_P + 1))
    for ed in _delayed_subsets(K, K_P):
        for pi_p in itertools.permutations(ep):
            for pi_d in itertools.permutations(ed.members):
                rows.append(
                    _chain_inequality(K, pi_p, pi_d, Theorem1Provenance(ed, pi_p, pi_d))
                )
    unique = list(dedupe(rows))
    logger.debug("K=%d K_P=%d: %d orderings, %d distinct rows", K, K_P, len(rows), len(unique))
    return unique


def companion_bounds(K: int, K_P: int) -> list[Inequality]:
    """Rows built from a proper subset of the instantaneous users; all implied by theorem1_inequalities."""
    _check_params(K, K_P)
    rows = []
    ep_all = tuple(range(1, K_P + 1))
    for size in range(0, K_P):
        for ep in itertools.combinations(ep_all, size):
            ep_subset = UserSubset.of(*ep)
            for ed in _delayed_subsets(K, K_P):
                for pi_p in itertools.permutations(ep):
                    for pi_d in itertools.permutations(ed.members):
                        provenance = CompanionProvenance(ep_subset, ed, pi_p, pi_d)
                        rows.append(_chain_inequality(K, pi_p, pi_d, provenance))
    return list(dedupe(rows))


def box_inequalities(K: int) -> list[Inequality]:
    return [Inequality.make(K, {s: 1}, 1, BoxProvenance(s)) for s in canonical_subsets(K)]


def nonneg_inequalities(K: int) -> list[Inequality]:
    return [Inequality.make(K, {s: -1}, 0, NonnegProvenance(s)) for s in canonical_subsets(K)]


def full_region(K: int, K_P: int) -> Region:
    """Theorem-1 rows plus 0 <= d_S <= 1 for every nonempty S."""
    rows = theorem1_inequalities(K, K_P) + box_inequalities(K) + nonneg_inequalities(K)
    return Region(K, canonical_subsets(K), dedupe(rows))


def restrict_private(region: Region) -> Region:
    """Sets every common-message DoF (|S| >= 2) to zero and drops those variables."""
    fixes = {s: Fraction(0) for s in region.variables if s.size >= 2}
    if not fixes:
        return region
    return region.substitute(fixes)


def private_region(K: int, K_P: int) -> Region:
    return restrict_private(full_region(K, K_P))


def region_to_csv(region: Region) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([s.label for s in region.variables] + ["rhs", "provenance"])
    for row in region.inequalities:
        writer.writerow(
            [format_rational(row.coefficient(s)) for s in region.variables]
            + [format_rational(row.rhs), str(row.provenance)]
        )
    return buffer.getvalue()


def region_from_csv(text: str, K: int | None = None) -> Region:
    """Reads the layout written by region_to_csv; provenance text is kept verbatim."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParameterError("empty region CSV") from None
    if header[-2:] != ["rhs", "provenance"]:
        raise ParameterError("region CSV must end with rhs,provenance columns")
    variables = tuple(UserSubset.from_label(label) for label in header[:-2])
    needed = max((max(s.members) for s in variables), default=1)
    K = K or needed
    if needed > K:
        raise DimensionError(f"CSV uses user {needed} but K={K}")
    rows = []
    for record in reader:
        if not record:
            continue
        if len(record) != len(header):
            raise ParameterError(f"CSV row has {len(record)} fields, expected {len(header)}")
        coefficients = {
            s: parse_rational(value) for s, value in zip(variables, record[:-2])
        }
        rows.append(
            Inequality.make(K, coefficients, parse_rational(record[-2]), ManualProvenance(record[-1]))
        )
    return Region(K, variables, tuple(rows))
