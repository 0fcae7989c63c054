"""
Exact queries on a Region: membership, slicing, linear optimization, vertex
enumeration, redundancy removal and the residual-demand (extension) test.

All arithmetic is over Fraction. The LP solver is a two-phase tableau simplex
with Bland's rule, so it terminates without tolerances.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from . import linalg
from .bounds import (
    Inequality,
    Region,
    dedupe,
    full_region,
    restrict_private,
    theorem1_inequalities,
)
from .core import DofPoint, UserSubset, format_rational, parse_rational, split_pairs
from .errors import (
    CapabilityError,
    DimensionError,
    EmptyRegionError,
    ParameterError,
    UnboundedError,
)

logger = logging.getLogger(__name__)

MAX_VERTEX_DIMENSION = 4
MAX_HYPERPLANE_SUBSETS = 10**6

VERTEX_LABEL = "outer-bound vertex, achievability unknown"


@dataclass(frozen=True)
class RowCheck:
    """One inequality evaluated at a point: lhs compared against bound."""

    inequality: Inequality
    lhs: Fraction
    bound: Fraction

    def to_dict(self) -> dict:
        return {
            "inequality": str(self.inequality),
            "lhs": format_rational(self.lhs),
            "bound": format_rational(self.bound),
            "provenance": str(self.inequality.provenance),
        }


@dataclass(frozen=True)
class MembershipVerdict:
    feasible: bool
    tight: tuple[RowCheck, ...]
    violated: tuple[RowCheck, ...]

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "tight": [row.to_dict() for row in self.tight],
            "violated": [row.to_dict() for row in self.violated],
        }


@dataclass(frozen=True)
class ResidualDemand:
    """Symbols still owed per message class, and the slots left to deliver them."""

    cardinalities: tuple[tuple[UserSubset, int], ...]
    slots: int

    def __post_init__(self):
        if self.slots < 0:
            raise ParameterError(f"slot budget must be nonnegative, got {self.slots}")
        for subset, count in self.cardinalities:
            if count < 0:
                raise ParameterError(f"negative demand for {subset.label}: {count}")

    @classmethod
    def of(cls, cardinalities: Mapping[UserSubset, int], slots: int) -> ResidualDemand:
        items = sorted(
            ((s, int(c)) for s, c in cardinalities.items() if c), key=lambda i: i[0].sort_key()
        )
        return cls(tuple(items), int(slots))

    @classmethod
    def parse(cls, text: str, slots: int) -> ResidualDemand:
        """Reads "d_1=3,d_12=1,d_13=1"."""
        counts: dict[UserSubset, int] = {}
        for label, value in split_pairs(text):
            count = parse_rational(value)
            if count.denominator != 1:
                raise ParameterError(f"demand must be an integer: {label}={value}")
            subset = UserSubset.from_label(label)
            counts[subset] = counts.get(subset, 0) + int(count)
        return cls.of(counts, slots)

    @property
    def values(self) -> dict[UserSubset, int]:
        return dict(self.cardinalities)


def _check_point(region: Region, point: DofPoint) -> dict[UserSubset, Fraction]:
    allowed = set(region.variables)
    outside = [s.label for s, v in point.items if s not in allowed]
    if outside:
        raise DimensionError(f"point sets variables the region does not have: {outside}")
    return point.values


def _evaluate(rows: Sequence[Inequality], values, bound=None) -> MembershipVerdict:
    tight, violated = [], []
    for row in rows:
        lhs = row.lhs(values)
        limit = row.rhs if bound is None else bound * row.rhs
        if lhs > limit:
            violated.append(RowCheck(row, lhs, limit))
        elif lhs == limit:
            tight.append(RowCheck(row, lhs, limit))
    return MembershipVerdict(not violated, tuple(tight), tuple(violated))


def contains(region: Region, point: DofPoint) -> MembershipVerdict:
    """Evaluates every row of the region at the point exactly."""
    return _evaluate(region.inequalities, _check_point(region, point))


def slice(region: Region, fixes: Mapping[UserSubset, Fraction | int]) -> Region:
    """Fixes some variables and returns the region over the remaining ones."""
    if not fixes:
        return region
    missing = [s.label for s in fixes if s not in set(region.variables)]
    if missing:
        raise DimensionError(f"cannot fix variables outside the region: {missing}")
    return region.substitute({s: Fraction(v) for s, v in fixes.items()})


def build_region(
    K: int, K_P: int, private: bool = False, fixes: Mapping[UserSubset, Fraction | int] | None = None
) -> Region:
    """full_region, optionally restricted to private messages and sliced."""
    region = full_region(K, K_P)
    if private:
        region = restrict_private(region)
    return slice(region, fixes or {})


def lift(point: DofPoint, fixes: Mapping[UserSubset, Fraction | int]) -> DofPoint:
    """Adds the fixed coordinates back onto a point of a sliced region."""
    values = dict(point.values)
    values.update({s: Fraction(v) for s, v in fixes.items()})
    return DofPoint(point.K, values)


# -- exact simplex ---------------------------------------------------------------


class _Tableau:
    """Rows of `A y <= b` with y >= 0; rows with negative b get a surplus and an artificial column."""

    def __init__(self, A: list[list[Fraction]], b: list[Fraction], n: int):
        m = len(A)
        self.n = n
        self.rows: list[list[Fraction]] = []
        self.rhs: list[Fraction] = []
        self.basis: list[int] = []
        artificial = [i for i in range(m) if b[i] < 0]
        self.width = n + m + len(artificial)
        self.artificial = set(range(n + m, self.width))
        next_artificial = n + m
        for i in range(m):
            row = [Fraction(0)] * self.width
            sign = -1 if b[i] < 0 else 1
            for j in range(n):
                row[j] = sign * A[i][j]
            row[n + i] = Fraction(sign)
            if sign < 0:
                row[next_artificial] = Fraction(1)
                self.basis.append(next_artificial)
                next_artificial += 1
            else:
                self.basis.append(n + i)
            self.rows.append(row)
            self.rhs.append(sign * b[i])
        self.pivots = 0

    def pivot(self, i: int, j: int) -> None:
        factor = self.rows[i][j]
        self.rows[i] = [x / factor for x in self.rows[i]]
        self.rhs[i] /= factor
        for k in range(len(self.rows)):
            f = self.rows[k][j]
            if k != i and f != 0:
                self.rows[k] = [x - f * y for x, y in zip(self.rows[k], self.rows[i])]
                self.rhs[k] -= f * self.rhs[i]
        self.basis[i] = j
        self.pivots += 1

    def optimize(self, cost: Sequence[Fraction], allowed: Sequence[int]) -> None:
        """Maximizes cost . y over the allowed columns with Bland's rule."""
        while True:
            reduced = {
                j: cost[j] - sum(cost[self.basis[i]] * self.rows[i][j] for i in range(len(self.rows)))
                for j in allowed
            }
            entering = next((j for j in sorted(allowed) if reduced[j] > 0), None)
            if entering is None:
                return
            candidates = [
                (self.rhs[i] / self.rows[i][entering], self.basis[i], i)
                for i in range(len(self.rows))
                if self.rows[i][entering] > 0
            ]
            if not candidates:
                raise UnboundedError("objective is unbounded over the region")
            _, _, leaving = min(candidates)
            self.pivot(leaving, entering)

    def value(self, cost: Sequence[Fraction]) -> Fraction:
        return sum((cost[self.basis[i]] * self.rhs[i] for i in range(len(self.rows))), Fraction(0))

    def solution(self) -> list[Fraction]:
        y = [Fraction(0)] * self.n
        for i, column in enumerate(self.basis):
            if column < self.n:
                y[column] = self.rhs[i]
        return y

    def drop_artificials(self) -> None:
        """Pivots zero-level artificials out of the basis, dropping rows that are linear duplicates."""
        i = 0
        while i < len(self.rows):
            if self.basis[i] in self.artificial:
                column = next(
                    (j for j in range(self.width) if j not in self.artificial and self.rows[i][j] != 0),
                    None,
                )
                if column is None:
                    del self.rows[i], self.rhs[i], self.basis[i]
                    continue
                self.pivot(i, column)
            i += 1


def _solve_lp(
    A: list[list[Fraction]], b: list[Fraction], c: list[Fraction], signed: Sequence[bool]
) -> tuple[Fraction, list[Fraction]]:
    """max c.x s.t. A x <= b; x_j >= 0 when signed[j], free otherwise."""
    n = len(c)
    columns: list[tuple[int, int]] = []
    for j in range(n):
        columns.append((j, 1))
        if not signed[j]:
            columns.append((j, -1))
    split_A = [[s * row[j] for j, s in columns] for row in A]
    split_c = [s * c[j] for j, s in columns]

    tableau = _Tableau(split_A, list(b), len(columns))
    width = len(columns)
    if tableau.artificial:
        phase1 = [Fraction(-1) if j in tableau.artificial else Fraction(0) for j in range(tableau.width)]
        tableau.optimize(phase1, range(tableau.width))
        if tableau.value(phase1) < 0:
            raise EmptyRegionError("the constraints have no feasible point")
        tableau.drop_artificials()
    cost = split_c + [Fraction(0)] * (tableau.width - width)
    allowed = [j for j in range(tableau.width) if j not in tableau.artificial]
    tableau.optimize(cost, allowed)
    y = tableau.solution()
    x = [Fraction(0)] * n
    for (j, s), value in zip(columns, y):
        x[j] += s * value
    logger.debug("LP with %d rows, %d columns solved in %d pivots", len(A), width, tableau.pivots)
    return tableau.value(cost), x


def _system(rows: Sequence[Inequality], variables: Sequence[UserSubset]):
    A = [[row.coefficient(s) for s in variables] for row in rows]
    b = [row.rhs for row in rows]
    signed = [
        any(r.variables == (s,) and r.coefficients[0][1] < 0 and r.rhs <= 0 for r in rows) for s in variables
    ]
    return A, b, signed


def _weights_vector(region: Region, weights: Mapping[UserSubset, Fraction | int]) -> list[Fraction]:
    allowed = set(region.variables)
    outside = [s.label for s in weights if s not in allowed]
    if outside:
        raise DimensionError(f"weights name variables the region does not have: {outside}")
    return [Fraction(weights.get(s, 0)) for s in region.variables]


def optimum(region: Region, weights: Mapping[UserSubset, Fraction | int]) -> Fraction:
    c = _weights_vector(region, weights)
    A, b, signed = _system(region.inequalities, region.variables)
    return _solve_lp(A, b, c, signed)[0]


def maximize(region: Region, weights: Mapping[UserSubset, Fraction | int]) -> tuple[Fraction, DofPoint]:
    """Exact optimum and the lexicographically smallest optimal point (a vertex)."""
    c = _weights_vector(region, weights)
    A, b, signed = _system(region.inequalities, region.variables)
    value, _ = _solve_lp(A, b, c, signed)

    # lexicographic tie-break: keep the optimum, then push each coordinate down in turn
    A.append([-x for x in c])
    b.append(-value)
    n = len(region.variables)
    point: list[Fraction] = []
    for k in range(n):
        objective = [Fraction(-int(j == k)) for j in range(n)]
        lowest, _ = _solve_lp(A, b, objective, signed)
        point.append(-lowest)
        unit = [Fraction(int(j == k)) for j in range(n)]
        A += [unit, [-x for x in unit]]
        b += [-lowest, lowest]
    return value, DofPoint.from_values(region.K, region.variables, point)


def sum_dof(region: Region) -> tuple[Fraction, DofPoint]:
    return maximize(region, {s: 1 for s in region.variables})


def vertices(region: Region) -> list[DofPoint]:
    """All extreme points, by intersecting every dim-sized set of constraint hyperplanes."""
    dim = region.dimension
    rows = region.inequalities
    if dim > MAX_VERTEX_DIMENSION:
        raise CapabilityError(
            f"vertex enumeration supports at most {MAX_VERTEX_DIMENSION} free variables, region has {dim}"
        )
    combos = math.comb(len(rows), dim)
    if combos > MAX_HYPERPLANE_SUBSETS:
        raise CapabilityError(f"{combos} hyperplane subsets exceed the budget of {MAX_HYPERPLANE_SUBSETS}")

    A, b, _ = _system(rows, region.variables)
    found: set[tuple[Fraction, ...]] = set()
    for chosen in itertools.combinations(range(len(rows)), dim):
        x = linalg.solve([A[i] for i in chosen], [b[i] for i in chosen])
        if x is None:
            continue
        if all(sum((a * v for a, v in zip(A[i], x)), Fraction(0)) <= b[i] for i in range(len(rows))):
            found.add(tuple(x))
    logger.debug("%d hyperplane subsets, %d vertices", combos, len(found))
    return [DofPoint.from_values(region.K, region.variables, x) for x in sorted(found)]


def extension_feasibility(K: int, K_P: int, demand: ResidualDemand) -> MembershipVerdict:
    """Checks leftover integer demand against the outer bound scaled to the slot budget."""
    outside = [s.label for s, _ in demand.cardinalities if not s.fits(K)]
    if outside:
        raise DimensionError(f"demand names users beyond K={K}: {outside}")
    values = {s: Fraction(c) for s, c in demand.cardinalities}
    return _evaluate(theorem1_inequalities(K, K_P), values, bound=Fraction(demand.slots))


def remove_redundant(region: Region) -> Region:
    """Drops rows implied by the others, one at a time, by maximizing each row's left side."""
    kept = list(dedupe(region.inequalities))
    for row in list(kept):
        others = [r for r in kept if r is not row]
        if not others:
            continue
        A, b, signed = _system(others, region.variables)
        try:
            best, _ = _solve_lp(A, b, [row.coefficient(s) for s in region.variables], signed)
        except UnboundedError:
            continue
        if best <= row.rhs:
            kept = others
    logger.debug("redundancy removal kept %d of %d rows", len(kept), len(region))
    return region.with_inequalities(kept)


def classify_point(region: Region, point: DofPoint) -> str:
    """One of "interior", "boundary", VERTEX_LABEL or "outside"."""
    verdict = contains(region, point)
    if not verdict.feasible:
        return "outside"
    if not verdict.tight:
        return "interior"
    normals = [[check.inequality.coefficient(s) for s in region.variables] for check in verdict.tight]
    if linalg.rank(normals) == region.dimension:
        return VERTEX_LABEL
    return "boundary"
