"""
Exact Gauss-Jordan elimination over the rationals.

Matrices are lists of rows; entries are converted to Fraction on entry so the
results never depend on the caller's number type.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Matrix = list[list[Fraction]]


def _clone(rows: Sequence[Sequence]) -> Matrix:
    return [[Fraction(x) for x in row] for row in rows]


def rref(rows: Sequence[Sequence], ncols: int | None = None) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and the pivot column of each nonzero row."""
    mat = _clone(rows)
    if not mat:
        return mat, []
    ncols = len(mat[0]) if ncols is None else ncols
    pivots: list[int] = []
    r = 0
    for col in range(ncols):
        pivot_row = next((i for i in range(r, len(mat)) if mat[i][col] != 0), None)
        if pivot_row is None:
            continue
        mat[r], mat[pivot_row] = mat[pivot_row], mat[r]
        factor = mat[r][col]
        mat[r] = [x / factor for x in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][col] != 0:
                f = mat[i][col]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[r])]
        pivots.append(col)
        r += 1
        if r == len(mat):
            break
    return mat, pivots


def rank(rows: Sequence[Sequence]) -> int:
    if not rows or not len(rows[0]):
        return 0
    return len(rref(rows)[1])


def solve(A: Sequence[Sequence], b: Sequence) -> list[Fraction] | None:
    """Unique solution of the square system A x = b, or None when A is singular."""
    n = len(A)
    augmented = [list(row) + [rhs] for row, rhs in zip(A, b)]
    mat, pivots = rref(augmented, ncols=n)
    if len(pivots) < n:
        return None
    return [mat[i][n] for i in range(n)]


def null_space(rows: Sequence[Sequence], ncols: int) -> Matrix:
    """Basis of {x : rows @ x = 0}, one basis vector per returned row."""
    if not rows:
        return [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
    mat, pivots = rref(rows, ncols=ncols)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        vector = [Fraction(0)] * ncols
        vector[f] = Fraction(1)
        for i, p in enumerate(pivots):
            vector[p] = -mat[i][f]
        basis.append(vector)
    return basis
