"""Exact linear algebra over the rationals.

Matrices are plain lists of rows.  Entries may be ``int`` or ``Fraction``;
results are always ``Fraction`` (or ``int`` for the integer helpers).
"""

from __future__ import annotations

from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Sequence

Matrix = list[list[Fraction]]


def to_fractions(rows: Sequence[Sequence]) -> Matrix:
    return [[Fraction(x) for x in row] for row in rows]


def rref(rows: Sequence[Sequence]) -> tuple[Matrix, list[int]]:
    """Reduced row echelon form and the list of pivot columns."""
    m = to_fractions(rows)
    if not m:
        return m, []
    n_rows, n_cols = len(m), len(m[0])
    pivots: list[int] = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        piv = next((i for i in range(r, n_rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        lead = m[r][c]
        if lead != 1:
            m[r] = [x / lead for x in m[r]]
        for i in range(n_rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    return m, pivots


def rank(rows: Sequence[Sequence]) -> int:
    if not rows:
        return 0
    return len(rref(rows)[1])


def nullspace(rows: Sequence[Sequence], n_cols: int | None = None) -> Matrix:
    """Basis of {x : M x = 0}, one vector per free column of the RREF."""
    if not rows:
        if n_cols is None:
            raise ValueError("n_cols is required for an empty matrix")
        return [[Fraction(int(i == j)) for j in range(n_cols)] for i in range(n_cols)]
    n_cols = len(rows[0])
    r, pivots = rref(rows)
    free = [c for c in range(n_cols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * n_cols
        v[f] = Fraction(1)
        for i, p in enumerate(pivots):
            v[p] = -r[i][f]
        basis.append(v)
    return basis


def primitive(vec: Sequence) -> list[int]:
    """Scale a rational vector to the integer vector with coprime entries.

    The sign is preserved.  The zero vector maps to itself.
    """
    fr = [Fraction(x) for x in vec]
    den = reduce(lambda a, b: a * b // gcd(a, b), (x.denominator for x in fr), 1)
    ints = [int(x * den) for x in fr]
    g = reduce(gcd, (abs(x) for x in ints), 0)
    if g == 0:
        return ints
    return [x // g for x in ints]


def in_row_space(vec: Sequence, rows: Sequence[Sequence]) -> bool:
    if not rows:
        return all(x == 0 for x in vec)
    return rank(list(rows) + [list(vec)]) == rank(rows)


def same_row_space(a: Sequence[Sequence], b: Sequence[Sequence]) -> bool:
    ra = rank(a)
    return ra == rank(b) and rank(list(a) + list(b)) == ra


def solve_left(rows: Sequence[Sequence], target: Sequence) -> list[Fraction] | None:
    """Find x with x^T M = target^T, or None if the system is inconsistent."""
    # transpose: M^T x = target
    mt = [list(col) for col in zip(*rows)]
    aug = [row + [Fraction(t)] for row, t in zip(to_fractions(mt), target)]
    r, pivots = rref(aug)
    n = len(rows)
    if n in pivots:
        return None
    x = [Fraction(0)] * n
    for i, p in enumerate(pivots):
        x[p] = r[i][n]
    return x


def independent_rows(rows: Sequence[Sequence], start: Sequence[Sequence] = ()) -> list[int]:
    """Greedy scan: indices of rows that raise the rank, in order."""
    kept: list = [list(v) for v in start]
    base = rank(kept) if kept else 0
    out = []
    for i, row in enumerate(rows):
        trial = kept + [list(row)]
        rk = rank(trial)
        if rk > base:
            kept = trial
            base = rk
            out.append(i)
    return out
