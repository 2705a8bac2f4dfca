"""Small linear programs in exact rational arithmetic.

Only the form needed here is supported:

    maximize c'x  subject to  G x <= h,  x >= 0,  with h >= 0,

so the slack basis at the origin is feasible and a single phase suffices.
Bland's rule prevents cycling on the (very) degenerate facial-set LPs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


class Unbounded(Exception):
    pass


@dataclass
class LPResult:
    value: Fraction
    x: list[Fraction]
    pivots: int


def simplex_max(c: Sequence, G: Sequence[Sequence], h: Sequence, max_pivots: int = 100_000) -> LPResult:
    n = len(c)
    m = len(G)
    if any(Fraction(v) < 0 for v in h):
        raise ValueError("right-hand side must be nonnegative")
    # tableau rows: [G | I | h]; objective row holds reduced costs -c
    T = []
    for i in range(m):
        row = [Fraction(v) for v in G[i]] + [Fraction(int(i == k)) for k in range(m)] + [Fraction(h[i])]
        T.append(row)
    z = [-Fraction(v) for v in c] + [Fraction(0)] * m + [Fraction(0)]
    basis = list(range(n, n + m))
    width = n + m
    pivots = 0
    while True:
        enter = next((j for j in range(width) if z[j] < 0), None)
        if enter is None:
            break
        best = None
        leave = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            raise Unbounded()
        prow = T[leave]
        pv = prow[enter]
        if pv != 1:
            prow = [x / pv for x in prow]
            T[leave] = prow
        for i in range(m):
            if i != leave:
                f = T[i][enter]
                if f != 0:
                    T[i] = [a - f * b for a, b in zip(T[i], prow)]
        f = z[enter]
        z = [a - f * b for a, b in zip(z, prow)]
        basis[leave] = enter
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("simplex pivot limit reached")
    x = [Fraction(0)] * width
    for i, b in enumerate(basis):
        x[b] = T[i][-1]
    return LPResult(z[-1], x[:n], pivots)
