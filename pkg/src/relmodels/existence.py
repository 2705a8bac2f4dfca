"""MLE existence via facial sets of the cone generated by the model columns."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _rational as rat
from .lp import simplex_max
from .model import ModelMatrix

EXACT_MAX_CELLS = 64
FLOAT_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class ExistenceReport:
    """Outcome of the existence check.

    ``facial_set`` is a maximal proper face containing the support, found
    by growing the minimal one greedily in cell order; ``certificate`` is a
    vector c with c'a_i = 0 on it and c'a_i > 0 elsewhere.
    ``minimal_facial_set`` is the smallest face containing the support.
    """

    exists_positive: bool
    support: frozenset[int]
    facial_set: frozenset[int] | None = None
    certificate: tuple | None = None
    minimal_facial_set: frozenset[int] | None = None
    minimal_certificate: tuple | None = None
    exact: bool = True

    def to_dict(self, cells: Sequence[str] | None = None) -> dict:
        def idx(s):
            return None if s is None else sorted(s)

        def vec(c):
            return None if c is None else [_jsonable(x) for x in c]

        out = {
            "exists_positive": self.exists_positive,
            "support": idx(self.support),
            "facial_set": idx(self.facial_set),
            "certificate": vec(self.certificate),
            "minimal_facial_set": idx(self.minimal_facial_set),
            "minimal_certificate": vec(self.minimal_certificate),
            "exact": self.exact,
        }
        if cells is not None and self.facial_set is not None:
            out["facial_cells"] = [cells[i] for i in sorted(self.facial_set)]
        return out


def _jsonable(x):
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else str(x)
    return x


def _face_exact(columns: list[list[int]], support: Iterable[int]):
    """Minimal face containing ``support``; None if it is the whole cone."""
    support = sorted(set(support))
    I = len(columns)
    J = len(columns[0])
    rows = [columns[i] for i in support]
    N = rat.nullspace(rows) if rows else rat.nullspace([], n_cols=J)
    if not N:
        return None
    k = len(N)
    others = [i for i in range(I) if i not in set(support)]
    if not others:
        return None
    B = [[sum(n[j] * columns[i][j] for j in range(J)) for n in N] for i in others]
    m = len(others)
    # variables: y+ (k), y- (k), s (m)
    c = [0] * (2 * k) + [1] * m
    G, h = [], []
    for t, b in enumerate(B):
        row = [-x for x in b] + list(b) + [int(u == t) for u in range(m)]
        G.append(row)
        h.append(0)
    for t in range(m):
        G.append([0] * (2 * k) + [int(u == t) for u in range(m)])
        h.append(1)
    res = simplex_max(c, G, h)
    if res.value == 0:
        return None
    y = [res.x[l] - res.x[k + l] for l in range(k)]
    cert = [sum(y[l] * N[l][j] for l in range(k)) for j in range(J)]
    cert = [Fraction(v) for v in rat.primitive(cert)]
    values = [sum(cert[j] * columns[i][j] for j in range(J)) for i in range(I)]
    assert all(v >= 0 for v in values)
    face = frozenset(i for i, v in enumerate(values) if v == 0)
    return face, tuple(int(v) for v in cert)


def _face_float(columns: np.ndarray, support: Iterable[int]):
    from scipy.optimize import linprog

    support = sorted(set(support))
    I, J = columns.shape
    others = [i for i in range(I) if i not in set(support)]
    if not others:
        return None
    m = len(others)
    cost = np.concatenate([np.zeros(J), -np.ones(m)])
    A_ub = np.hstack([-columns[others], np.eye(m)])
    b_ub = np.zeros(m)
    A_eq = np.hstack([columns[support], np.zeros((len(support), m))]) if support else None
    b_eq = np.zeros(len(support)) if support else None
    bounds = [(None, None)] * J + [(0, 1)] * m
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0 or -res.fun <= FLOAT_FEAS_TOL:
        return None
    cert = res.x[:J]
    values = columns @ cert
    face = frozenset(int(i) for i in np.flatnonzero(np.abs(values) <= FLOAT_FEAS_TOL))
    return face, tuple(float(v) + 0.0 for v in cert)  # no -0.0


def minimal_face(model_or_columns, support: Iterable[int], exact: bool | None = None):
    """Smallest facial set containing ``support`` with its certificate, or None."""
    columns = _columns(model_or_columns)
    if exact is None:
        exact = len(columns) <= EXACT_MAX_CELLS
    if exact:
        return _face_exact(columns, support)
    return _face_float(np.array(columns, dtype=float), support)


def maximal_face(model_or_columns, support: Iterable[int], exact: bool | None = None,
                 start=None):
    """A maximal proper face containing ``support``, or None.

    ``start`` may pass an already computed minimal face and certificate.
    """
    columns = _columns(model_or_columns)
    found = start if start is not None else minimal_face(columns, support, exact)
    if found is None:
        return None
    face, cert = found
    for i in range(len(columns)):
        if i in face:
            continue
        bigger = minimal_face(columns, face | {i}, exact)
        if bigger is not None:
            face, cert = bigger
    return face, cert


def _columns(model_or_columns) -> list[list[int]]:
    if isinstance(model_or_columns, ModelMatrix):
        return [list(col) for col in zip(*model_or_columns.entries)]
    return [list(col) for col in model_or_columns]


def existence_check(model: ModelMatrix, counts, exact: bool | None = None) -> ExistenceReport:
    """Decide whether the positive MLE exists for the observed counts."""
    q = np.asarray(counts, dtype=float)
    support = frozenset(int(i) for i in np.flatnonzero(q > 0))
    if exact is None:
        exact = model.I <= EXACT_MAX_CELLS
    if len(support) == model.I:
        return ExistenceReport(True, support, exact=exact)
    columns = _columns(model)
    found = minimal_face(columns, support, exact)
    if found is None:
        return ExistenceReport(True, support, exact=exact)
    min_face, min_cert = found
    face, cert = maximal_face(columns, support, exact, start=found)
    return ExistenceReport(
        exists_positive=False,
        support=support,
        facial_set=face,
        certificate=cert,
        minimal_facial_set=min_face,
        minimal_certificate=min_cert,
        exact=exact,
    )
