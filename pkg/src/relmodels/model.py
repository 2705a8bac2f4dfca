"""Relational model matrices, kernel bases and generalized odds ratios."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _rational as rat
from .errors import (
    NonBinaryEntry,
    NonPositiveProbability,
    NotInModel,
    RankDeficient,
    ZeroColumn,
    ModelValidationError,
)

MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True)
class SampleSpace:
    cells: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(str(c) for c in self.cells))
        if len(self.cells) < 2:
            raise ModelValidationError("a sample space needs at least two cells")
        if len(set(self.cells)) != len(self.cells):
            raise ModelValidationError("cell labels must be unique")

    @property
    def size(self) -> int:
        return len(self.cells)

    def __len__(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class ModelMatrix:
    """A validated J x I 0-1 model matrix of full row rank.

    Construct through :func:`validate_model`; the constructor itself does
    not check the invariants.
    """

    entries: tuple[tuple[int, ...], ...]
    space: SampleSpace
    name: str = ""
    description: str = ""

    @property
    def J(self) -> int:
        return len(self.entries)

    @property
    def I(self) -> int:
        return len(self.entries[0])

    @property
    def K(self) -> int:
        return self.I - self.J

    @property
    def cells(self) -> tuple[str, ...]:
        return self.space.cells

    @property
    def is_saturated(self) -> bool:
        return self.K == 0

    @cached_property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)

    @cached_property
    def has_overall_effect(self) -> bool:
        return has_overall_effect(self)

    @cached_property
    def kernel(self) -> "KernelBasis":
        return kernel_basis(self)

    def rows(self) -> list[list[int]]:
        return [list(r) for r in self.entries]

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<ModelMatrix{label} J={self.J} I={self.I}>"


def validate_model(entries: Sequence[Sequence], labels: Sequence[str] | None = None,
                   name: str = "", description: str = "") -> ModelMatrix:
    """Check a candidate model matrix and wrap it.

    Raises
    ------
    NonBinaryEntry, ZeroColumn, RankDeficient
        When the corresponding invariant is violated.
    """
    rows = [list(r) for r in entries]
    if not rows or not rows[0]:
        raise ModelValidationError("model matrix is empty")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ModelValidationError("model matrix rows have different lengths")
    if labels is None:
        labels = [str(i + 1) for i in range(width)]
    if len(labels) != width:
        raise ModelValidationError(f"{len(labels)} labels given for {width} columns")
    clean = []
    for i, row in enumerate(rows):
        out = []
        for j, v in enumerate(row):
            if v not in (0, 1):
                raise NonBinaryEntry(i, j, v)
            out.append(int(v))
        clean.append(tuple(out))
    rk = rat.rank(clean)
    if rk != len(clean):
        raise RankDeficient(rk, len(clean))
    for j in range(width):
        if not any(row[j] for row in clean):
            raise ZeroColumn(j)
    return ModelMatrix(tuple(clean), SampleSpace(tuple(labels)), name, description)


def has_overall_effect(model: ModelMatrix) -> bool:
    """True iff the all-ones row lies in the row space of the model matrix."""
    return rat.in_row_space([1] * model.I, model.entries)


@dataclass(frozen=True)
class KernelBasis:
    """Integer basis of Ker(A), one row per generalized odds ratio.

    In canonical form for a model without the overall effect, the first
    row is the only one with a nonzero sum; ``row_sums[0]`` is then negative
    (-1 whenever a unimodular reduction reaches it).
    """

    rows: tuple[tuple[int, ...], ...]
    canonical: bool = True
    n_cells: int = 0

    @property
    def K(self) -> int:
        return len(self.rows)

    @property
    def row_sums(self) -> tuple[int, ...]:
        return tuple(sum(r) for r in self.rows)

    @property
    def nonhomogeneous_sum(self) -> int | None:
        """d_1'1 of the non-homogeneous row, or None if all rows are homogeneous."""
        nz = [s for s in self.row_sums if s != 0]
        return nz[0] if nz else None

    @cached_property
    def array(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, self.n_cells))
        return np.array(self.rows, dtype=float)


def _reduce_row_sums(rows: list[list[int]]) -> list[list[int]]:
    """Unimodular row operations leaving at most one row with nonzero sum.

    Euclid's algorithm on the row sums: the row with the smallest nonzero
    |sum| (lowest index on ties) reduces all the others, until only one
    nonzero sum remains.  That row is moved to the front.
    """
    rows = [list(r) for r in rows]
    while True:
        nz = [i for i, r in enumerate(rows) if sum(r) != 0]
        if len(nz) <= 1:
            break
        piv = min(nz, key=lambda i: (abs(sum(rows[i])), i))
        sp = sum(rows[piv])
        for i in nz:
            if i == piv:
                continue
            k = sum(rows[i]) // sp
            rows[i] = [a - k * b for a, b in zip(rows[i], rows[piv])]
    nz = [i for i, r in enumerate(rows) if sum(r) != 0]
    if nz:
        i = nz[0]
        d1 = rows.pop(i)
        if sum(d1) > 0:
            d1 = [-x for x in d1]
        rows.insert(0, d1)
    return [rat.primitive(r) for r in rows]


def kernel_basis(model: ModelMatrix) -> KernelBasis:
    """Canonical integer kernel basis of the model matrix.

    Exact rational elimination gives one primitive integer vector per free
    column.  For a model without the overall effect the row sums are then
    reduced so that only the first row is non-homogeneous.
    """
    raw = [rat.primitive(v) for v in rat.nullspace(model.entries)]
    rows = _reduce_row_sums(raw) if raw else []
    return KernelBasis(tuple(tuple(r) for r in rows), True, model.I)


def basis_from_rows(rows: Sequence[Sequence[int]], n_cells: int, canonical: bool = True) -> KernelBasis:
    rows = [list(map(int, r)) for r in rows]
    if canonical and rows:
        rows = _reduce_row_sums(rows)
    return KernelBasis(tuple(tuple(r) for r in rows), canonical, n_cells)


@dataclass(frozen=True)
class OddsRatioSpec:
    """p^plus / p^minus = 1 for one kernel vector d = plus - minus."""

    plus: tuple[int, ...]
    minus: tuple[int, ...]

    @property
    def homogeneous(self) -> bool:
        return sum(self.plus) == sum(self.minus)

    @property
    def vector(self) -> tuple[int, ...]:
        return tuple(a - b for a, b in zip(self.plus, self.minus))

    def ratio(self, p) -> float:
        p = np.asarray(p, dtype=float)
        return float(np.prod(p ** np.array(self.plus)) / np.prod(p ** np.array(self.minus)))

    def log_ratio(self, p) -> float:
        return float(np.dot(self.vector, np.log(np.asarray(p, dtype=float))))

    def difference(self, p) -> float:
        """Cross-product difference p^plus - p^minus."""
        p = np.asarray(p, dtype=float)
        return float(np.prod(p ** np.array(self.plus)) - np.prod(p ** np.array(self.minus)))

    def format(self, cells: Sequence[str] | None = None) -> str:
        def mono(exps):
            parts = []
            for i, e in enumerate(exps):
                if e:
                    name = f"p[{cells[i]}]" if cells else f"p{i + 1}"
                    parts.append(name if e == 1 else f"{name}^{e}")
            return "*".join(parts) or "1"

        den = mono(self.minus)
        if "*" in den:
            den = f"({den})"
        return f"{mono(self.plus)} / {den}"


def odds_ratio_specs(basis: KernelBasis) -> list[OddsRatioSpec]:
    specs = []
    for row in basis.rows:
        specs.append(OddsRatioSpec(tuple(max(x, 0) for x in row), tuple(max(-x, 0) for x in row)))
    return specs


def _as_positive(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise NonPositiveProbability("all probabilities must be strictly positive")
    return p


def membership_residuals(p, basis: KernelBasis) -> np.ndarray:
    """D log p; zero (within tolerance) iff p lies in the model."""
    lp = np.log(_as_positive(p))
    return basis.array @ lp


def is_member(p, basis: KernelBasis, tol: float = MEMBERSHIP_TOL) -> bool:
    res = membership_residuals(p, basis)
    return bool(res.size == 0 or np.max(np.abs(res)) <= tol)


@dataclass(frozen=True)
class LogLinearParams:
    theta: np.ndarray
    theta0: float | None
    residual: float


def log_linear_params(p, model: ModelMatrix, tol: float = MEMBERSHIP_TOL) -> LogLinearParams:
    """Solve log p = A' theta in the least-squares sense.

    When the model has the overall effect, ``theta0`` is the coefficient of
    the all-ones direction: the coefficient of an explicit all-ones row, or
    otherwise the coefficient in the basis made of 1' and the leading
    independent rows of A.
    """
    lp = np.log(_as_positive(p))
    A = model.array
    theta, *_ = np.linalg.lstsq(A.T, lp, rcond=None)
    resid = float(np.max(np.abs(A.T @ theta - lp)))
    if resid > tol:
        raise NotInModel(resid, tol)
    theta0 = None
    if model.has_overall_effect:
        ones = (1,) * model.I
        if ones in model.entries:
            theta0 = float(theta[model.entries.index(ones)])
        else:
            keep = rat.independent_rows(model.entries, start=[ones])
            B = np.vstack([np.ones(model.I), A[keep]])
            coef, *_ = np.linalg.lstsq(B.T, lp, rcond=None)
            theta0 = float(coef[0])
    return LogLinearParams(theta, theta0, resid)
