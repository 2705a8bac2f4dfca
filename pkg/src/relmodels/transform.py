"""Adding, removing and homogenizing the overall effect."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from . import _rational as rat
from .errors import (
    AlreadyHasOverallEffect,
    DegreeGapNotOne,
    NoNonHomogeneousConstraint,
    NonBinaryReduction,
    NoOverallEffect,
    TransformError,
)
from .model import KernelBasis, ModelMatrix, basis_from_rows, kernel_basis, validate_model


def add_overall(model: ModelMatrix) -> ModelMatrix:
    """Prepend the all-ones row.

    The result may be saturated (K = 0); check ``is_saturated``.
    """
    if model.has_overall_effect:
        raise AlreadyHasOverallEffect("the all-ones row is already in the row space")
    rows = [[1] * model.I] + model.rows()
    name = f"{model.name}-bar" if model.name else ""
    return validate_model(rows, model.cells, name=name)


@dataclass(frozen=True)
class ReductionReport:
    reduced: ModelMatrix
    removed_cells: frozenset[int]
    exposed: tuple[tuple[int, ...], ...]
    original_basis: KernelBasis
    reduced_basis: KernelBasis

    @property
    def removed_count(self) -> int:
        return len(self.removed_cells)

    @property
    def dimension_check(self) -> bool:
        """dim Ker(A1) == dim Ker(A1bar) - I0 + 1."""
        return self.reduced.K == self.original_basis.K - self.removed_count + 1


def expose_overall(model: ModelMatrix) -> list[list[int]]:
    """Row-equivalent 0-1 matrix whose first row is 1'.

    If 1' is a row it is moved to the front and the other rows are kept.
    Otherwise 1' is prepended and the original rows are scanned in order,
    keeping those that remain independent.
    """
    ones = [1] * model.I
    rows = model.rows()
    if ones in rows:
        rest = [r for r in rows if r != ones]
        return [ones] + rest
    if rat.solve_left(rows, ones) is None:
        raise NoOverallEffect("the all-ones row is not in the row space")
    keep = rat.independent_rows(rows, start=[ones])
    out = [ones] + [rows[i] for i in keep]
    if len(out) != model.J:
        raise NonBinaryReduction(out)
    return out


def remove_overall(model: ModelMatrix) -> ReductionReport:
    """Delete the overall effect and the cells that carried only it.

    The reduced kernel basis is derived from the original one: the removed
    columns are deleted and redundant rows dropped in row order.  When no
    cell is removed the original basis is one vector short, so the reduced
    basis is computed directly instead.
    """
    if not model.has_overall_effect:
        raise NoOverallEffect("model has no overall effect to remove")
    exposed = expose_overall(model)
    rest = exposed[1:]
    if not rest:
        raise TransformError("removing the overall effect leaves no parameters")
    removed = [j for j in range(model.I) if not any(r[j] for r in rest)]
    kept_cols = [j for j in range(model.I) if j not in removed]
    if len(kept_cols) < 2:
        raise TransformError("removing the overall effect leaves fewer than two cells")
    reduced_rows = [[r[j] for j in kept_cols] for r in rest]
    labels = [model.cells[j] for j in kept_cols]
    name = model.name.removesuffix("-bar") if model.name else ""
    reduced = validate_model(reduced_rows, labels, name=name)

    original = kernel_basis(model)
    if removed:
        cut = [[row[j] for j in kept_cols] for row in original.rows]
        keep = rat.independent_rows(cut)
        rows = [cut[i] for i in keep]
        reduced_basis = basis_from_rows(rows, reduced.I)
        expected = original.K - len(removed) + 1
        if reduced_basis.K != expected:
            raise TransformError(
                f"reduced basis has {reduced_basis.K} rows, expected {expected}"
            )
    else:
        reduced_basis = kernel_basis(reduced)
    return ReductionReport(
        reduced=reduced,
        removed_cells=frozenset(removed),
        exposed=tuple(tuple(r) for r in exposed),
        original_basis=original,
        reduced_basis=reduced_basis,
    )


def _zero_label(cells) -> str:
    lengths = {len(c) for c in cells}
    if len(lengths) == 1 and all(set(c) <= {"0", "1"} for c in cells):
        label = "0" * lengths.pop()
    else:
        label = "0"
    while label in cells:
        label = "_" + label
    return label


def homogenize(model: ModelMatrix) -> ModelMatrix:
    """Augment the sample space by a leading "no feature present" cell.

    Returns the (J+1) x (I+1) matrix [[1, 1'], [0, A]].
    """
    if model.has_overall_effect:
        raise NoNonHomogeneousConstraint("all generalized odds ratios are already homogeneous")
    gap = model.kernel.nonhomogeneous_sum
    if gap != -1:
        raise DegreeGapNotOne(gap)
    rows = [[1] * (model.I + 1)] + [[0] + list(r) for r in model.entries]
    labels = [_zero_label(model.cells)] + list(model.cells)
    name = f"{model.name}-homogenized" if model.name else ""
    return validate_model(rows, labels, name=name)


def binary_cells(T: int, include_zero: bool = False) -> list[tuple[int, ...]]:
    """Binary configurations of T features, ordered by number of features present.

    Within a level the order is reverse lexicographic, which reproduces
    100, 010, 001, 110, 101, 011, 111 for T = 3.
    """
    cells = [c for c in product((0, 1), repeat=T) if include_zero or any(c)]
    return sorted(cells, key=lambda c: (sum(c), tuple(-x for x in c)))


def as_independence(T: int) -> ModelMatrix:
    """Aitchison-Silvey independence of T binary features (no all-zero cell)."""
    cells = binary_cells(T)
    rows = [[c[t] for c in cells] for t in range(T)]
    return validate_model(rows, ["".join(map(str, c)) for c in cells], name=f"as{T}")


def mutual_independence(T: int) -> ModelMatrix:
    """Mutual independence of T binary features on the full table (effect coding)."""
    cells = binary_cells(T, include_zero=True)
    rows = [[1] * len(cells)] + [[c[t] for c in cells] for t in range(T)]
    return validate_model(rows, ["".join(map(str, c)) for c in cells], name=f"mi{T}")
