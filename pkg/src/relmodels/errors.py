"""Exception hierarchy for relmodels."""


class RelModelError(Exception):
    """Base class for all library errors."""


# --- model validation -------------------------------------------------------

class ModelValidationError(RelModelError, ValueError):
    pass


class NonBinaryEntry(ModelValidationError):
    def __init__(self, row: int, col: int, value):
        self.row, self.col, self.value = row, col, value
        super().__init__(f"entry ({row}, {col}) is {value!r}; only 0 and 1 are allowed")


class ZeroColumn(ModelValidationError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"column {index + 1} (index {index}) has no nonzero entry")


class RankDeficient(ModelValidationError):
    def __init__(self, rank: int, rows: int):
        self.rank, self.rows = rank, rows
        super().__init__(f"matrix has {rows} rows but rank {rank}")


# --- membership -------------------------------------------------------------

class NonPositiveProbability(RelModelError, ValueError):
    pass


class NotInModel(RelModelError):
    def __init__(self, residual: float, tol: float):
        self.residual, self.tol = residual, tol
        super().__init__(f"log p is not in the row space (residual {residual:.3g} > {tol:.3g})")


# --- transformations --------------------------------------------------------

class TransformError(RelModelError):
    pass


class AlreadyHasOverallEffect(TransformError):
    pass


class NoOverallEffect(TransformError):
    pass


class NonBinaryReduction(TransformError):
    def __init__(self, rows):
        self.rows = rows
        super().__init__("no 0-1 representation of the remaining rows was found")


class NoNonHomogeneousConstraint(TransformError):
    pass


class DegreeGapNotOne(TransformError):
    def __init__(self, row_sum: int):
        self.row_sum = row_sum
        super().__init__(
            f"non-homogeneous kernel row has d'1 = {row_sum}; "
            "single-cell homogenization needs d'1 = -1"
        )


# --- fitting ----------------------------------------------------------------

class FitError(RelModelError):
    pass


class NoPositiveMLE(FitError):
    def __init__(self, facial_set=None):
        self.facial_set = facial_set
        msg = "the positive MLE does not exist"
        if facial_set is not None:
            msg += f" (support lies in facial set {sorted(facial_set)})"
        super().__init__(msg + "; use the extended fit")


class NoConvergence(FitError):
    pass


class InnerNoConvergence(NoConvergence):
    def __init__(self, sweeps: int, residual: float):
        self.sweeps, self.residual = sweeps, residual
        super().__init__(f"inner fit did not converge in {sweeps} sweeps (residual {residual:.3g})")


class OuterNoConvergence(NoConvergence):
    pass


class OuterNoBracket(NoConvergence):
    pass


class TargetOnBoundary(FitError):
    pass


class ZeroInData(FitError):
    pass


class InfeasiblePenalty(FitError):
    pass
