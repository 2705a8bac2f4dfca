"""Relational models: discrete exponential families generated by 0-1 matrices."""

from .errors import (
    AlreadyHasOverallEffect,
    DegreeGapNotOne,
    FitError,
    InfeasiblePenalty,
    InnerNoConvergence,
    ModelValidationError,
    NoConvergence,
    NonBinaryEntry,
    NonBinaryReduction,
    NoNonHomogeneousConstraint,
    NonPositiveProbability,
    NoOverallEffect,
    NoPositiveMLE,
    NotInModel,
    OuterNoBracket,
    OuterNoConvergence,
    RankDeficient,
    RelModelError,
    TargetOnBoundary,
    TransformError,
    ZeroColumn,
    ZeroInData,
)
from .existence import ExistenceReport, existence_check, maximal_face, minimal_face
from .io import load_counts, load_model, save_model
from .mle import (
    MLEResult,
    Observed,
    Tolerances,
    fit,
    fit_extended,
    fit_gipf,
    fit_gipfm,
    gamma_range,
    inner_solve,
    kkt_residuals,
    loglik,
)
from .model import (
    KernelBasis,
    LogLinearParams,
    ModelMatrix,
    OddsRatioSpec,
    SampleSpace,
    has_overall_effect,
    is_member,
    kernel_basis,
    log_linear_params,
    membership_residuals,
    odds_ratio_specs,
    validate_model,
)
from .oracle import OracleResult, brute_force_mle
from .transform import (
    ReductionReport,
    add_overall,
    as_independence,
    homogenize,
    mutual_independence,
    remove_overall,
)

__version__ = "0.1.0"
