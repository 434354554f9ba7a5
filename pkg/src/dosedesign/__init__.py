"""Optimal experimental designs for dose-response studies with shared parameters.

Several groups (say, administration routes or populations) are modelled by
regression functions that share some parameters; the package computes
locally D-optimal and compound (model-robust) approximate designs for the
joint study, certifies optimality through the equivalence theorem, and
rounds approximate designs to integer sample sizes.
"""

from .closed_form import (
    ClosedFormDomainError,
    EmaxGlobalCheck,
    MinSupportedResult,
    SupportBound,
    emax_global_check,
    emax_global_check_for,
    interior_support_dose,
    min_supported_optimal,
    shared_location_optimal,
    support_bound,
    unit_interior_point,
    variance_ratio_threshold,
)
from .designs import (
    CompoundCriterion,
    Design,
    GroupDesign,
    apportion,
    d_efficiency,
    group_information,
    information_matrix,
    log_det_information,
    logdet_psd,
    shift_placebo,
)
from .models import (
    DoseRangeError,
    Family,
    ModelSpec,
    Sharing,
    eval_mean,
    gradient,
    gradient_profile,
    power_transform,
    rescale_to_unit,
)
from .optimize import (
    OptimizationFailure,
    OptimizationResult,
    OptimizerSettings,
    RankDeficiencyError,
    WeightResult,
    build_compound,
    maximize,
    solve_locally_d,
    weight_optimize,
)
from .verify import (
    OptimalityCertificate,
    VerifySettings,
    certify_compound,
    certify_d,
    compound_sensitivity_profile,
    sensitivity_profile,
    weighted_support_sensitivity,
)

__version__ = "0.1.0"

__all__ = [
    "ClosedFormDomainError",
    "CompoundCriterion",
    "Design",
    "DoseRangeError",
    "EmaxGlobalCheck",
    "Family",
    "GroupDesign",
    "MinSupportedResult",
    "ModelSpec",
    "OptimalityCertificate",
    "OptimizationFailure",
    "OptimizationResult",
    "OptimizerSettings",
    "RankDeficiencyError",
    "Sharing",
    "SupportBound",
    "VerifySettings",
    "WeightResult",
    "apportion",
    "build_compound",
    "certify_compound",
    "certify_d",
    "compound_sensitivity_profile",
    "d_efficiency",
    "emax_global_check",
    "emax_global_check_for",
    "eval_mean",
    "gradient",
    "gradient_profile",
    "group_information",
    "information_matrix",
    "interior_support_dose",
    "log_det_information",
    "logdet_psd",
    "maximize",
    "min_supported_optimal",
    "power_transform",
    "rescale_to_unit",
    "sensitivity_profile",
    "shared_location_optimal",
    "shift_placebo",
    "solve_locally_d",
    "support_bound",
    "unit_interior_point",
    "variance_ratio_threshold",
    "weight_optimize",
    "weighted_support_sensitivity",
]
