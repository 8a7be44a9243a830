"""pjinv: regularity indices and certified inversion for nonsmooth mappings.

Analyzes continuous (possibly non-locally-Lipschitz) square mappings through
pseudo-Jacobian matrix sets: co-norm regularity indices, Hadamard-type
integral certificates for global invertibility, and inverse computation by
certified path lifting.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .dini import DiniEstimate, PathSample, dini_lower, dini_upper, mvi_audit, path_length
from .errors import (
    DomainError,
    EvaluationError,
    InvalidInputError,
    LocalSolveFailureError,
    MappingSyntaxError,
    NonConvergenceError,
    NotCertifyingError,
    NotRegularError,
    PjinvError,
)
from .inversion import (
    InversionCertificate,
    StepConfig,
    StepRecord,
    global_invert,
    lift_segment,
    local_invert,
)
from .mapdsl import (
    JacobianSample,
    MappingExpr,
    eval_mapping,
    jacobian_sample,
    parse_mapping,
    print_mapping,
)
from .matrixset import (
    Enclosure,
    MatrixPolytope,
    SearchBudget,
    co_norm,
    polytope_conorm,
    recession_conorm,
)
from .pseudojac import (
    BallBudget,
    FalsificationVerdict,
    MappingSpec,
    PseudoJacobianMap,
    analytic_singleton,
    eval_at,
    eval_ball,
    falsify_pseudo_jacobian,
    finite_set_map,
    sampled_candidate,
)
from .regularity import (
    HadamardVerdict,
    InvertibilityBallCertificate,
    RadialMinorant,
    RegularityProfile,
    ball_index,
    beta_limit_audit,
    compact_set_check,
    growth_bound_audit,
    hadamard_certify,
    invertibility_ball,
    mean_value_gap,
    radial_profile,
    regularity_index,
)

__all__ = [
    "__version__",
    "BallBudget",
    "DiniEstimate",
    "DomainError",
    "Enclosure",
    "EvaluationError",
    "FalsificationVerdict",
    "HadamardVerdict",
    "InvalidInputError",
    "InversionCertificate",
    "InvertibilityBallCertificate",
    "JacobianSample",
    "LocalSolveFailureError",
    "MappingExpr",
    "MappingSpec",
    "MappingSyntaxError",
    "MatrixPolytope",
    "NonConvergenceError",
    "NotCertifyingError",
    "NotRegularError",
    "PathSample",
    "PjinvError",
    "PseudoJacobianMap",
    "RadialMinorant",
    "RegularityProfile",
    "SearchBudget",
    "StepConfig",
    "StepRecord",
    "analytic_singleton",
    "ball_index",
    "beta_limit_audit",
    "co_norm",
    "compact_set_check",
    "dini_lower",
    "dini_upper",
    "eval_at",
    "eval_ball",
    "eval_mapping",
    "falsify_pseudo_jacobian",
    "finite_set_map",
    "global_invert",
    "growth_bound_audit",
    "hadamard_certify",
    "invertibility_ball",
    "jacobian_sample",
    "lift_segment",
    "local_invert",
    "mean_value_gap",
    "mvi_audit",
    "parse_mapping",
    "path_length",
    "polytope_conorm",
    "print_mapping",
    "radial_profile",
    "recession_conorm",
    "regularity_index",
    "sampled_candidate",
]
