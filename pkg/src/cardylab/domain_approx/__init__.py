"""Continuous marked domains, their hexagonal approximations, and approximation audits."""

from .checks import (
    ApproxReport,
    ConditionResult,
    InsufficientSequence,
    NoConnector,
    PathNotFound,
    check_homotopical_consistency,
    check_interior_conditions,
    check_kernel_convergence,
    check_well_organized,
)
from .continuous import ContinuousDomain, DomainParseError, Mark
from .discrete import (
    AmbiguousArc,
    DiscreteDomain,
    DomainApproxError,
    EmptyApproximation,
    LabelingError,
    MarkSwallowed,
    NoPrincipalComponent,
    NonCommensurate,
    SlitEscapesDomain,
    UnlabeledDomain,
    assign_boundary_arcs,
    canonical_approximation,
    default_delta,
    sup_assemble,
)
from .minkowski import MinkowskiEstimate, koch_curve, minkowski_dimension

__all__ = [
    "AmbiguousArc",
    "ApproxReport",
    "ConditionResult",
    "ContinuousDomain",
    "DiscreteDomain",
    "DomainApproxError",
    "DomainParseError",
    "EmptyApproximation",
    "InsufficientSequence",
    "LabelingError",
    "Mark",
    "MarkSwallowed",
    "MinkowskiEstimate",
    "NoConnector",
    "NoPrincipalComponent",
    "NonCommensurate",
    "PathNotFound",
    "SlitEscapesDomain",
    "UnlabeledDomain",
    "assign_boundary_arcs",
    "canonical_approximation",
    "check_homotopical_consistency",
    "check_interior_conditions",
    "check_kernel_convergence",
    "check_well_organized",
    "default_delta",
    "koch_curve",
    "minkowski_dimension",
    "sup_assemble",
]
