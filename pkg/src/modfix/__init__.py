"""Certified fixed-point iteration in modular function spaces."""

from .contraction import (
    FixedPointResult,
    IterationTrace,
    StrictContractionCertificate,
    StrongContractionCertificate,
    certify_strict,
    certify_strong,
    conjugate_exponent,
    contraction_ratio,
    corollary_reduction,
    select_power,
    solve_strict_delta2,
    solve_strong,
)
from .errors import (
    CertificationError,
    DimensionMismatchError,
    DomainViolationError,
    ModfixError,
    ModularOverflowError,
    OracleError,
    PreconditionError,
    SolverError,
)
from .mapping import Domain, Mapping, check_self_map
from .modular import (
    Delta2Certificate,
    GrowthProfile,
    ModularFunctional,
    OrliczGenerator,
    check_regular_growth,
    estimate_delta2,
    growth_function_estimate,
    power_modular,
    verify_modular_axioms,
)
from .nonexpansive import (
    ApproxFixedPointTrace,
    Schedule,
    approximating_sequence,
    certify_nonexpansive,
    proposition31_solve,
    schauder_fixed_point,
    solve_segment,
)
from .problems import (
    AffineMapSpec,
    VolterraSpec,
    brute_force_fixed_point,
    make_affine_map,
    make_rotation_map,
    make_volterra_operator,
)

__all__ = [name for name in dir() if not name.startswith("_")]
