"""Certified evaluation of exp(tau inv(M) K) b for FEM pencils.

The driver encloses the numerical range of the (mass-weighted) operator in
an axis-aligned rectangle, builds a rational approximant to exp on that
rectangle with a certified sup-norm error, and applies it through sparse
shifted solves. The certificate converts the scalar sup error into a bound
on the vector error via the Crouzeix-Palencia theorem.
"""
from .aaa import aaa_poles, refit_partial_fractions
from .bounds import (
    BoundingRectangle,
    CondEstimate,
    Pencil,
    RawExtremes,
    SymSkewSplit,
    bounding_rectangle,
    cond_estimate,
    extreme_eig_skew_pencil,
    extreme_eigs_sym_pencil,
    is_lhp_certified,
    raw_extremes,
    rectangle_from_extremes,
    split,
)
from .errors import (
    DegenerateMesh,
    DegreeExhausted,
    DimensionMismatch,
    ExpmrectError,
    NoConvergence,
    NotSPD,
    NotSymmetric,
    PoleEvaluation,
    PoleInsideRegion,
    RefitFailed,
    RepeatedRoots,
    ScalingExhausted,
    SingularMatrix,
    SingularShift,
)
from .expmv import (
    BoundCheckReport,
    ExpmvCertificate,
    ExpmvRequest,
    apply_partial_fraction,
    apply_scaled_pade,
    expm_dense_oracle,
    expmv_controlled,
    plain_range_rectangle,
    theorem1_bound_check,
)
from .fem import (
    AssembledSystem,
    TriMesh,
    assemble_p1,
    assemble_p1_full,
    initial_vector,
    mesh_square,
    mesh_star,
    read_mesh,
    write_mesh,
)
from .rational import (
    CertifiedApproximant,
    PadeRational,
    PartialFractionRational,
    RegionBoundary,
    boundary_samples,
    eval_rational,
    pade45,
    pade_to_partial_fractions,
    select_scaling,
    sup_error_on_rectangle,
)

__version__ = "0.1.0"

__all__ = [
    "AssembledSystem",
    "BoundCheckReport",
    "BoundingRectangle",
    "CertifiedApproximant",
    "CondEstimate",
    "DegenerateMesh",
    "DegreeExhausted",
    "DimensionMismatch",
    "ExpmrectError",
    "ExpmvCertificate",
    "ExpmvRequest",
    "NoConvergence",
    "NotSPD",
    "NotSymmetric",
    "PadeRational",
    "PartialFractionRational",
    "Pencil",
    "PoleEvaluation",
    "PoleInsideRegion",
    "RawExtremes",
    "RefitFailed",
    "RegionBoundary",
    "RepeatedRoots",
    "ScalingExhausted",
    "SingularMatrix",
    "SingularShift",
    "SymSkewSplit",
    "TriMesh",
    "aaa_poles",
    "apply_partial_fraction",
    "apply_scaled_pade",
    "assemble_p1",
    "assemble_p1_full",
    "boundary_samples",
    "bounding_rectangle",
    "cond_estimate",
    "eval_rational",
    "expm_dense_oracle",
    "expmv_controlled",
    "extreme_eig_skew_pencil",
    "extreme_eigs_sym_pencil",
    "initial_vector",
    "is_lhp_certified",
    "mesh_square",
    "mesh_star",
    "pade45",
    "pade_to_partial_fractions",
    "plain_range_rectangle",
    "raw_extremes",
    "read_mesh",
    "rectangle_from_extremes",
    "refit_partial_fractions",
    "select_scaling",
    "split",
    "sup_error_on_rectangle",
    "theorem1_bound_check",
    "write_mesh",
]
