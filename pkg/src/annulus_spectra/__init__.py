"""Spectral inequalities for Euler-type operators on planar annuli."""

__version__ = "0.1.0"

from .domain import AnnulusDomain, RadialGrid, WeightSpec, log_grid, make_annulus, make_weight
from .operators import (
    OperatorTag,
    RadialExpansion,
    RadialTerm,
    conformal_threshold,
    m_biharmonic_expansion,
    mode_kernel_basis,
    paper_constants,
    reduce_mode,
)
from .quadrature import expansion_L2_norm, gram_defect_integral, moment_integral
from .certifier import (
    AuditReport,
    QuadraticFormSpec,
    audit_inequality,
    coefficient_bound_audit,
    cs_defect_identity,
    cs_lower_bound,
    discretize_form,
    gn_audit,
    identity_audit,
    kernel_check,
    kernel_residual,
    smallest_rayleigh,
)
from .willmore import ParametricImmersion, f_mu_family, immersion_geometry, total_curvature, willmore_energy

__all__ = [
    "AnnulusDomain",
    "RadialGrid",
    "WeightSpec",
    "log_grid",
    "make_annulus",
    "make_weight",
    "OperatorTag",
    "RadialExpansion",
    "RadialTerm",
    "conformal_threshold",
    "m_biharmonic_expansion",
    "mode_kernel_basis",
    "paper_constants",
    "reduce_mode",
    "expansion_L2_norm",
    "gram_defect_integral",
    "moment_integral",
    "AuditReport",
    "QuadraticFormSpec",
    "audit_inequality",
    "coefficient_bound_audit",
    "cs_defect_identity",
    "cs_lower_bound",
    "discretize_form",
    "gn_audit",
    "identity_audit",
    "kernel_check",
    "kernel_residual",
    "smallest_rayleigh",
    "ParametricImmersion",
    "f_mu_family",
    "immersion_geometry",
    "total_curvature",
    "willmore_energy",
]
