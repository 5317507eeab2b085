"""Numerical laboratory for norm-constrained variational minimization."""

from .catalog import catalog_text, make_constraint, make_lagrangian, make_nonlinearity
from .ccdiag import (
    AuditReport,
    CCReport,
    CertificateScan,
    MCCurve,
    Rho0Estimate,
    certificate_choquard,
    certificate_quasilinear,
    check_monotone,
    check_subadditivity,
    decay_check,
    estimate_rho0,
    homogeneity_bound_check,
    inequality_audit,
    scan_mass_curve,
    sharp_hls_constant,
)
from .energy import (
    Constraint,
    EnergyBreakdown,
    Lagrangian,
    NonFiniteEnergyError,
    Nonlinearity,
    ProblemSpec,
    constraint_value,
    coulomb_bilinear,
    coulomb_energy,
    coulomb_potential,
    dirichlet_energy,
    energy_gradient,
    make_problem,
    total_energy,
    validate_coupling,
)
from .grid import (
    Field,
    GridSpec,
    cylindrical_grid,
    dump_field_csv,
    integrate,
    line_grid,
    lp_norm,
    radial_derivative,
    radial_grid,
    resample,
)
from .rearrange import (
    BumpPlacement,
    SurgeryReport,
    add_disjoint_mass,
    far_field_bump,
    fill_dip,
    plateau_insert,
    schwarz_rearrange,
    truncate_renormalize,
)
from .solve import (
    SolveConfig,
    SolveResult,
    el_residual,
    lagrange_multiplier,
    minimize_constrained,
    project_to_constraint,
)

__version__ = "0.1.0"
