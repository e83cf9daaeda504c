"""Cohesive fracture surface densities from scalar damage models.

A numpy/scipy library computing the surface energy density of cohesive
fracture as a 1D vectorial optimal-profile problem, by two independent
routes (an elliptic cell problem and a degenerate geodesic distance),
together with 1D phase-field bar experiments exhibiting the convergence
of the regularized minima to the limit model, and the Dugdale,
power-law, and Griffith regime limits of indexed potential families.
"""

from .potentials import (
    Custom,
    DamagePotential,
    DugdaleModified,
    EpsilonSchedule,
    GriffithScaled,
    PointwiseMin,
    PowerLaw,
    Prototype,
    TruncatedLimitKind,
    UnsupportedRegimeError,
    classify_truncated_limit,
    truncated,
)
from .limit_model import (
    Candidate1D,
    DensityTable,
    check_table_properties,
    limit_bar_energy,
    limit_phi_1d,
    volume_density,
)
from .cell_solver import (
    ProfilePair,
    SolverOptions,
    build_density_table,
    cell_energy,
    minimize_cell,
    plateau_level,
    plateau_profile,
    surface_density,
    surface_density_perturbed,
)
from .geodesic import (
    GeodesicGrid,
    geodesic_distance,
    interior_containment,
    metric_length,
    refine_until_stable,
)
from .bar1d import (
    FidelityData,
    PhaseFieldState,
    alternate_minimize,
    bar_energy,
    bar_sweep,
    fidelity_energy,
    mesh_nodes_for,
    update_damage,
    update_displacement,
)
from .regimes import (
    RegimeSequence,
    build_sequence,
    dugdale_plateau_level,
    powerlaw_density_table,
    powerlaw_small_opening_check,
    powerlaw_upper_construction,
    regime_study,
)

__version__ = "0.1.0"

__all__ = [
    "Custom",
    "DamagePotential",
    "DugdaleModified",
    "EpsilonSchedule",
    "GriffithScaled",
    "PointwiseMin",
    "PowerLaw",
    "Prototype",
    "TruncatedLimitKind",
    "UnsupportedRegimeError",
    "classify_truncated_limit",
    "truncated",
    "Candidate1D",
    "DensityTable",
    "check_table_properties",
    "limit_bar_energy",
    "limit_phi_1d",
    "volume_density",
    "ProfilePair",
    "SolverOptions",
    "build_density_table",
    "cell_energy",
    "minimize_cell",
    "plateau_level",
    "plateau_profile",
    "surface_density",
    "surface_density_perturbed",
    "GeodesicGrid",
    "geodesic_distance",
    "interior_containment",
    "metric_length",
    "refine_until_stable",
    "FidelityData",
    "PhaseFieldState",
    "alternate_minimize",
    "bar_energy",
    "bar_sweep",
    "fidelity_energy",
    "mesh_nodes_for",
    "update_damage",
    "update_displacement",
    "RegimeSequence",
    "build_sequence",
    "dugdale_plateau_level",
    "powerlaw_density_table",
    "powerlaw_small_opening_check",
    "powerlaw_upper_construction",
    "regime_study",
]
