"""Radial laboratory for the mass-critical NLS with an attractive
inverse-square potential: ground states, the sharp interpolation
constant, exact blow-up solutions and time evolution with virial
diagnostics."""

from .evolution import (
    BlowupFit,
    EvolutionConfig,
    TrajectoryDiagnostics,
    evolve,
    fit_blowup_rate,
    global_bound_check,
    mass_concentration,
    step,
)
from .functionals import (
    FunctionalReport,
    energy,
    functional_report,
    gn_inequality_check,
    hardy_functional,
    mass,
    weinstein_j,
)
from .ground_state import (
    GroundState,
    resample_profile,
    scaled_ground_state,
    sharp_constant,
    solve_gradient_flow,
    solve_shooting,
)
from .params_grid import (
    ComplexRadialField,
    PhysicalParams,
    RadialGrid,
    build_grid,
    indicial_exponent,
)
from .pseudoconformal import (
    BlowupFamilyParams,
    exact_solution,
    predicted_blowup_speed,
    pseudo_conformal_transform,
    standing_wave,
)
from .virial_diagnostics import (
    VirialReport,
    banica_check,
    phase_modulated_energy,
    trajectory_virial_report,
    variance,
    variance_accel,
    variance_rate,
)

__version__ = "0.1.0"

__all__ = [
    "BlowupFamilyParams",
    "BlowupFit",
    "ComplexRadialField",
    "EvolutionConfig",
    "FunctionalReport",
    "GroundState",
    "PhysicalParams",
    "RadialGrid",
    "TrajectoryDiagnostics",
    "VirialReport",
    "banica_check",
    "build_grid",
    "energy",
    "evolve",
    "exact_solution",
    "fit_blowup_rate",
    "functional_report",
    "global_bound_check",
    "gn_inequality_check",
    "hardy_functional",
    "indicial_exponent",
    "mass",
    "mass_concentration",
    "phase_modulated_energy",
    "predicted_blowup_speed",
    "pseudo_conformal_transform",
    "resample_profile",
    "scaled_ground_state",
    "sharp_constant",
    "solve_gradient_flow",
    "solve_shooting",
    "standing_wave",
    "step",
    "trajectory_virial_report",
    "variance",
    "variance_accel",
    "variance_rate",
    "weinstein_j",
]
