"""Incremental minimization time stepping for a finite-strain
Poynting-Thomson solid, its small-strain (linearized) companion, and a
verification harness for the energetic structure of the scheme."""

__version__ = "0.1.0"

from .errors import (
    ConfigParseError,
    CurvatureNotConverged,
    InfeasibleState,
    NonFiniteObjective,
    NotSymmetricPositiveDefinite,
    StepRejected,
    ValidationError,
    ViscoPTError,
)
from .rheology import (
    MATERIAL_POINT,
    SHEAR_COLUMN,
    AssumptionReport,
    MaterialModel,
    QuadraticLimit,
    check_assumptions,
)
from .domain import (
    Loading,
    ShearColumnMesh,
    State,
    TimeGrid,
    dissipation_increment,
    elastic_strain,
    total_energy,
)
from .minimize import (
    MinimizeSettings,
    minimize_newton,
    minimize_smooth,
    solve_quadratic,
)
from .stepper import (
    PhiTau,
    StepReport,
    Trajectory,
    de_giorgi_integral,
    de_giorgi_interpolant,
    equilibrate_elastic,
    incremental_step,
    interpolant,
    phi_tau,
    run_evolution,
)
from .linearized import (
    LinState,
    LinTrajectory,
    lin_el_residual,
    lin_equilibrium,
    lin_step,
    mp_lin_closed_form,
    rescale_displacements,
    rescaled_energies,
    run_lin_evolution,
)
from .analysis import (
    VerificationReport,
    check_energy_inequality,
    check_monotonicity,
    check_semistability,
    density_convergence,
    epsilon_study,
    rk4_viscous_oracle,
    semistability_sweep,
    tau_convergence,
)
from .config import ScenarioConfig, load_config, parse_config

__all__ = [
    "MATERIAL_POINT",
    "SHEAR_COLUMN",
    "AssumptionReport",
    "ConfigParseError",
    "CurvatureNotConverged",
    "InfeasibleState",
    "LinState",
    "LinTrajectory",
    "Loading",
    "MaterialModel",
    "MinimizeSettings",
    "NonFiniteObjective",
    "NotSymmetricPositiveDefinite",
    "PhiTau",
    "QuadraticLimit",
    "ScenarioConfig",
    "ShearColumnMesh",
    "State",
    "StepRejected",
    "StepReport",
    "TimeGrid",
    "Trajectory",
    "ValidationError",
    "VerificationReport",
    "ViscoPTError",
    "check_assumptions",
    "check_energy_inequality",
    "check_monotonicity",
    "check_semistability",
    "de_giorgi_integral",
    "de_giorgi_interpolant",
    "density_convergence",
    "dissipation_increment",
    "elastic_strain",
    "epsilon_study",
    "equilibrate_elastic",
    "incremental_step",
    "interpolant",
    "lin_el_residual",
    "lin_equilibrium",
    "lin_step",
    "load_config",
    "minimize_newton",
    "minimize_smooth",
    "mp_lin_closed_form",
    "parse_config",
    "phi_tau",
    "rescale_displacements",
    "rescaled_energies",
    "rk4_viscous_oracle",
    "run_evolution",
    "run_lin_evolution",
    "semistability_sweep",
    "solve_quadratic",
    "tau_convergence",
    "total_energy",
]
