"""Nonlocal cohesive bond model for dynamic brittle fracture.

Modules, bottom-up: :mod:`kernel` (bond law), :mod:`calibration` (elastic and
fracture constants), :mod:`grid` (lattice and neighbour lists),
:mod:`dynamics` (explicit time stepping with an energy ledger),
:mod:`diagnostics` (process zones and nucleation scan), :mod:`verification`
(dense-quadrature energy checks), :mod:`config`, :mod:`io` and :mod:`cli`.
"""
from .calibration import MaterialModel, elastic_moduli, energy_release_rate, fit_kernel
from .diagnostics import (
    ProcessZone,
    ProcessZoneParams,
    StabilityReport,
    exceedance_field,
    neighborhood_exceedance,
    nucleation_scan,
    process_zone,
    process_zone_bound,
    stability_matrix,
)
from .dynamics import (
    BodyForce,
    EnergyLedger,
    SimState,
    assemble_force,
    energy_balance_residual,
    initial_state,
    simulate,
    stable_dt,
    step,
)
from .grid import DomainGrid, DomainSpec, InvalidSpecError, build_grid
from .kernel import (
    BondGeometry,
    CohesivePotential,
    InfluenceFunction,
    RootNotFoundError,
    bond_force_curvature,
    bond_force_per_length,
    bond_potential,
    bond_strain,
    critical_strain,
)
from .verification import (
    check_inequality,
    check_monotonicity,
    lefm_energy,
    pd_energy_dense,
    plane_wave_check,
)

__version__ = "0.1.0"

__all__ = [
    "BodyForce", "BondGeometry", "CohesivePotential", "DomainGrid", "DomainSpec",
    "EnergyLedger", "InfluenceFunction", "InvalidSpecError", "MaterialModel", "ProcessZone",
    "ProcessZoneParams", "RootNotFoundError", "SimState", "StabilityReport", "assemble_force",
    "bond_force_curvature", "bond_force_per_length", "bond_potential", "bond_strain",
    "build_grid", "check_inequality", "check_monotonicity", "critical_strain",
    "elastic_moduli", "energy_balance_residual", "energy_release_rate", "exceedance_field",
    "fit_kernel", "initial_state", "lefm_energy", "neighborhood_exceedance",
    "nucleation_scan", "pd_energy_dense", "plane_wave_check", "process_zone",
    "process_zone_bound", "simulate", "stability_matrix", "stable_dt", "step",
]
