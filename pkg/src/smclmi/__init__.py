"""Sliding-mode analysis and simulation of switched affine DC/DC converters."""
from .equiv import (EquilibriumResult, ReducedModel, closed_loop_field, equivalent_control,
                    find_equilibrium, linearize, reduce)
from .errors import (ConfigurationError, DomainError, EquivalentControlSingular, Infeasible,
                     NoCrossing, NoEquilibrium, SmcError)
from .lmi import SectorCertificate, certify, modal_transform, sector_back_map, solve_sector_lmi
from .model import SlidingSurface, SwitchedAffineSystem, hysteresis_control, surface_value
from .sim import measure_cycle, record_remainder, simulate

__all__ = [
    "ConfigurationError", "DomainError", "EquilibriumResult", "EquivalentControlSingular",
    "Infeasible", "NoCrossing", "NoEquilibrium", "ReducedModel", "SectorCertificate",
    "SlidingSurface", "SmcError", "SwitchedAffineSystem", "certify", "closed_loop_field",
    "equivalent_control", "find_equilibrium", "hysteresis_control", "linearize",
    "measure_cycle", "modal_transform", "record_remainder", "reduce", "sector_back_map",
    "simulate", "solve_sector_lmi", "surface_value",
]
