"""Feasibility (FOR) and flexibility (FXOR) operating regions of a virtual power plant."""

from .der import (BatteryUnit, DieselGen, FlexibleLoad, OperatingPoint, PvUnit, build_default_fleet,
                  capability_contains, fleet_transition_time, flexible_loads_from_network, transition_time)
from .feasibility import ForResult, SolverSettings, compute_for, split_ancillary
from .flexibility import FxorRequest, FxorResult, classify_fcas, compute_fxor
from .geometry import Hull, convex_hull, hull_area, hull_contains
from .grid import Branch, Bus, Network, apply_switch_state, build_ieee33, load_network
from .powerflow import InjectionSet, PowerFlowSolution, check_constraints, solve_power_flow
from .sampling import SampleConfig, sample_operating_points

__version__ = "0.1.0"

__all__ = [
    "BatteryUnit", "Branch", "Bus", "DieselGen", "FlexibleLoad", "ForResult", "FxorRequest", "FxorResult", "Hull",
    "InjectionSet", "Network", "OperatingPoint", "PowerFlowSolution", "PvUnit", "SampleConfig", "SolverSettings",
    "apply_switch_state", "build_default_fleet", "build_ieee33", "capability_contains", "check_constraints",
    "classify_fcas", "compute_for", "compute_fxor", "convex_hull", "fleet_transition_time",
    "flexible_loads_from_network", "hull_area", "hull_contains", "load_network", "sample_operating_points",
    "solve_power_flow", "split_ancillary", "transition_time",
]
