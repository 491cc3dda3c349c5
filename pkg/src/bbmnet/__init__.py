"""Generalized BBM-Burgers equation on star networks.

Finite-difference stepper with a mass-conserving junction, a Picard
fixed-point oracle, conserved-quantity diagnostics and an experiment CLI.
"""

from .diagnostics import (
    DiagnosticsRecord,
    Recorder,
    ReflectionVerdict,
    delta_mass_series,
    detect_reflection,
    energy,
    energy_rate_rhs,
    mass,
)
from .fd import Bootstrap, GridSpec, InstabilityError, Layout, NetworkState, assemble_system, run, step
from .network import (
    EdgeSpec,
    GWPClass,
    JunctionCondition,
    NetworkError,
    Orientation,
    StarNetwork,
    advective_flux,
    build_network,
    gwp_classification,
    two_edge_network,
)
from .picard import QuadratureGrid, picard_solve
from .waves import GreensSpec, SolitaryWaveParams, greens_G, kernel_K, solitary_mass, solitary_profile, solitary_wave

__version__ = "0.1.0"

__all__ = [
    "Bootstrap",
    "DiagnosticsRecord",
    "EdgeSpec",
    "GWPClass",
    "GreensSpec",
    "GridSpec",
    "InstabilityError",
    "JunctionCondition",
    "Layout",
    "NetworkError",
    "NetworkState",
    "Orientation",
    "QuadratureGrid",
    "Recorder",
    "ReflectionVerdict",
    "SolitaryWaveParams",
    "StarNetwork",
    "advective_flux",
    "assemble_system",
    "build_network",
    "delta_mass_series",
    "detect_reflection",
    "energy",
    "energy_rate_rhs",
    "greens_G",
    "gwp_classification",
    "kernel_K",
    "mass",
    "picard_solve",
    "run",
    "solitary_mass",
    "solitary_profile",
    "solitary_wave",
    "step",
    "two_edge_network",
]
