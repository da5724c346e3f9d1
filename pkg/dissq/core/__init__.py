"""
Physics core: Hilbert space, Hamiltonians, dissipators, master-equation engine and
the atomic-rate model.
"""

from .dissipation import (
    ChannelSet,
    RecoilGeometry,
    ScatterElement,
    raman_channels,
    rayleigh_channels,
    repump_channels,
)
from .hamiltonians import total_hamiltonian
from .hilbert import HilbertLayout, build_layout
from .lindblad import EvolutionError, Trajectory, evolve, plateau_fidelity, reset_motion
from .simulation import SimulationSetup, build_setup, simulate, states_at, steady_state

__all__ = [
    "ChannelSet",
    "EvolutionError",
    "HilbertLayout",
    "RecoilGeometry",
    "ScatterElement",
    "SimulationSetup",
    "Trajectory",
    "build_layout",
    "build_setup",
    "evolve",
    "plateau_fidelity",
    "raman_channels",
    "rayleigh_channels",
    "repump_channels",
    "reset_motion",
    "simulate",
    "states_at",
    "steady_state",
    "total_hamiltonian",
]
