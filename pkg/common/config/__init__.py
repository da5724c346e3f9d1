from .config import (
    SimulationSettings,
    load_simulation_settings,
    simulation_settings,
)

__all__ = [
    "simulation_settings",
    "load_simulation_settings",
    "SimulationSettings",
]
