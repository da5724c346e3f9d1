"""
Canned parameter sets: the measured finite-detuning runs and the large-detuning optimum.
"""

from .presets import (
    LARGE_DETUNING_OPTIMUM,
    STRETCH_ETA,
    beams_from_point,
    large_detuning_rates,
    preset_beams,
    preset_protocol,
    preset_rates,
    protocol_from_point,
)

__all__ = [
    "LARGE_DETUNING_OPTIMUM",
    "STRETCH_ETA",
    "beams_from_point",
    "large_detuning_rates",
    "preset_beams",
    "preset_protocol",
    "preset_rates",
    "protocol_from_point",
]
