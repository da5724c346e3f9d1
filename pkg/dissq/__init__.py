"""
Dissipative two-ion singlet generation: master-equation simulation, readout
emulation and protocol optimization.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
