"""
Experiment dispatch: spec loading, drivers, result files and the invariant suite.
"""

from .experiments import (
    EXPERIMENTS,
    SpecError,
    apply_settings,
    list_experiments,
    load_spec,
    run,
    spec_hash,
)
from .verify import VerifyReport, verify

__all__ = [
    "EXPERIMENTS",
    "SpecError",
    "VerifyReport",
    "apply_settings",
    "list_experiments",
    "load_spec",
    "run",
    "spec_hash",
    "verify",
]
