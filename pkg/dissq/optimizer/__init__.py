"""
Parameter studies: large-detuning optimization, sensitivity scans, Lamb-Dicke sweeps,
interleaved cooling and the finite-detuning error budget.
"""

from .optimizer import (
    BUDGET_CASES,
    BudgetRow,
    CoolingResult,
    EtaPoint,
    ScanPoint,
    cooling_interleave,
    error_budget,
    eta_sweep,
    optimize_large_detuning,
    sensitivity_scan,
    steady_fidelity_objective,
)

__all__ = [
    "BUDGET_CASES",
    "BudgetRow",
    "CoolingResult",
    "EtaPoint",
    "ScanPoint",
    "cooling_interleave",
    "error_budget",
    "eta_sweep",
    "optimize_large_detuning",
    "sensitivity_scan",
    "steady_fidelity_objective",
]
