"""
Pydantic schemas for experiment specs, physical parameters and results.
"""

from .schemas import (
    BeamConfig,
    BudgetCaseName,
    Condition,
    ControlPoint,
    CoolingOptions,
    DetectionModel,
    ErrorBudgetOptions,
    EtaSweepOptions,
    EvolutionConfig,
    ExperimentSpec,
    Level,
    NumericsConfig,
    OptimizeOptions,
    OptResult,
    OptSpace,
    OutputConfig,
    PhiCalibrationOptions,
    Polarization,
    PopulationEstimate,
    ProtocolParams,
    RamanRate,
    RateTable,
    ResultSet,
    Site,
    StatisticsConfig,
    SyntheticReadoutOptions,
)

__all__ = [
    "BeamConfig",
    "BudgetCaseName",
    "Condition",
    "ControlPoint",
    "CoolingOptions",
    "DetectionModel",
    "ErrorBudgetOptions",
    "EtaSweepOptions",
    "EvolutionConfig",
    "ExperimentSpec",
    "Level",
    "NumericsConfig",
    "OptimizeOptions",
    "OptResult",
    "OptSpace",
    "OutputConfig",
    "PhiCalibrationOptions",
    "Polarization",
    "PopulationEstimate",
    "ProtocolParams",
    "RamanRate",
    "RateTable",
    "ResultSet",
    "Site",
    "StatisticsConfig",
    "SyntheticReadoutOptions",
]
