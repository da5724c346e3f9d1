"""
Readout emulation and statistics: analysis rotations, population algebra, photon-count
synthesis, maximum-likelihood estimation, bootstrap intervals and count-record files.
"""

from .bootstrap import BootstrapInterval, bca_interval, bootstrap_ci
from .count_io import CountRecord, read_count_records, write_count_records
from .measurement import (
    analysis_map,
    basis_populations,
    bright_populations,
    fit_detection_model,
    mle_populations,
    phi_calibration_curve,
    synthesize_counts,
    x_from_counts,
)

__all__ = [
    "BootstrapInterval",
    "CountRecord",
    "analysis_map",
    "basis_populations",
    "bca_interval",
    "bootstrap_ci",
    "bright_populations",
    "fit_detection_model",
    "mle_populations",
    "phi_calibration_curve",
    "read_count_records",
    "synthesize_counts",
    "write_count_records",
    "x_from_counts",
]
