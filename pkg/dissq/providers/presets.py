"""Measured parameter sets of the two finite-detuning runs and the large-detuning optimum."""

import math

from dissq.core.atomic_rates import calibrate_beams, large_detuning_table, rate_table
from dissq.core.hamiltonians import rabi_from_pi_time
from dissq.models import BeamConfig, ControlPoint, ProtocolParams, RateTable

STRETCH_ETA = 0.257
RED_TO_BLUE_POWER = 0.4
RESIDUAL_PI_TIME_S = 5e-3

LARGE_DETUNING_OPTIMUM = ControlPoint(
    b_pi=0.59, r_plus=0.88, r_q=0.357, omega_c_ratio=0.27, t_rep_ratio=0.22
)
LARGE_DETUNING_FIDELITY = 0.989

_PROTOCOLS = {
    "detuning_315": ProtocolParams(
        omega_bq_hz=6560.0,
        omega_ba_hz=10030.0,
        omega_c_hz=4080.0,
        t_rep_us=34.0,
        eta=STRETCH_ETA,
        raman_detuning_ghz=-315.0,
    ),
    "detuning_450": ProtocolParams(
        omega_bq_hz=3430.0,
        omega_ba_hz=5500.0,
        omega_c_hz=1770.0,
        t_rep_us=69.5,
        eta=STRETCH_ETA,
        raman_detuning_ghz=-450.0,
    ),
}

_BEAMS = {
    "detuning_315": BeamConfig.from_components(
        b_pi=0.62,
        r_plus=1.0,
        r_q=0.2,
        detuning_ghz=-315.0,
        p_blue_fraction=1.0 / (1.0 + RED_TO_BLUE_POWER),
    ),
    "detuning_450": BeamConfig.from_components(
        b_pi=0.62,
        r_plus=1.0,
        r_q=0.186,
        detuning_ghz=-450.0,
        p_blue_fraction=1.0 / (1.0 + RED_TO_BLUE_POWER),
    ),
}

# Residual down-aux coupling: 5 ms pi time at -315 GHz, scaled with the sideband rate.
_RESIDUAL_HZ = {
    "detuning_315": rabi_from_pi_time(RESIDUAL_PI_TIME_S) / (2.0 * math.pi),
    "detuning_450": rabi_from_pi_time(RESIDUAL_PI_TIME_S) / (2.0 * math.pi) * 3430.0 / 6560.0,
}


def _finite(name: str) -> str:
    if name not in _PROTOCOLS:
        raise ValueError(
            f"unknown finite-detuning preset {name!r}; expected one of {sorted(_PROTOCOLS)}"
        )
    return name


def preset_protocol(name: str, with_residual: bool = False) -> ProtocolParams:
    """Measured drive strengths; ``large_detuning`` gives the optimum in units of its rate table."""
    if name == "large_detuning":
        return protocol_from_point(LARGE_DETUNING_OPTIMUM, STRETCH_ETA)
    params = _PROTOCOLS[_finite(name)]
    if with_residual:
        params = params.model_copy(update={"omega_res_hz": _RESIDUAL_HZ[name]})
    return params


def preset_beams(name: str) -> BeamConfig:
    """Beam settings with the power calibrated to the measured qubit sideband rate."""
    params = _PROTOCOLS[_finite(name)]
    return calibrate_beams(_BEAMS[name], params.omega_bq_hz, params.eta)


def preset_rates(name: str) -> RateTable:
    """Scattering rates of a preset; the sideband strengths stay the measured ones."""
    if name == "large_detuning":
        return large_detuning_rates(LARGE_DETUNING_OPTIMUM, STRETCH_ETA)
    table = rate_table(preset_beams(name), STRETCH_ETA)
    return table.model_copy(update={"omega_bq_hz": 0.0, "omega_ba_hz": 0.0, "omega_res_hz": 0.0})


# --- Large-detuning control points ---


def beams_from_point(
    point: ControlPoint, r_pi: float = 0.0, p_blue_fraction: float = 0.5
) -> BeamConfig:
    return BeamConfig.from_components(
        b_pi=point.b_pi,
        r_plus=point.r_plus,
        r_q=point.r_q,
        detuning_ghz=-1.0e6,
        r_pi=r_pi,
        p_blue_fraction=p_blue_fraction,
    )


def large_detuning_rates(
    point: ControlPoint, eta: float, r_pi: float = 0.0, p_blue_fraction: float = 0.5
) -> RateTable:
    return large_detuning_table(eta, beams_from_point(point, r_pi, p_blue_fraction))


def protocol_from_point(
    point: ControlPoint, eta: float, r_pi: float = 0.0, p_blue_fraction: float = 0.5
) -> ProtocolParams:
    """Protocol whose carrier and repump follow the ratios of ``point``."""
    table = large_detuning_rates(point, eta, r_pi, p_blue_fraction)
    omega_ba = 2.0 * math.pi * table.omega_ba_hz
    return ProtocolParams(
        omega_bq_hz=table.omega_bq_hz,
        omega_ba_hz=table.omega_ba_hz,
        omega_c_hz=point.omega_c_ratio * table.omega_ba_hz,
        t_rep_us=point.t_rep_ratio * math.pi / omega_ba * 1e6,
        eta=eta,
    )
