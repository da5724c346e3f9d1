"""Beam settings to effective rates through a two-fine-structure-manifold model.

The ground state is an electron spin 1/2 with the nuclear spin 3/2 as a spectator.
A two-photon process absorbing from polarization ``e_in`` and emitting into ``e_out``
acts on the electron spin as

    O = c_s (e_out* . e_in) 1 + i c_v (e_out* x e_in) . sigma

with scalar and vector weights of the P1/2 and P3/2 manifolds. Beam strengths are
``g = sqrt(P)``; the absolute scale of ``P`` is fixed by :func:`calibrate_beams`.
"""

import logging
import math

import numpy as np

from dissq.models import BeamConfig, Level, Polarization, ProtocolParams, RamanRate, RateTable

logger = logging.getLogger(__name__)

LINEWIDTH_HZ = 19.4e6
GHZ = 1e9
TWO_PI = 2.0 * math.pi

_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

_SPHERICAL = {
    Polarization.SIGMA_MINUS: np.array([1.0, -1j, 0.0]) / math.sqrt(2.0),
    Polarization.PI: np.array([0.0, 0.0, 1.0], dtype=complex),
    Polarization.SIGMA_PLUS: -np.array([1.0, 1j, 0.0]) / math.sqrt(2.0),
}

MODEL_LEVELS = (Level.DOWN, Level.UP, Level.AUX)


# --- Building blocks ---


def red_polarization(amplitudes: tuple[float, float, float]) -> np.ndarray:
    """Cartesian vector of (sigma_minus, pi, sigma_plus) amplitudes."""
    r_minus, r_pi, r_plus = amplitudes
    return (
        r_minus * _SPHERICAL[Polarization.SIGMA_MINUS]
        + r_pi * _SPHERICAL[Polarization.PI]
        + r_plus * _SPHERICAL[Polarization.SIGMA_PLUS]
    )


def blue_polarization(amplitudes: tuple[float, float, float]) -> np.ndarray:
    """Linear polarization in the plane spanned by the field and the transverse axis."""
    b_minus, b_pi, b_plus = amplitudes
    return (
        b_minus * _SPHERICAL[Polarization.SIGMA_MINUS]
        + b_pi * _SPHERICAL[Polarization.PI]
        - b_plus * _SPHERICAL[Polarization.SIGMA_PLUS]
    )


def level_states(mixing: float) -> dict[Level, np.ndarray]:
    """Coefficient matrices C[m_J, m_I] (m_J = +1/2, -1/2; m_I = 3/2 .. -3/2)."""
    s = mixing
    c = math.sqrt(1.0 - s * s)
    states = {level: np.zeros((2, 4), dtype=complex) for level in MODEL_LEVELS}
    states[Level.DOWN][0, 0] = 1.0
    states[Level.UP][0, 1] = -s
    states[Level.UP][1, 0] = c
    states[Level.AUX][0, 1] = c
    states[Level.AUX][1, 0] = s
    return states


def manifold_weights(detuning_ghz: float, fine_structure_ghz: float) -> tuple[float, float]:
    """Scalar and vector weights (s/rad) for a detuning from the lower manifold."""
    if detuning_ghz == 0.0 or detuning_ghz == fine_structure_ghz:
        raise ValueError(f"detuning {detuning_ghz} GHz is on resonance with a P manifold")
    d1 = TWO_PI * detuning_ghz * GHZ
    d3 = TWO_PI * (detuning_ghz - fine_structure_ghz) * GHZ
    c_s = (1.0 / d1 + 2.0 / d3) / 3.0
    c_v = (1.0 / d3 - 1.0 / d1) / 3.0
    return c_s, c_v


def two_photon_operator(
    e_out: np.ndarray, e_in: np.ndarray, c_s: float, c_v: float
) -> np.ndarray:
    scalar = np.vdot(e_out, e_in)
    vector = np.cross(e_out.conj(), e_in)
    return c_s * scalar * np.eye(2) + 1j * c_v * np.einsum("k,kij->ij", vector, _PAULI)


def matrix_element(final: np.ndarray, op: np.ndarray, initial: np.ndarray) -> complex:
    return complex(np.trace(final.conj().T @ op @ initial))


class _Beams:
    """Per-beam strengths and polarization vectors of a configuration."""

    def __init__(self, beams: BeamConfig) -> None:
        self.blue = blue_polarization(beams.blue_pol)
        self.red = red_polarization(beams.red_pol)
        self.powers = {
            "blue": beams.p_blue,
            "red_qubit": beams.p_red_qubit,
            "red_aux": beams.p_red_aux,
        }
        self.vectors = {"blue": self.blue, "red_qubit": self.red, "red_aux": self.red}
        self.states = level_states(beams.aux_mixing)
        self.c_s, self.c_v = manifold_weights(beams.detuning_ghz, beams.fine_structure_ghz)


# --- Stimulated processes ---


def stimulated_rates(beams: BeamConfig) -> tuple[float, float]:
    """(Omega_bq, Omega_ba) in rad/s before the Lamb-Dicke factor."""
    model = _Beams(beams)
    op = two_photon_operator(model.red, model.blue, model.c_s, model.c_v)
    up, down, aux = model.states[Level.UP], model.states[Level.DOWN], model.states[Level.AUX]
    g_b = math.sqrt(beams.p_blue)
    omega_bq = g_b * math.sqrt(beams.p_red_qubit) / 2.0 * abs(matrix_element(up, op, down))
    omega_ba = g_b * math.sqrt(beams.p_red_aux) / 2.0 * abs(matrix_element(up, op, aux))
    return omega_bq, omega_ba


def residual_coupling_rate(beams: BeamConfig) -> float:
    """Carrier down-aux Rabi rate (rad/s) from the two red frequency components."""
    model = _Beams(beams)
    op = two_photon_operator(model.red, model.red, model.c_s, model.c_v)
    elem = matrix_element(model.states[Level.AUX], op, model.states[Level.DOWN])
    return math.sqrt(beams.p_red_qubit * beams.p_red_aux) / 2.0 * abs(elem)


# --- Spontaneous processes ---


def _scattering(beams: BeamConfig) -> tuple[dict, dict]:
    """Per (initial, final, polarization) rates and per-level light shifts."""
    model = _Beams(beams)
    gamma = TWO_PI * LINEWIDTH_HZ
    rates: dict[tuple[Level, Level, Polarization], float] = {}
    shifts = {level: 0.0 for level in MODEL_LEVELS}
    for name, power in model.powers.items():
        if power == 0.0:
            continue
        e_in = model.vectors[name]
        prefactor = gamma * power / 4.0
        for pol, e_q in _SPHERICAL.items():
            op = two_photon_operator(e_q, e_in, model.c_s, model.c_v)
            for initial in MODEL_LEVELS:
                c_init = model.states[initial]
                out = op @ c_init
                total = float(np.sum(np.abs(out) ** 2))
                kept = 0.0
                for final in MODEL_LEVELS:
                    amp = abs(matrix_element(model.states[final], op, c_init)) ** 2
                    kept += amp
                    key = (initial, final, pol)
                    rates[key] = rates.get(key, 0.0) + prefactor * amp
                leak_key = (initial, Level.LEAK, pol)
                rates[leak_key] = rates.get(leak_key, 0.0) + prefactor * max(0.0, total - kept)
        self_op = two_photon_operator(e_in, e_in, model.c_s, model.c_v)
        for level in MODEL_LEVELS:
            state = model.states[level]
            shifts[level] += power / 4.0 * matrix_element(state, self_op, state).real
    return rates, shifts


def spontaneous_rates(beams: BeamConfig) -> RateTable:
    """Spontaneous Raman, leakage and Rayleigh rates (1/s), plus light shifts.

    The Rayleigh rate is the elastic rate averaged over down, up and aux. It is the
    weight of one level-blind elastic jump per ion, so only its recoil matters.
    """
    rates, shifts = _scattering(beams)
    raman = [
        RamanRate(initial=i, final=f, polarization=pol, rate_per_s=rate)
        for (i, f, pol), rate in rates.items()
        if i != f and rate > 0.0
    ]
    elastic = {pol: 0.0 for pol in Polarization}
    for (i, f, pol), rate in rates.items():
        if i == f:
            elastic[pol] += rate
    total_elastic = sum(elastic.values())
    rayleigh = total_elastic / len(MODEL_LEVELS)
    mix = (
        {pol: w / total_elastic for pol, w in elastic.items()}
        if total_elastic > 0
        else {pol: 1.0 / 3.0 for pol in Polarization}
    )
    return RateTable(
        raman_rates=raman,
        rayleigh_rate_per_s=rayleigh,
        rayleigh_polarization_mix=mix,
        stark_shifts_hz={level: shift / TWO_PI for level, shift in shifts.items()},
    )


def rate_table(beams: BeamConfig, eta: float) -> RateTable:
    """Full finite-detuning table: sideband Rabi rates with the Lamb-Dicke factor applied."""
    omega_bq, omega_ba = stimulated_rates(beams)
    spont = spontaneous_rates(beams)
    table = spont.model_copy(
        update={
            "omega_bq_hz": eta * omega_bq / TWO_PI,
            "omega_ba_hz": eta * omega_ba / TWO_PI,
            "omega_res_hz": residual_coupling_rate(beams) / TWO_PI,
        }
    )
    logger.debug(
        "rate table detuning_ghz=%.1f omega_bq_hz=%.1f omega_ba_hz=%.1f raman_total=%.3g",
        beams.detuning_ghz,
        table.omega_bq_hz,
        table.omega_ba_hz,
        table.total_raman_rate,
    )
    return table


def large_detuning_table(
    eta: float,
    beams: BeamConfig,
    raman_scale_hz: float = 1.0e5,
    rayleigh_scale: float = 1.0,
    linewidth_hz: float = LINEWIDTH_HZ,
) -> RateTable:
    """Asymptotic table for |detuning| much larger than the fine-structure splitting.

    Only polarizations, power split and level mixing of ``beams`` are used; the
    detuning drops out. Spontaneous Raman vanishes, and Rayleigh scattering keeps a
    fixed ratio to the stimulated rates: both are proportional to the vector scale
    ``raman_scale_hz``, which therefore sets only the time unit. Rayleigh recoil is the
    only heating left in this limit, so the table switches the repump recoil off.
    """
    model = _Beams(beams.model_copy(update={"detuning_ghz": -1.0e6}))
    op = two_photon_operator(model.red, model.blue, 0.0, 1.0)
    up, down, aux = model.states[Level.UP], model.states[Level.DOWN], model.states[Level.AUX]
    f_b = beams.p_blue_fraction
    f_rq = (1.0 - f_b) * beams.r_q
    f_ra = (1.0 - f_b) * (1.0 - beams.r_q)
    scale = eta * raman_scale_hz / 2.0
    omega_bq_hz = scale * math.sqrt(f_b * f_rq) * abs(matrix_element(up, op, down))
    omega_ba_hz = scale * math.sqrt(f_b * f_ra) * abs(matrix_element(up, op, aux))

    fs = TWO_PI * beams.fine_structure_ghz * GHZ
    rayleigh = rayleigh_scale * 3.0 * TWO_PI * linewidth_hz / (4.0 * fs) * TWO_PI * raman_scale_hz
    mix = {pol: 0.0 for pol in Polarization}
    for fraction, vec in ((f_b, model.blue), (f_rq + f_ra, model.red)):
        for pol, e_q in _SPHERICAL.items():
            mix[pol] += fraction * abs(np.vdot(e_q, vec)) ** 2
    total = sum(mix.values())
    return RateTable(
        omega_bq_hz=omega_bq_hz,
        omega_ba_hz=omega_ba_hz,
        raman_rates=[],
        rayleigh_rate_per_s=rayleigh,
        rayleigh_polarization_mix={pol: w / total for pol, w in mix.items()},
        repump_recoil=False,
    )


# --- Calibration and bookkeeping ---


def calibrate_beams(beams: BeamConfig, omega_bq_hz: float, eta: float) -> BeamConfig:
    """Rescale the total power so the sideband rate matches a measured value."""
    omega_bq, _ = stimulated_rates(beams)
    if omega_bq == 0.0:
        raise ValueError("cannot calibrate: configuration has no qubit sideband coupling")
    current_hz = eta * omega_bq / TWO_PI
    scale = omega_bq_hz / current_hz
    logger.info("calibrated beam power scale=%.6g target_omega_bq_hz=%.1f", scale, omega_bq_hz)
    return beams.model_copy(update={"p_total": beams.p_total * scale})


def ratio_report(protocol: ProtocolParams) -> dict[str, float]:
    """Dimensionless control ratios used to compare configurations."""
    if protocol.omega_ba == 0.0:
        raise ValueError("ratios are undefined for a zero aux sideband rate")
    return {
        "omega_bq_over_omega_ba": protocol.omega_bq / protocol.omega_ba,
        "omega_c_over_omega_ba": protocol.omega_c / protocol.omega_ba,
        "t_rep_omega_ba_over_pi": protocol.t_rep * protocol.omega_ba / math.pi,
    }
