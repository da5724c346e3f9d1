"""Interaction-picture Hamiltonians of the four continuous drives (ħ = 1, rad/s)."""

import math

import numpy as np
import scipy.sparse as sp

from dissq.core.hilbert import HilbertLayout, embed, local_ladder, transition
from dissq.models import Level, ProtocolParams, Site

_IONS = (Site.ION1, Site.ION2)


def _ion_weights(params: ProtocolParams) -> tuple[float, float]:
    """Per-ion Rabi scale factors (1 ± imbalance/2)."""
    eps = params.rabi_imbalance
    return 1.0 + eps / 2.0, 1.0 - eps / 2.0


def _hermitian(op: sp.csr_matrix) -> sp.csr_matrix:
    return (op + op.conj().T).tocsr()


def _raising(layout: HilbertLayout) -> sp.csr_matrix:
    return embed(local_ladder(layout.n_levels).T, Site.MOTION, layout)


def h_carrier(params: ProtocolParams, layout: HilbertLayout) -> sp.csr_matrix:
    w1, w2 = _ion_weights(params)
    flip = transition(Level.UP, Level.DOWN)
    drive = w1 * embed(flip, Site.ION1, layout) + w2 * embed(flip, Site.ION2, layout)
    return _hermitian(0.5 * params.omega_c * drive)


def h_blue_qubit(params: ProtocolParams, layout: HilbertLayout) -> sp.csr_matrix:
    """Qubit blue sideband with inter-ion phase φ and reference phase Φ.

    At φ = π the two ions are driven in phase, and the singlet is dark.
    """
    w1, w2 = _ion_weights(params)
    flip = transition(Level.UP, Level.DOWN)
    spin = w1 * embed(flip, Site.ION1, layout) - np.exp(1j * params.phi_rad) * w2 * embed(
        flip, Site.ION2, layout
    )
    prefactor = np.exp(1j * params.global_phase_rad) * 0.5 * params.omega_bq
    return _hermitian(prefactor * (_raising(layout) @ spin))


def h_blue_aux(params: ProtocolParams, layout: HilbertLayout) -> sp.csr_matrix:
    flip = transition(Level.UP, Level.AUX)
    spin = embed(flip, Site.ION1, layout) + embed(flip, Site.ION2, layout)
    return _hermitian(0.5 * params.omega_ba * (_raising(layout) @ spin))


def h_residual(params: ProtocolParams, layout: HilbertLayout) -> sp.csr_matrix:
    """Residual down-aux carrier coupling from an imperfect red-beam polarization."""
    flip = transition(Level.DOWN, Level.AUX)
    drive = embed(flip, Site.ION1, layout) + embed(flip, Site.ION2, layout)
    return _hermitian(0.5 * params.omega_res * drive)


def h_stark(params: ProtocolParams, layout: HilbertLayout) -> sp.csr_matrix:
    total = sp.csr_matrix((layout.total_dim, layout.total_dim), dtype=complex)
    for site in _IONS:
        for level in Level:
            shift = params.stark_shift(site.value, level)  # type: ignore[arg-type]
            if shift:
                total = total + shift * embed(transition(level, level), site, layout)
    return total.tocsr()


def total_hamiltonian(params: ProtocolParams, layout: HilbertLayout) -> sp.csr_matrix:
    h = (
        h_carrier(params, layout)
        + h_blue_qubit(params, layout)
        + h_blue_aux(params, layout)
        + h_residual(params, layout)
        + h_stark(params, layout)
    )
    h = h.tocsr()
    h.eliminate_zeros()
    return h


def rabi_from_pi_time(t_pi_s: float) -> float:
    """Angular Rabi frequency for a carrier π time."""
    if t_pi_s <= 0:
        raise ValueError(f"pi time must be positive, got {t_pi_s}")
    return math.pi / t_pi_s
