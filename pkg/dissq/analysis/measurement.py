"""Readout emulation: analysis rotations, population algebra, count synthesis and MLE."""

import logging
import math
from collections.abc import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp
from scipy.stats import poisson

from dissq.core.hilbert import INTERNAL_DIM, LEVELS_PER_ION, HilbertLayout, internal_state
from dissq.models import Condition, DetectionModel, Level, PopulationEstimate

logger = logging.getLogger(__name__)

RANDOM_PHASE_SAMPLES = 64
MLE_TOLERANCE = 1e-10
MLE_MAX_ITER = 20_000

_SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)

Triple = tuple[float, float, float]


# --- Analysis rotations ---


def spin_rotation(angle: float, phase: float) -> np.ndarray:
    """exp(-i angle/2 (cos(phase) sx + sin(phase) sy)) on a spin 1/2."""
    axis = math.cos(phase) * _SIGMA_X + math.sin(phase) * _SIGMA_Y
    return math.cos(angle / 2.0) * np.eye(2) - 1j * math.sin(angle / 2.0) * axis


def qubit_rotation(angle: float, phase: float) -> np.ndarray:
    """Single-ion rotation on {down, up}; identity on aux and leak."""
    rot = np.eye(LEVELS_PER_ION, dtype=complex)
    rot[:2, :2] = spin_rotation(angle, phase)
    return rot


def _bright_triple(internal: np.ndarray) -> Triple:
    diag = np.real(np.diag(internal)).reshape(LEVELS_PER_ION, LEVELS_PER_ION)
    d = Level.DOWN.index
    p2 = float(diag[d, d])
    p1 = float(diag[d, :].sum() + diag[:, d].sum() - 2.0 * diag[d, d])
    total = float(diag.sum())
    return (total - p1 - p2, p1, p2)


def analysis_map(
    rho: np.ndarray, condition: Condition | str, layout: HilbertLayout | None = None
) -> Triple:
    """(P0, P1, P2): probabilities of 0, 1 or 2 ions in the bright (down) level.

    ``rho`` is either the full state (with ``layout``) or the 16x16 internal state.
    """
    try:
        condition = Condition(condition)
    except ValueError as exc:
        raise ValueError(f"unknown analysis condition {condition!r}") from exc
    internal = rho if rho.shape == (INTERNAL_DIM, INTERNAL_DIM) else None
    if internal is None:
        if layout is None:
            raise ValueError("a layout is required to trace out the motion")
        internal = internal_state(rho, layout)

    if condition == Condition.IDENTITY:
        return _bright_triple(internal)
    if condition == Condition.PI:
        rot = np.kron(qubit_rotation(math.pi, 0.0), qubit_rotation(math.pi, 0.0))
        return _bright_triple(rot @ internal @ rot.conj().T)

    averaged = np.zeros_like(internal, dtype=complex)
    for k in range(RANDOM_PHASE_SAMPLES):
        single = qubit_rotation(math.pi / 2.0, 2.0 * math.pi * k / RANDOM_PHASE_SAMPLES)
        rot = np.kron(single, single)
        averaged += rot @ internal @ rot.conj().T
    return _bright_triple(averaged / RANDOM_PHASE_SAMPLES)


def bright_populations(
    rho: np.ndarray, layout: HilbertLayout | None = None
) -> dict[Condition, Triple]:
    return {c: analysis_map(rho, c, layout) for c in Condition}


def basis_populations(p_n: Mapping[Condition, Sequence[float]]) -> PopulationEstimate:
    """Down-down, up-up, singlet-witness X and triplet populations from the nine P_{n,A}.

    Outputs are not clamped to [0, 1].
    """
    p_2i = p_n[Condition.IDENTITY][2]
    p_2pi = p_n[Condition.PI][2]
    p_0h, _, p_2h = p_n[Condition.HALF_PI_RANDOM]
    both = 0.5 * (p_2i + p_2pi)
    return PopulationEstimate(
        p_n={c: tuple(float(v) for v in p_n[c]) for c in Condition},  # type: ignore[misc]
        p_down_down=float(p_2i),
        p_up_up=float(p_2pi),
        x=float(1.0 - 2.0 * p_0h - both),
        p_triplet=float(2.0 * p_2h - both),
    )


# --- Counts ---


def synthesize_counts(
    p_n: Sequence[float], model: DetectionModel, shots: int, seed: int | np.random.SeedSequence
) -> np.ndarray:
    """Per-shot photon counts: bright-ion number drawn from ``p_n``, counts Poisson about c_n."""
    if shots < 1:
        raise ValueError(f"shots must be at least 1, got {shots}")
    probs = np.clip(np.asarray(p_n, dtype=float), 0.0, None)
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"bright populations must sum to 1, got {probs.sum():.12f}")
    rng = np.random.default_rng(seed)
    bright = rng.choice(3, size=shots, p=probs / probs.sum())
    return rng.poisson(model.means[bright]).astype(np.int64)


def _check_model(model: DetectionModel) -> None:
    if not model.c0 < model.c1 < model.c2:
        raise ValueError(
            f"degenerate detection model: need c0 < c1 < c2, got {model.c0}, {model.c1}, {model.c2}"
        )


def mle_populations(counts: Sequence[int] | np.ndarray, model: DetectionModel) -> Triple:
    """Maximum-likelihood (P0, P1, P2) of the three-component Poisson mixture by EM."""
    _check_model(model)
    values, multiplicity = np.unique(np.asarray(counts, dtype=np.int64), return_counts=True)
    if values.size == 0:
        raise ValueError("no counts to estimate from")
    if values[0] < 0:
        raise ValueError("photon counts must be non-negative")
    log_lik = poisson.logpmf(values[:, None], model.means[None, :])
    weights = multiplicity / multiplicity.sum()

    p = np.full(3, 1.0 / 3.0)
    for iteration in range(1, MLE_MAX_ITER + 1):
        with np.errstate(divide="ignore"):
            joint = log_lik + np.log(p)[None, :]
        resp = np.exp(joint - logsumexp(joint, axis=1, keepdims=True))
        updated = weights @ resp
        residual = float(np.abs(updated - p).max())
        p = updated
        if residual < MLE_TOLERANCE:
            break
    else:
        logger.warning("mle did not converge residual=%.3e iterations=%d", residual, iteration)
    p = p / p.sum()
    return (float(p[0]), float(p[1]), float(p[2]))


def fit_detection_model(counts: Sequence[int] | np.ndarray) -> tuple[DetectionModel, Triple]:
    """Joint fit of (c0, c1) and the mixture weights to pooled counts.

    c2 follows the default two-emitter rule.
    """
    values, multiplicity = np.unique(np.asarray(counts, dtype=np.int64), return_counts=True)
    if values.size < 3:
        raise ValueError("need at least three distinct count values to fit a detection model")

    def unpack(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c0 = math.exp(u[0])
        c1 = c0 + math.exp(u[1])
        means = np.array([c0, c1, 2.0 * c1 - c0])
        logits = np.array([u[2], u[3], 0.0])
        return means, np.exp(logits - logsumexp(logits))

    def negative_log_likelihood(u: np.ndarray) -> float:
        means, p = unpack(u)
        joint = poisson.logpmf(values[:, None], means[None, :]) + np.log(p)[None, :]
        return -float(multiplicity @ logsumexp(joint, axis=1))

    data = np.repeat(values, multiplicity).astype(float)
    low, high = np.percentile(data, [10, 90])
    c0_guess = max(low, 0.1)
    c1_guess = max(high / 2.0, c0_guess + 1.0)
    start = np.array([math.log(c0_guess), math.log(c1_guess - c0_guess), 0.0, 0.0])
    result = minimize(
        negative_log_likelihood,
        start,
        method="Nelder-Mead",
        options={"xatol": 1e-7, "fatol": 1e-7, "maxiter": 20_000, "maxfev": 40_000},
    )
    means, p = unpack(result.x)
    if not result.success:
        logger.warning("detection model fit did not converge: %s", result.message)
    model = DetectionModel(c0=float(means[0]), c1=float(means[1]))
    return model, (float(p[0]), float(p[1]), float(p[2]))


def x_from_counts(
    counts_by_condition: Mapping[Condition, np.ndarray], model: DetectionModel
) -> float:
    """Singlet witness X from raw counts of the three analysis conditions."""
    p_n = {c: mle_populations(counts_by_condition[c], model) for c in Condition}
    return basis_populations(p_n).x


# --- Phase calibration ---


def _two_ion_rotation(angle: float, phase_1: float, phase_2: float) -> np.ndarray:
    return np.kron(spin_rotation(angle, phase_1), spin_rotation(angle, phase_2))


def _parity_after_sequence(omega_cr: float, phi: float, mw_phase: float, ref_phase: float) -> float:
    """Even-parity probability after a microwave pi/2 and a carrier-Raman pi/2 pulse."""
    down_down = np.zeros(4, dtype=complex)
    down_down[0] = 1.0
    mw = _two_ion_rotation(math.pi / 2.0, mw_phase, mw_phase)
    duration = math.pi / (2.0 * omega_cr)
    cr = _two_ion_rotation(omega_cr * duration, ref_phase, ref_phase + phi)
    psi = cr @ mw @ down_down
    probs = np.abs(psi) ** 2
    return float(probs[0] + probs[3])


def phi_calibration_curve(
    omega_cr: float,
    phi_list: Sequence[float],
    shots: int | None = None,
    seed: int | None = None,
    phase_samples: int = 16,
) -> list[tuple[float, float]]:
    """(P_dd + P_uu, P_du + P_ud) per inter-ion phase, averaged over both random phases.

    Without ``shots`` the phase average is evaluated on equally spaced grids, which is
    exact for the low-order trigonometric dependence. With ``shots`` each repetition
    draws its own phases and a parity outcome.
    """
    if omega_cr <= 0:
        raise ValueError(f"omega_cr must be positive, got {omega_cr}")
    grid = 2.0 * math.pi * np.arange(phase_samples) / phase_samples
    rng = np.random.default_rng(seed)
    curve = []
    for phi in phi_list:
        if shots is None:
            even = float(
                np.mean([_parity_after_sequence(omega_cr, phi, a, b) for a in grid for b in grid])
            )
        else:
            draws = rng.uniform(0.0, 2.0 * math.pi, size=(shots, 2))
            p_even = np.array([_parity_after_sequence(omega_cr, phi, a, b) for a, b in draws])
            even = float(np.mean(rng.random(shots) < p_even))
        curve.append((even, 1.0 - even))
    return curve
