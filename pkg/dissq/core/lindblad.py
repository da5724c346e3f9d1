"""Master-equation integration for the two-ion plus motion system."""

import logging
import math
from typing import Any

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import RK45

from dissq.core.dissipation import ChannelSet
from dissq.core.hilbert import (
    INTERNAL_DIM,
    LEVELS_PER_ION,
    HilbertLayout,
    fidelity,
    fock_populations,
    internal_state,
    mean_phonon,
    singlet_state,
)
from dissq.models import EvolutionConfig, Level, ProtocolParams

logger = logging.getLogger(__name__)

POSITIVITY_ABORT = -1e-5
TOP_RUNG_LIMIT = 1e-4
DEFAULT_PLATEAU_WINDOW = (6e-3, 16e-3)


class EvolutionError(RuntimeError):
    """Integration failure carrying the state of the integrator when it stopped."""

    def __init__(self, message: str, diagnostics: dict[str, Any]) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics


class Diagnostics(BaseModel):
    max_trace_error: float = 0.0
    max_hermiticity_error: float = 0.0
    min_eigenvalue: float = math.inf
    max_top_population: float = 0.0
    truncation_flag: bool = False
    steps: int = 0

    def merge(self, other: "Diagnostics") -> "Diagnostics":
        return Diagnostics(
            max_trace_error=max(self.max_trace_error, other.max_trace_error),
            max_hermiticity_error=max(self.max_hermiticity_error, other.max_hermiticity_error),
            min_eigenvalue=min(self.min_eigenvalue, other.min_eigenvalue),
            max_top_population=max(self.max_top_population, other.max_top_population),
            truncation_flag=self.truncation_flag or other.truncation_flag,
            steps=self.steps + other.steps,
        )


class Trajectory(BaseModel):
    """Sampled observables of one evolution.

    ``populations`` rows are (P_dd, P_uu, P_S, P_T, P_leak).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: list[float]
    fidelities: list[float]
    mean_phonons: list[float]
    populations: list[tuple[float, float, float, float, float]]
    final_state: np.ndarray
    diagnostics: Diagnostics = Field(default_factory=Diagnostics)

    def shifted(self, offset: float) -> "Trajectory":
        return self.model_copy(update={"times": [t + offset for t in self.times]})


# --- Right-hand side ---


def lindblad_rhs(
    rho: np.ndarray, H: sp.spmatrix | np.ndarray, channels: ChannelSet | None = None
) -> np.ndarray:
    if H.shape != rho.shape:
        raise ValueError(f"Hamiltonian shape {H.shape} does not match state shape {rho.shape}")
    out = -1j * (np.asarray(H @ rho) - np.asarray((H.T @ rho.T).T))
    if channels is not None and len(channels):
        out += channels.apply(rho)
    return out


def dense_generator(
    H: sp.spmatrix | np.ndarray, channels: ChannelSet | None, dim: int
) -> np.ndarray:
    """Full generator on row-major vec(rho), built column by column; small systems only."""
    if dim > 64:
        raise ValueError(f"dense generator is limited to dimension 64, got {dim}")
    gen = np.zeros((dim * dim, dim * dim), dtype=complex)
    unit = np.zeros((dim, dim), dtype=complex)
    for col in range(dim * dim):
        unit.flat[col] = 1.0
        gen[:, col] = lindblad_rhs(unit, H, channels).ravel()
        unit.flat[col] = 0.0
    return gen


def default_dt_max(params: ProtocolParams, layout: HilbertLayout) -> float:
    """Step cap resolving the fastest sideband swap and the repump time."""
    root_n = math.sqrt(layout.n_max)
    fastest = max(
        params.omega_ba * root_n,
        params.omega_bq * root_n,
        params.omega_c,
        params.omega_res,
        1.0 / params.t_rep,
    )
    return 1.0 / (10.0 * fastest)


# --- Observables ---


def _symmetrize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def trajectory_populations(
    rho: np.ndarray, layout: HilbertLayout
) -> tuple[float, float, float, float, float]:
    """(P_dd, P_uu, P_S, P_T, P_leak) with the motion traced out."""
    internal = internal_state(rho, layout)
    diag = np.real(np.diag(internal)).reshape(LEVELS_PER_ION, LEVELS_PER_ION)
    d, u, leak = Level.DOWN.index, Level.UP.index, Level.LEAK.index
    ud, du = u * LEVELS_PER_ION + d, d * LEVELS_PER_ION + u
    coherence = np.real(internal[ud, du])
    mixed = diag[u, d] + diag[d, u]
    p_leak = float(diag[leak, :].sum() + diag[:, leak].sum() - diag[leak, leak])
    return (
        float(diag[d, d]),
        float(diag[u, u]),
        float(0.5 * mixed - coherence),
        float(0.5 * mixed + coherence),
        p_leak,
    )


def _top_population(rho: np.ndarray, layout: HilbertLayout) -> float:
    return float(fock_populations(rho, layout)[max(0, layout.n_max - 2) :].sum())


def reset_motion(rho: np.ndarray, layout: HilbertLayout) -> np.ndarray:
    """Keep the internal marginal and put the motion back in its ground state."""
    ground = np.zeros((layout.n_levels, layout.n_levels), dtype=complex)
    ground[0, 0] = 1.0
    return np.kron(internal_state(rho, layout), ground)


def plateau_fidelity(
    traj: Trajectory, window: tuple[float, float] = DEFAULT_PLATEAU_WINDOW
) -> float:
    """Mean fidelity over samples with ``window[0] <= t <= window[1]`` (seconds)."""
    lo, hi = window
    times = np.asarray(traj.times)
    picked = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    if not picked.any():
        raise ValueError(f"no trajectory samples inside plateau window [{lo}, {hi}] s")
    return float(np.mean(np.asarray(traj.fidelities)[picked]))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return float(0.5 * np.abs(np.linalg.eigvalsh(_symmetrize(rho - sigma))).sum())


# --- Integration ---


class _Recorder:
    def __init__(self, layout: HilbertLayout, target: np.ndarray, positivity_stride: int) -> None:
        self.layout = layout
        self.target = target
        self.stride = positivity_stride
        self.times: list[float] = []
        self.fidelities: list[float] = []
        self.phonons: list[float] = []
        self.populations: list[tuple[float, float, float, float, float]] = []
        self.diag = Diagnostics()

    def record(self, t: float, rho: np.ndarray, force_positivity: bool = False) -> None:
        self.times.append(float(t))
        self.fidelities.append(fidelity(rho, self.target))
        self.phonons.append(mean_phonon(rho, self.layout))
        self.populations.append(trajectory_populations(rho, self.layout))

        d = self.diag
        d.max_trace_error = max(d.max_trace_error, abs(np.trace(rho) - 1.0))
        herm = float(np.abs(rho - rho.conj().T).max())
        d.max_hermiticity_error = max(d.max_hermiticity_error, herm)
        top = _top_population(rho, self.layout)
        d.max_top_population = max(d.max_top_population, top)
        if force_positivity or (len(self.times) - 1) % self.stride == 0:
            lowest = float(np.linalg.eigvalsh(_symmetrize(rho))[0])
            d.min_eigenvalue = min(d.min_eigenvalue, lowest)
            if lowest < POSITIVITY_ABORT:
                raise EvolutionError(
                    f"positivity violated at t={t:.6g} s (min eigenvalue {lowest:.3e})",
                    {"time": float(t), "min_eigenvalue": lowest, **d.model_dump()},
                )

    def finish(self, final_state: np.ndarray) -> Trajectory:
        d = self.diag
        if d.max_top_population >= TOP_RUNG_LIMIT:
            d.truncation_flag = True
            logger.warning(
                "fock truncation inadequate top_population=%.3e n_max=%d",
                d.max_top_population,
                self.layout.n_max,
            )
        return Trajectory(
            times=self.times,
            fidelities=self.fidelities,
            mean_phonons=self.phonons,
            populations=self.populations,
            final_state=final_state,
            diagnostics=d,
        )


def _rk4_step(
    rho: np.ndarray, h: float, H: sp.spmatrix | np.ndarray, channels: ChannelSet | None
) -> np.ndarray:
    k1 = lindblad_rhs(rho, H, channels)
    k2 = lindblad_rhs(rho + 0.5 * h * k1, H, channels)
    k3 = lindblad_rhs(rho + 0.5 * h * k2, H, channels)
    k4 = lindblad_rhs(rho + h * k3, H, channels)
    return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _evolve_rk4(
    rho: np.ndarray,
    H: sp.spmatrix | np.ndarray,
    channels: ChannelSet | None,
    samples: np.ndarray,
    dt_max: float,
    rec: _Recorder,
) -> np.ndarray:
    t = 0.0
    for t_next in samples:
        span = t_next - t
        if span > 0:
            n_steps = max(1, math.ceil(span / dt_max - 1e-9))
            h = span / n_steps
            for _ in range(n_steps):
                rho = _symmetrize(_rk4_step(rho, h, H, channels))
            rec.diag.steps += n_steps
        t = t_next
        rec.record(t, rho)
    return rho


def _evolve_adaptive(
    rho: np.ndarray,
    H: sp.spmatrix | np.ndarray,
    channels: ChannelSet | None,
    samples: np.ndarray,
    config: EvolutionConfig,
    dt_max: float,
    rec: _Recorder,
) -> np.ndarray:
    dim = rho.shape[0]

    def fun(_t: float, y: np.ndarray) -> np.ndarray:
        return lindblad_rhs(y.reshape(dim, dim), H, channels).ravel()

    pending = [t for t in samples if t > 0]
    for t in samples:
        if t <= 0:
            rec.record(0.0, rho)
    if not pending:
        return rho

    solver = RK45(
        fun,
        0.0,
        rho.ravel().copy(),
        t_bound=float(samples[-1]),
        max_step=dt_max,
        rtol=config.rel_tol,
        atol=config.abs_tol,
    )
    idx = 0
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise EvolutionError(
                f"step size underflow at t={solver.t:.6g} s: {message}",
                {"time": float(solver.t), "step": float(solver.step_size or 0.0)},
            )
        solver.y = _symmetrize(solver.y.reshape(dim, dim)).ravel()
        rec.diag.steps += 1
        if idx < len(pending) and pending[idx] <= solver.t:
            interp = solver.dense_output()
            while idx < len(pending) and pending[idx] <= solver.t:
                t = pending[idx]
                state = solver.y if t == solver.t else interp(t)
                rec.record(t, _symmetrize(state.reshape(dim, dim)))
                idx += 1
    return _symmetrize(solver.y.reshape(dim, dim))


def evolve(
    rho0: np.ndarray,
    H: sp.spmatrix | np.ndarray,
    channels: ChannelSet,
    config: EvolutionConfig,
    target: np.ndarray | None = None,
    dt_max: float | None = None,
    positivity_stride: int = 10,
) -> Trajectory:
    """Integrate from t=0 and sample the configured grid.

    ``dt_max`` (seconds) is used when the config does not set one.
    """
    layout = channels.layout
    dim = layout.total_dim
    if rho0.shape != (dim, dim):
        raise ValueError(f"initial state shape {rho0.shape} does not match dimension {dim}")
    if abs(np.trace(rho0) - 1.0) > 1e-9:
        raise ValueError(f"initial state trace {np.trace(rho0).real:.12f} is not 1")
    if target is None:
        target = singlet_state(layout, 0)

    samples = config.sample_grid()
    step_cap = config.dt_max or dt_max or config.t_final / 1000.0
    rec = _Recorder(layout, target, positivity_stride)
    rho = _symmetrize(np.asarray(rho0, dtype=complex))

    logger.debug(
        "evolve start integrator=%s dim=%d t_final=%.4g dt_max=%.3g elements=%d",
        config.integrator,
        dim,
        config.t_final,
        step_cap,
        len(channels),
    )
    if config.integrator == "rk4":
        final = _evolve_rk4(rho, H, channels, samples, step_cap, rec)
    else:
        final = _evolve_adaptive(rho, H, channels, samples, config, step_cap, rec)

    lowest = float(np.linalg.eigvalsh(final)[0])
    rec.diag.min_eigenvalue = min(rec.diag.min_eigenvalue, lowest)
    if lowest < POSITIVITY_ABORT:
        raise EvolutionError(
            f"positivity violated at t_final (min eigenvalue {lowest:.3e})",
            {"time": config.t_final, "min_eigenvalue": lowest},
        )
    traj = rec.finish(final)
    logger.info(
        "evolve done t_final=%.4g steps=%d final_fidelity=%.6f trace_err=%.2e",
        config.t_final,
        traj.diagnostics.steps,
        traj.fidelities[-1],
        traj.diagnostics.max_trace_error,
    )
    return traj


def product_state(layout: HilbertLayout, s1: Level, s2: Level, n: int = 0) -> np.ndarray:
    rho = np.zeros((layout.total_dim, layout.total_dim), dtype=complex)
    i = layout.index(s1, s2, n)
    rho[i, i] = 1.0
    return rho


def singlet_density(layout: HilbertLayout, n: int = 0) -> np.ndarray:
    psi = singlet_state(layout, n)
    return np.outer(psi, psi.conj())


__all__ = [
    "DEFAULT_PLATEAU_WINDOW",
    "Diagnostics",
    "EvolutionError",
    "INTERNAL_DIM",
    "Trajectory",
    "trajectory_populations",
    "default_dt_max",
    "dense_generator",
    "evolve",
    "lindblad_rhs",
    "plateau_fidelity",
    "product_state",
    "reset_motion",
    "singlet_density",
    "trace_distance",
]
