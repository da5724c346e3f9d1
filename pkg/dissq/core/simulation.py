"""Assemble a full protocol run: layout, Hamiltonian, channels, initial state and evolution."""

import logging
import math

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict

from dissq.core.dissipation import (
    ChannelSet,
    RecoilGeometry,
    raman_channels,
    rayleigh_channels,
    repump_channels,
)
from dissq.core.hamiltonians import total_hamiltonian
from dissq.core.hilbert import HilbertLayout, build_layout, fidelity, singlet_state
from dissq.core.lindblad import (
    Trajectory,
    default_dt_max,
    evolve,
    product_state,
    reset_motion,
    singlet_density,
)
from dissq.models import EvolutionConfig, Level, NumericsConfig, ProtocolParams, RateTable

logger = logging.getLogger(__name__)


class SimulationSetup(BaseModel):
    """Everything ``evolve`` needs for one protocol configuration."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: ProtocolParams
    layout: HilbertLayout
    hamiltonian: sp.spmatrix
    channels: ChannelSet
    dt_max: float


def recoil_geometry(
    params: ProtocolParams, numerics: NumericsConfig, recoil: bool = True
) -> RecoilGeometry:
    """Recoil dressing of the channels; ``recoil=False`` gives kick-free jumps."""
    return RecoilGeometry(
        eta=params.eta if recoil else 0.0,
        n_theta=numerics.quadrature_nodes,
        n_phi=numerics.quadrature_nodes,
        series_order=numerics.series_order,
        method=numerics.dissipator,
    )


def protocol_with_rates(params: ProtocolParams, rates: RateTable) -> ProtocolParams:
    """Take sideband and residual strengths from a rate table where it provides them."""
    update: dict[str, object] = {}
    if rates.omega_bq_hz > 0:
        update["omega_bq_hz"] = rates.omega_bq_hz
    if rates.omega_ba_hz > 0:
        update["omega_ba_hz"] = rates.omega_ba_hz
    if rates.omega_res_hz > 0:
        update["omega_res_hz"] = rates.omega_res_hz
    return params.model_copy(update=update)


def build_channels(
    params: ProtocolParams,
    rates: RateTable | None,
    geom: RecoilGeometry,
    layout: HilbertLayout,
    repump_axial_k: float,
) -> ChannelSet:
    recoil = rates is None or rates.repump_recoil
    channels = repump_channels(params, geom, layout, repump_axial_k, recoil=recoil)
    if rates is not None:
        if rates.raman_rates:
            channels = channels + raman_channels(rates.raman_rates, geom, layout)
        if rates.rayleigh_rate_per_s > 0:
            channels = channels + rayleigh_channels(
                rates.rayleigh_rate_per_s, geom, layout, rates.rayleigh_polarization_mix
            )
    return channels


def build_setup(
    params: ProtocolParams,
    rates: RateTable | None,
    numerics: NumericsConfig,
    recoil: bool = True,
) -> SimulationSetup:
    layout = build_layout(numerics.n_max)
    geom = recoil_geometry(params, numerics, recoil)
    channels = build_channels(params, rates, geom, layout, numerics.repump_axial_k)
    return SimulationSetup(
        params=params,
        layout=layout,
        hamiltonian=total_hamiltonian(params, layout),
        channels=channels,
        dt_max=default_dt_max(params, layout),
    )


def initial_density(kind: str, layout: HilbertLayout) -> np.ndarray:
    if kind == "down_down":
        return product_state(layout, Level.DOWN, Level.DOWN, 0)
    if kind == "singlet":
        return singlet_density(layout, 0)
    raise ValueError(f"unknown initial state {kind!r}")


def simulate(
    params: ProtocolParams,
    rates: RateTable | None,
    numerics: NumericsConfig,
    evolution: EvolutionConfig | None = None,
    rho0: np.ndarray | None = None,
    recoil: bool = True,
) -> Trajectory:
    """Evolve the protocol from the configured initial state over the configured grid."""
    setup = build_setup(params, rates, numerics, recoil)
    if rho0 is None:
        rho0 = initial_density(numerics.initial_state, setup.layout)
    return evolve(
        rho0,
        setup.hamiltonian,
        setup.channels,
        evolution or numerics.evolution,
        dt_max=setup.dt_max,
    )


def states_at(
    params: ProtocolParams,
    rates: RateTable | None,
    numerics: NumericsConfig,
    times: list[float],
    recoil: bool = True,
) -> list[np.ndarray]:
    """Full density matrices at increasing ``times`` (seconds), evolving between them."""
    if any(t < 0 for t in times) or any(b <= a for a, b in zip(times, times[1:], strict=False)):
        raise ValueError("times must be non-negative and strictly increasing")
    setup = build_setup(params, rates, numerics, recoil)
    rho = initial_density(numerics.initial_state, setup.layout)
    states = []
    now = 0.0
    for t in times:
        if t > now:
            segment = EvolutionConfig(
                t_final_ms=(t - now) * 1e3,
                n_samples=2,
                abs_tol=numerics.evolution.abs_tol,
                rel_tol=numerics.evolution.rel_tol,
                integrator=numerics.evolution.integrator,
            )
            traj = evolve(rho, setup.hamiltonian, setup.channels, segment, dt_max=setup.dt_max)
            rho = traj.final_state / np.trace(traj.final_state).real
            now = t
        states.append(rho)
    return states


def window_seconds(numerics: NumericsConfig) -> tuple[float, float]:
    start, stop = numerics.plateau_window_ms
    return start * 1e-3, stop * 1e-3


def concatenate(segments: list[Trajectory]) -> Trajectory:
    """Join consecutive trajectories; each later segment starts where the previous ended."""
    first = segments[0]
    times, fids, phonons, pops = (
        list(first.times),
        list(first.fidelities),
        list(first.mean_phonons),
        list(first.populations),
    )
    diagnostics = first.diagnostics
    for seg in segments[1:]:
        times.extend(seg.times[1:])
        fids.extend(seg.fidelities[1:])
        phonons.extend(seg.mean_phonons[1:])
        pops.extend(seg.populations[1:])
        diagnostics = diagnostics.merge(seg.diagnostics)
    return Trajectory(
        times=times,
        fidelities=fids,
        mean_phonons=phonons,
        populations=pops,
        final_state=segments[-1].final_state,
        diagnostics=diagnostics,
    )


def steady_state(
    params: ProtocolParams,
    rates: RateTable | None,
    numerics: NumericsConfig,
    recoil: bool = True,
    chunk_repumps: int = 40,
    tolerance: float = 1e-5,
    max_chunks: int = 50,
) -> tuple[Trajectory, bool]:
    """Evolve in chunks until the relative fidelity drift per repump time is below ``tolerance``.

    Samples are one repump time apart. Returns the whole trajectory and whether the
    drift criterion was met.
    """
    if chunk_repumps < 2:
        raise ValueError(f"chunk_repumps must be at least 2, got {chunk_repumps}")
    setup = build_setup(params, rates, numerics, recoil)
    rho = initial_density(numerics.initial_state, setup.layout)
    span = chunk_repumps * params.t_rep
    chunk = EvolutionConfig(
        t_final_ms=span * 1e3,
        sample_times_ms=np.linspace(0.0, span * 1e3, chunk_repumps + 1).tolist(),
        abs_tol=numerics.evolution.abs_tol,
        rel_tol=numerics.evolution.rel_tol,
        integrator=numerics.evolution.integrator,
    )
    segments: list[Trajectory] = []
    converged = False
    for k in range(max_chunks):
        traj = evolve(rho, setup.hamiltonian, setup.channels, chunk, dt_max=setup.dt_max)
        segments.append(traj.shifted(k * span))
        rho = traj.final_state / np.trace(traj.final_state).real
        before, after = traj.fidelities[-2], traj.fidelities[-1]
        if abs(after - before) <= tolerance * max(after, 1e-12):
            converged = True
            break
    if not converged:
        logger.warning("steady state not reached elapsed_s=%.4g", len(segments) * span)
    return concatenate(segments), converged


def time_to_plateau(traj: Trajectory, fraction: float = 0.95) -> float:
    """First sample time at which the fidelity has covered ``fraction`` of its total rise."""
    fids = np.asarray(traj.fidelities)
    threshold = fids[0] + fraction * (fids[-1] - fids[0])
    reached = np.nonzero(fids >= threshold)[0]
    return float(traj.times[reached[0]])


class InterleaveTrace(BaseModel):
    times: list[float]
    fidelity_before_reset: list[float]
    fidelity_after_reset: list[float]
    phonons_before_reset: list[float]


def interleaved_reset(
    params: ProtocolParams,
    rates: RateTable | None,
    numerics: NumericsConfig,
    reset_period: float,
    n_periods: int,
    recoil: bool = True,
) -> InterleaveTrace:
    """Alternate evolution segments of ``reset_period`` seconds with a motional reset."""
    if reset_period <= 0:
        raise ValueError(f"reset period must be positive, got {reset_period}")
    setup = build_setup(params, rates, numerics, recoil)
    target = singlet_state(setup.layout, 0)
    rho = initial_density(numerics.initial_state, setup.layout)
    segment = EvolutionConfig(
        t_final_ms=reset_period * 1e3,
        n_samples=2,
        abs_tol=numerics.evolution.abs_tol,
        rel_tol=numerics.evolution.rel_tol,
        integrator=numerics.evolution.integrator,
    )
    trace = InterleaveTrace(
        times=[], fidelity_before_reset=[], fidelity_after_reset=[], phonons_before_reset=[]
    )
    for k in range(n_periods):
        traj = evolve(rho, setup.hamiltonian, setup.channels, segment, dt_max=setup.dt_max)
        rho = reset_motion(traj.final_state, setup.layout)
        rho /= np.trace(rho).real
        trace.times.append((k + 1) * reset_period)
        trace.fidelity_before_reset.append(traj.fidelities[-1])
        trace.fidelity_after_reset.append(fidelity(rho, target))
        trace.phonons_before_reset.append(traj.mean_phonons[-1])
    return trace


def periods_to_cover(window_end: float, reset_period: float) -> int:
    return max(1, math.ceil(window_end / reset_period))


__all__ = [
    "InterleaveTrace",
    "SimulationSetup",
    "build_channels",
    "build_setup",
    "concatenate",
    "initial_density",
    "interleaved_reset",
    "periods_to_cover",
    "protocol_with_rates",
    "recoil_geometry",
    "simulate",
    "states_at",
    "steady_state",
    "time_to_plateau",
    "window_seconds",
]
