"""Parameter studies of the protocol: large-detuning optimum, sensitivity scans,
Lamb-Dicke sweeps, interleaved motional resets and the finite-detuning error budget."""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import minimize
from scipy.stats import qmc

from dissq.core.lindblad import Trajectory, plateau_fidelity
from dissq.core.simulation import (
    interleaved_reset,
    periods_to_cover,
    simulate,
    steady_state,
    time_to_plateau,
    window_seconds,
)
from dissq.models import (
    BudgetCaseName,
    ControlPoint,
    NumericsConfig,
    OptResult,
    OptSpace,
    ProtocolParams,
)
from dissq.providers.presets import (
    LARGE_DETUNING_OPTIMUM,
    STRETCH_ETA,
    large_detuning_rates,
    preset_protocol,
    preset_rates,
    protocol_from_point,
)

logger = logging.getLogger(__name__)

PHI_ERROR_RAD = 0.05
RABI_IMBALANCE = 0.017
SLOW_REPUMP_US = 51.0
MIN_BUDGET = 100

Objective = Callable[[ControlPoint], float]


# --- Objective ---


def _clip_point(x: np.ndarray, space: OptSpace) -> ControlPoint:
    lo, hi = np.array(space.bounds).T
    return ControlPoint(**dict(zip(space.names, np.clip(x, lo, hi).tolist(), strict=True)))


def steady_run(
    point: ControlPoint,
    eta: float,
    numerics: NumericsConfig,
    space: OptSpace | None = None,
    ideal: bool = False,
) -> tuple[Trajectory, bool]:
    """Steady-state trajectory of the large-detuning protocol at ``point``.

    ``ideal`` drops Rayleigh scattering and the repump recoil.
    """
    space = space or OptSpace()
    params = protocol_from_point(point, eta, space.r_pi, space.p_blue_fraction)
    rates = None if ideal else large_detuning_rates(point, eta, space.r_pi, space.p_blue_fraction)
    return steady_state(params, rates, numerics, recoil=not ideal)


def steady_fidelity_objective(
    point: ControlPoint,
    eta: float,
    numerics: NumericsConfig,
    mode: str = "steady",
    space: OptSpace | None = None,
    ideal: bool = False,
) -> float:
    """Singlet fidelity the protocol settles to at ``point``.

    ``steady`` evolves until the fidelity stops drifting; ``fixed`` averages the
    configured plateau window of the configured horizon.
    """
    if mode == "steady":
        traj, converged = steady_run(point, eta, numerics, space, ideal)
        if not converged:
            logger.warning("objective not converged point=%s eta=%.4g", point.as_vector(), eta)
        return traj.fidelities[-1]
    if mode == "fixed":
        space = space or OptSpace()
        params = protocol_from_point(point, eta, space.r_pi, space.p_blue_fraction)
        rates = None
        if not ideal:
            rates = large_detuning_rates(point, eta, space.r_pi, space.p_blue_fraction)
        traj = simulate(params, rates, numerics, recoil=not ideal)
        return plateau_fidelity(traj, window_seconds(numerics))
    raise ValueError(f"unknown objective mode {mode!r}; expected 'steady' or 'fixed'")


# --- Large-detuning search ---


class _StartResult(BaseModel):
    x: list[float]
    fidelity: float
    evaluations: list[float]
    success: bool


def sobol_starts(space: OptSpace, n_starts: int, seed: int) -> np.ndarray:
    """``n_starts`` scrambled Sobol points scaled into the search box."""
    sampler = qmc.Sobol(d=len(space.names), scramble=True, seed=seed)
    unit = sampler.random_base2(max(0, math.ceil(math.log2(n_starts))))[:n_starts]
    lo, hi = np.array(space.bounds).T
    return qmc.scale(unit, lo, hi)


def _run_start(
    x0: np.ndarray, objective: Objective, space: OptSpace, maxfev: int
) -> _StartResult:
    evaluations: list[float] = []

    def negative(x: np.ndarray) -> float:
        value = objective(_clip_point(x, space))
        evaluations.append(value)
        return -value

    res = minimize(
        negative,
        x0,
        method="Nelder-Mead",
        bounds=space.bounds,
        options={"maxfev": maxfev, "xatol": 1e-3, "fatol": 1e-6},
    )
    return _StartResult(
        x=np.asarray(res.x).tolist(),
        fidelity=-float(res.fun),
        evaluations=evaluations,
        success=bool(res.success),
    )


def optimize_large_detuning(
    eta: float,
    numerics: NumericsConfig,
    space: OptSpace | None = None,
    budget: int = 800,
    n_starts: int = 8,
    mode: str = "steady",
    seed: int = 0,
    threads: int = 1,
) -> OptResult:
    """Multi-start bounded Nelder-Mead over the large-detuning control space.

    The evaluation budget is split evenly across the starts. The convergence trace
    is the best-so-far fidelity over all evaluations, starts taken in order.
    """
    if budget < MIN_BUDGET:
        raise ValueError(f"budget must be at least {MIN_BUDGET} evaluations, got {budget}")
    if n_starts < 1:
        raise ValueError(f"n_starts must be at least 1, got {n_starts}")
    space = space or OptSpace()
    maxfev = max(budget // n_starts, 2 * len(space.names) + 2)
    starts = sobol_starts(space, n_starts, seed)

    def objective(point: ControlPoint) -> float:
        return steady_fidelity_objective(point, eta, numerics, mode, space)

    def run(x0: np.ndarray) -> _StartResult:
        return _run_start(x0, objective, space, maxfev)

    logger.info(
        "optimize start eta=%.4g budget=%d starts=%d threads=%d", eta, budget, n_starts, threads
    )
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, starts))

    for k, r in enumerate(results):
        if not r.success:
            logger.warning("simplex start did not converge start=%d fidelity=%.6f", k, r.fidelity)
    best = max(results, key=lambda r: r.fidelity)
    evaluations = [v for r in results for v in r.evaluations]
    trace = np.maximum.accumulate(np.asarray(evaluations)).tolist()
    result = OptResult(
        best_params=_clip_point(np.asarray(best.x), space),
        best_fidelity=min(1.0, max(0.0, best.fidelity)),
        evaluation_count=len(evaluations),
        convergence_trace=trace,
        converged=best.success,
    )
    logger.info(
        "optimize done best_fidelity=%.6f evaluations=%d converged=%s",
        result.best_fidelity,
        result.evaluation_count,
        result.converged,
    )
    return result


def central_gradient(
    fn: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-3
) -> np.ndarray:
    """Central-difference gradient of ``fn`` per unit of each coordinate."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = step
        grad[i] = (fn(x + dx) - fn(x - dx)) / (2.0 * step)
    return grad


class ScanPoint(BaseModel):
    factor: float
    value: float
    fidelity: float


def sensitivity_scan(
    param: str,
    factors: list[float],
    eta: float,
    numerics: NumericsConfig,
    base: ControlPoint = LARGE_DETUNING_OPTIMUM,
    mode: str = "steady",
    space: OptSpace | None = None,
) -> list[ScanPoint]:
    """Scale one control of ``base`` by each factor, holding the others fixed."""
    space = space or OptSpace()
    if param not in space.names:
        raise ValueError(f"unknown control parameter {param!r}; expected one of {space.names}")
    lo, hi = getattr(space, param)
    scan = []
    for factor in factors:
        value = float(np.clip(getattr(base, param) * factor, lo, hi))
        point = base.model_copy(update={param: value})
        fid = steady_fidelity_objective(point, eta, numerics, mode, space)
        logger.debug("sensitivity param=%s factor=%.3g fidelity=%.6f", param, factor, fid)
        scan.append(ScanPoint(factor=factor, value=value, fidelity=fid))
    return scan


# --- Lamb-Dicke sweep ---


class EtaPoint(BaseModel):
    eta: float
    fidelity: float
    error: float
    time_to_plateau_s: float
    omega_c_ratio: float
    t_rep_ratio: float
    converged: bool


def _reoptimize_timing(
    eta: float, base: ControlPoint, numerics: NumericsConfig, space: OptSpace, budget: int
) -> ControlPoint:
    """Re-tune the carrier ratio and repump time at fixed polarizations."""
    bounds = [space.omega_c_ratio, space.t_rep_ratio]

    def negative(x: np.ndarray) -> float:
        point = base.model_copy(update={"omega_c_ratio": x[0], "t_rep_ratio": x[1]})
        return -steady_fidelity_objective(point, eta, numerics, "steady", space)

    res = minimize(
        negative,
        [base.omega_c_ratio, base.t_rep_ratio],
        method="Nelder-Mead",
        bounds=bounds,
        options={"maxfev": budget, "xatol": 1e-3, "fatol": 1e-6},
    )
    if not res.success:
        logger.warning("timing re-optimization hit its budget eta=%.4g", eta)
    omega_c_ratio, t_rep_ratio = np.clip(res.x, *np.array(bounds).T)
    return base.model_copy(
        update={"omega_c_ratio": float(omega_c_ratio), "t_rep_ratio": float(t_rep_ratio)}
    )


def eta_sweep(
    etas: list[float],
    numerics: NumericsConfig,
    mode: str = "reoptimize",
    base: ControlPoint = LARGE_DETUNING_OPTIMUM,
    budget: int = 120,
    space: OptSpace | None = None,
    threads: int = 1,
) -> list[EtaPoint]:
    """Steady-state error per Lamb-Dicke parameter.

    ``fixed`` keeps every control at ``base``; ``reoptimize`` re-tunes the carrier
    ratio and repump time per eta with the polarizations frozen at ``base``.
    """
    if not etas or any(not 0 < e <= 0.3 for e in etas):
        raise ValueError("etas must be a non-empty list in (0, 0.3]")
    if mode not in ("fixed", "reoptimize"):
        raise ValueError(f"unknown eta sweep mode {mode!r}; expected 'fixed' or 'reoptimize'")
    space = space or OptSpace()

    def one(eta: float) -> EtaPoint:
        point = base
        if mode == "reoptimize":
            point = _reoptimize_timing(eta, base, numerics, space, budget)
        traj, converged = steady_run(point, eta, numerics, space)
        fid = traj.fidelities[-1]
        logger.info("eta sweep eta=%.4g error=%.3e converged=%s", eta, 1.0 - fid, converged)
        return EtaPoint(
            eta=eta,
            fidelity=fid,
            error=1.0 - fid,
            time_to_plateau_s=time_to_plateau(traj),
            omega_c_ratio=point.omega_c_ratio,
            t_rep_ratio=point.t_rep_ratio,
            converged=converged,
        )

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(one, etas))


# --- Interleaved cooling ---


class CoolingResult(BaseModel):
    reset_period_s: float
    n_periods: int
    fidelity: float
    fidelity_after_reset: float
    mean_phonons_before_reset: float
    baseline_fidelity: float
    baseline_mean_phonons: float
    baseline_converged: bool


def cooling_interleave(
    numerics: NumericsConfig,
    point: ControlPoint = LARGE_DETUNING_OPTIMUM,
    eta: float = STRETCH_ETA,
    reset_period: float | None = None,
    n_periods: int | None = None,
    space: OptSpace | None = None,
) -> CoolingResult:
    """Large-detuning protocol with the motion reset to its ground state periodically.

    The reset period defaults to one aux sideband period. ``fidelity`` averages the
    fidelity just before each reset inside the plateau window, the lowest point of each
    cycle; the baseline is the reset-free steady state.
    """
    space = space or OptSpace()
    params = protocol_from_point(point, eta, space.r_pi, space.p_blue_fraction)
    rates = large_detuning_rates(point, eta, space.r_pi, space.p_blue_fraction)
    if reset_period is None:
        reset_period = 2.0 * math.pi / params.omega_ba
    if reset_period <= 0:
        raise ValueError(f"reset period must be positive, got {reset_period}")
    start, stop = window_seconds(numerics)
    periods = n_periods or periods_to_cover(stop, reset_period)
    trace = interleaved_reset(params, rates, numerics, reset_period, periods)

    times = np.asarray(trace.times)
    picked = (times >= start - 1e-12) & (times <= stop + 1e-12)
    if not picked.any():
        picked = times == times[-1]
    baseline, converged = steady_state(params, rates, numerics)
    result = CoolingResult(
        reset_period_s=reset_period,
        n_periods=periods,
        fidelity=float(np.mean(np.asarray(trace.fidelity_before_reset)[picked])),
        fidelity_after_reset=float(np.mean(np.asarray(trace.fidelity_after_reset)[picked])),
        mean_phonons_before_reset=float(np.mean(np.asarray(trace.phonons_before_reset)[picked])),
        baseline_fidelity=baseline.fidelities[-1],
        baseline_mean_phonons=baseline.mean_phonons[-1],
        baseline_converged=converged,
    )
    logger.info(
        "cooling interleave reset_period_s=%.4g fidelity=%.6f baseline=%.6f",
        reset_period,
        result.fidelity,
        result.baseline_fidelity,
    )
    return result


# --- Finite-detuning error budget ---


class _BudgetCase(BaseModel):
    preset: str
    ideal: bool = False
    residual: bool = True
    overrides: dict[str, float] = Field(default_factory=dict)


BUDGET_CASES: dict[BudgetCaseName, _BudgetCase] = {
    "nominal_315": _BudgetCase(preset="detuning_315"),
    "phi_error_315": _BudgetCase(
        preset="detuning_315", overrides={"phi_rad": math.pi + PHI_ERROR_RAD}
    ),
    "slow_repump_315": _BudgetCase(preset="detuning_315", overrides={"t_rep_us": SLOW_REPUMP_US}),
    "nominal_450": _BudgetCase(preset="detuning_450"),
    "phi_only": _BudgetCase(
        preset="detuning_450",
        ideal=True,
        residual=False,
        overrides={"phi_rad": math.pi + PHI_ERROR_RAD},
    ),
    "imbalance_only": _BudgetCase(
        preset="detuning_450",
        ideal=True,
        residual=False,
        overrides={"rabi_imbalance": RABI_IMBALANCE},
    ),
    "residual_only_315": _BudgetCase(preset="detuning_315", ideal=True),
    "residual_only_450": _BudgetCase(preset="detuning_450", ideal=True),
}


class BudgetRow(BaseModel):
    case: str
    plateau_fidelity: float
    peak_fidelity: float
    infidelity: float


def error_budget(case: str, numerics: NumericsConfig) -> BudgetRow:
    """Run one finite-detuning configuration with a named set of error sources.

    Ideal cases drop scattering and recoil and keep only the named imperfection.
    """
    if case not in BUDGET_CASES:
        raise ValueError(
            f"unknown error-budget case {case!r}; expected one of {list(BUDGET_CASES)}"
        )
    spec = BUDGET_CASES[case]
    params = preset_protocol(spec.preset, with_residual=spec.residual)
    if spec.overrides:
        params = ProtocolParams.model_validate({**params.model_dump(), **spec.overrides})
    rates = None if spec.ideal else preset_rates(spec.preset)
    traj = simulate(params, rates, numerics, recoil=not spec.ideal)
    plateau = plateau_fidelity(traj, window_seconds(numerics))
    logger.info("error budget case=%s plateau_fidelity=%.6f", case, plateau)
    return BudgetRow(
        case=case,
        plateau_fidelity=plateau,
        peak_fidelity=max(traj.fidelities),
        infidelity=1.0 - plateau,
    )


__all__ = [
    "BUDGET_CASES",
    "BudgetRow",
    "CoolingResult",
    "EtaPoint",
    "ScanPoint",
    "central_gradient",
    "cooling_interleave",
    "error_budget",
    "eta_sweep",
    "optimize_large_detuning",
    "sensitivity_scan",
    "sobol_starts",
    "steady_fidelity_objective",
    "steady_run",
]
