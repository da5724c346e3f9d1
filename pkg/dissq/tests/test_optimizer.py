import math

import numpy as np
import pytest

from dissq.core.lindblad import Trajectory
from dissq.core.simulation import InterleaveTrace
from dissq.models import (
    ControlPoint,
    ErrorBudgetOptions,
    EvolutionConfig,
    NumericsConfig,
    OptSpace,
    ProtocolParams,
    RateTable,
)
from dissq.optimizer import optimizer
from dissq.optimizer.optimizer import (
    BUDGET_CASES,
    cooling_interleave,
    error_budget,
    eta_sweep,
    optimize_large_detuning,
    sensitivity_scan,
    sobol_starts,
    steady_fidelity_objective,
)
from dissq.providers.presets import LARGE_DETUNING_OPTIMUM, STRETCH_ETA

# --- Fixtures for testing ---

PEAK = LARGE_DETUNING_OPTIMUM.as_vector()


def quadratic_objective(point: ControlPoint, *args: object, **kwargs: object) -> float:
    return 0.989 - 0.1 * float(np.sum((point.as_vector() - PEAK) ** 2))


def fake_trajectory(fidelity: float, times: list[float] | None = None) -> Trajectory:
    times = times or [0.0, 1e-3, 2e-3, 3e-3]
    rise = [fidelity * (1.0 - math.exp(-t / 5e-4)) for t in times[:-1]] + [fidelity]
    return Trajectory(
        times=times,
        fidelities=rise,
        mean_phonons=[0.0] * len(times),
        populations=[(0.0, 0.0, f, 0.0, 0.0) for f in rise],
        final_state=np.eye(1, dtype=complex),
    )


@pytest.fixture
def fast_objective(monkeypatch: pytest.MonkeyPatch) -> None:
    """Replaces the simulated objective with a quadratic peaked at the known optimum."""
    monkeypatch.setattr(optimizer, "steady_fidelity_objective", quadratic_objective)


@pytest.fixture
def numerics() -> NumericsConfig:
    """Provides a two-phonon truncation with a 1 ms horizon."""
    return NumericsConfig(
        n_max=2,
        quadrature_nodes=8,
        plateau_window_ms=(0.5, 1.0),
        evolution=EvolutionConfig(t_final_ms=1.0, n_samples=11),
    )


# --- Test cases for steady_fidelity_objective ---


def test_unknown_objective_mode(numerics: NumericsConfig) -> None:
    with pytest.raises(ValueError, match="unknown objective mode"):
        steady_fidelity_objective(LARGE_DETUNING_OPTIMUM, STRETCH_ETA, numerics, mode="peak")


def test_fixed_mode_is_deterministic(numerics: NumericsConfig) -> None:
    first = steady_fidelity_objective(LARGE_DETUNING_OPTIMUM, STRETCH_ETA, numerics, "fixed")
    second = steady_fidelity_objective(LARGE_DETUNING_OPTIMUM, STRETCH_ETA, numerics, "fixed")
    assert first == second
    assert 0.0 <= first <= 1.0


# --- Test cases for optimize_large_detuning ---


def test_sobol_starts_inside_box() -> None:
    space = OptSpace()
    starts = sobol_starts(space, 6, seed=3)
    lo, hi = np.array(space.bounds).T
    assert starts.shape == (6, 5)
    assert np.all((starts >= lo) & (starts <= hi))
    assert np.array_equal(starts, sobol_starts(space, 6, seed=3))


def test_optimizer_finds_peak(fast_objective: None, numerics: NumericsConfig) -> None:
    result = optimize_large_detuning(STRETCH_ETA, numerics, budget=4000, n_starts=4)
    assert result.best_fidelity == pytest.approx(0.989, abs=1e-4)
    assert result.best_params.as_vector() == pytest.approx(PEAK, abs=0.02)
    assert result.converged


def test_convergence_trace_is_monotone(fast_objective: None, numerics: NumericsConfig) -> None:
    result = optimize_large_detuning(STRETCH_ETA, numerics, budget=400, n_starts=4)
    trace = np.asarray(result.convergence_trace)
    assert len(trace) == result.evaluation_count
    assert np.all(np.diff(trace) >= 0.0)
    assert trace[-1] == pytest.approx(result.best_fidelity)


def test_small_budget_flags_unconverged(fast_objective: None, numerics: NumericsConfig) -> None:
    result = optimize_large_detuning(STRETCH_ETA, numerics, budget=100, n_starts=8)
    assert not result.converged
    space = OptSpace()
    for name, (lo, hi) in zip(space.names, space.bounds, strict=True):
        assert lo <= getattr(result.best_params, name) <= hi


def test_threads_do_not_change_result(fast_objective: None, numerics: NumericsConfig) -> None:
    serial = optimize_large_detuning(STRETCH_ETA, numerics, budget=400, n_starts=4, threads=1)
    parallel = optimize_large_detuning(STRETCH_ETA, numerics, budget=400, n_starts=4, threads=4)
    assert serial == parallel


def test_budget_floor(numerics: NumericsConfig) -> None:
    with pytest.raises(ValueError, match="budget must be at least 100"):
        optimize_large_detuning(STRETCH_ETA, numerics, budget=50)


# --- Test cases for sensitivity_scan ---


def test_scan_peaks_at_optimum(fast_objective: None, numerics: NumericsConfig) -> None:
    scan = sensitivity_scan("r_q", [0.8, 0.9, 1.0, 1.1, 1.2], STRETCH_ETA, numerics)
    fids = [p.fidelity for p in scan]
    assert int(np.argmax(fids)) == 2
    assert scan[2].value == LARGE_DETUNING_OPTIMUM.r_q


def test_scan_clips_to_bounds(fast_objective: None, numerics: NumericsConfig) -> None:
    scan = sensitivity_scan("b_pi", [2.0], STRETCH_ETA, numerics)
    assert scan[0].value == 1.0


def test_scan_rejects_unknown_parameter(numerics: NumericsConfig) -> None:
    with pytest.raises(ValueError, match="unknown control parameter"):
        sensitivity_scan("r_minus", [1.0], STRETCH_ETA, numerics)


# --- Test cases for eta_sweep ---


def test_fixed_sweep_reports_error_and_timescale(
    monkeypatch: pytest.MonkeyPatch, numerics: NumericsConfig
) -> None:
    monkeypatch.setattr(
        optimizer, "steady_run", lambda point, eta, *a, **k: (fake_trajectory(1 - 0.04 * eta), True)
    )
    points = eta_sweep([0.05, 0.1, 0.2], numerics, mode="fixed")
    errors = [p.error for p in points]
    slope, _ = np.polyfit(np.log([0.05, 0.1, 0.2]), np.log(errors), 1)
    assert slope == pytest.approx(1.0, abs=1e-9)
    assert all(p.time_to_plateau_s == 2e-3 for p in points)
    assert all(p.omega_c_ratio == LARGE_DETUNING_OPTIMUM.omega_c_ratio for p in points)


def test_reoptimized_sweep_moves_timing_only(
    monkeypatch: pytest.MonkeyPatch, numerics: NumericsConfig
) -> None:
    def peaked(point: ControlPoint, *args: object, **kwargs: object) -> float:
        return 0.99 - (point.omega_c_ratio - 0.3) ** 2 - (point.t_rep_ratio - 0.25) ** 2

    monkeypatch.setattr(optimizer, "steady_fidelity_objective", peaked)
    monkeypatch.setattr(optimizer, "steady_run", lambda *a, **k: (fake_trajectory(0.99), True))
    [point] = eta_sweep([0.2], numerics, mode="reoptimize", budget=200)
    assert point.omega_c_ratio == pytest.approx(0.3, abs=0.01)
    assert point.t_rep_ratio == pytest.approx(0.25, abs=0.01)


@pytest.mark.parametrize("etas", [[], [0.0], [0.35]])
def test_sweep_rejects_bad_etas(etas: list[float], numerics: NumericsConfig) -> None:
    with pytest.raises(ValueError, match="etas must be"):
        eta_sweep(etas, numerics)


def test_sweep_rejects_unknown_mode(numerics: NumericsConfig) -> None:
    with pytest.raises(ValueError, match="unknown eta sweep mode"):
        eta_sweep([0.1], numerics, mode="adaptive")


# --- Test cases for cooling_interleave ---


def test_cooling_rejects_bad_period(numerics: NumericsConfig) -> None:
    with pytest.raises(ValueError, match="reset period must be positive"):
        cooling_interleave(numerics, reset_period=-1.0)


def test_cooling_short_run(numerics: NumericsConfig) -> None:
    result = cooling_interleave(numerics, n_periods=3)
    assert result.n_periods == 3
    assert result.fidelity_after_reset >= result.fidelity - 1e-12
    assert 0.0 <= result.baseline_fidelity <= 1.0


def test_cooling_fidelity_averages_pre_reset_values_in_window(
    numerics: NumericsConfig, monkeypatch: pytest.MonkeyPatch
) -> None:
    trace = InterleaveTrace(
        times=[0.25e-3, 0.5e-3, 0.75e-3, 1.0e-3],
        fidelity_before_reset=[0.5, 0.90, 0.92, 0.94],
        fidelity_after_reset=[0.6, 0.95, 0.96, 0.97],
        phonons_before_reset=[0.3, 0.02, 0.02, 0.02],
    )
    monkeypatch.setattr(optimizer, "interleaved_reset", lambda *args, **kwargs: trace)
    monkeypatch.setattr(
        optimizer, "steady_state", lambda *args, **kwargs: (fake_trajectory(0.98), True)
    )

    result = cooling_interleave(numerics, reset_period=0.25e-3)

    assert result.fidelity == pytest.approx(0.92)
    assert result.fidelity_after_reset == pytest.approx(0.96)
    assert result.mean_phonons_before_reset == pytest.approx(0.02)
    assert result.baseline_fidelity == 0.98


# --- Test cases for error_budget ---


def test_budget_cases_match_default_options() -> None:
    assert list(BUDGET_CASES) == ErrorBudgetOptions().cases


def test_unknown_budget_case(numerics: NumericsConfig) -> None:
    with pytest.raises(ValueError, match="unknown error-budget case"):
        error_budget("laser_noise", numerics)


@pytest.mark.parametrize(
    "case, field, value, ideal",
    [
        ("phi_error_315", "phi_rad", math.pi + 0.05, False),
        ("slow_repump_315", "t_rep_us", 51.0, False),
        ("phi_only", "phi_rad", math.pi + 0.05, True),
        ("imbalance_only", "rabi_imbalance", 0.017, True),
    ],
)
def test_budget_case_toggles(
    monkeypatch: pytest.MonkeyPatch,
    numerics: NumericsConfig,
    case: str,
    field: str,
    value: float,
    ideal: bool,
) -> None:
    calls = []

    def capture(
        params: ProtocolParams,
        rates: RateTable | None,
        _numerics: NumericsConfig,
        recoil: bool = True,
    ) -> Trajectory:
        calls.append((params, rates, recoil))
        return fake_trajectory(0.95, [0.0, 0.5e-3, 1e-3])

    monkeypatch.setattr(optimizer, "simulate", capture)
    row = error_budget(case, numerics)
    [(params, rates, recoil)] = calls
    assert getattr(params, field) == pytest.approx(value)
    assert (rates is None) == ideal
    assert recoil is not ideal
    assert row.plateau_fidelity == pytest.approx(0.95 * (1 - math.exp(-1)) / 2 + 0.95 / 2)
    assert row.peak_fidelity == 0.95


def test_residual_only_keeps_residual_coupling(
    monkeypatch: pytest.MonkeyPatch, numerics: NumericsConfig
) -> None:
    seen: list[ProtocolParams] = []

    def capture(params: ProtocolParams, *args: object, **kwargs: object) -> Trajectory:
        seen.append(params)
        return fake_trajectory(0.99, [0.0, 1e-3])

    monkeypatch.setattr(optimizer, "simulate", capture)
    error_budget("residual_only_450", numerics)
    error_budget("phi_only", numerics)
    assert seen[0].omega_res_hz > 0.0
    assert seen[1].omega_res_hz == 0.0


def test_budget_short_run(numerics: NumericsConfig) -> None:
    row = error_budget("imbalance_only", numerics)
    assert 0.0 <= row.plateau_fidelity <= row.peak_fidelity <= 1.0 + 1e-9
    assert row.infidelity == pytest.approx(1.0 - row.plateau_fidelity)


# --- Long reproductions of the published numbers ---


@pytest.fixture
def production() -> NumericsConfig:
    """Provides the production truncation."""
    return NumericsConfig(n_max=12)


@pytest.mark.slow
def test_frozen_optimum_fidelity(production: NumericsConfig) -> None:
    fid = steady_fidelity_objective(LARGE_DETUNING_OPTIMUM, STRETCH_ETA, production)
    assert fid == pytest.approx(0.989, abs=0.003)


@pytest.mark.slow
def test_ideal_protocol_reaches_unity(production: NumericsConfig) -> None:
    fid = steady_fidelity_objective(LARGE_DETUNING_OPTIMUM, STRETCH_ETA, production, ideal=True)
    assert fid == pytest.approx(1.0, abs=1e-3)


@pytest.mark.slow
def test_carrier_is_needed(production: NumericsConfig) -> None:
    weak = LARGE_DETUNING_OPTIMUM.model_copy(update={"omega_c_ratio": 1e-3})
    assert steady_fidelity_objective(weak, STRETCH_ETA, production) < 0.9


@pytest.mark.slow
def test_cooling_interleave_raises_fidelity(production: NumericsConfig) -> None:
    result = cooling_interleave(production)
    assert result.fidelity == pytest.approx(0.994, abs=0.002)
    assert result.baseline_mean_phonons == pytest.approx(0.002, abs=0.001)


@pytest.mark.slow
def test_phi_error_only(production: NumericsConfig) -> None:
    assert error_budget("phi_only", production).plateau_fidelity == pytest.approx(0.993, abs=0.002)


@pytest.mark.slow
def test_imbalance_only(production: NumericsConfig) -> None:
    assert error_budget("imbalance_only", production).plateau_fidelity > 0.999


@pytest.mark.slow
def test_error_scales_linearly_with_eta(production: NumericsConfig) -> None:
    etas = [0.05, 0.1, 0.15, 0.2, 0.25]
    points = eta_sweep(etas, production, mode="fixed")
    slope, _ = np.polyfit(np.log(etas), np.log([p.error for p in points]), 1)
    assert slope == pytest.approx(1.0, abs=0.15)


@pytest.mark.slow
@pytest.mark.parametrize(
    "case, expected, tolerance",
    [
        ("nominal_315", 0.946, 0.015),
        ("nominal_450", 0.954, 0.015),
        ("phi_error_315", 0.935, 0.015),
        ("slow_repump_315", 0.912, 0.02),
    ],
)
def test_finite_detuning_peak_fidelity(
    production: NumericsConfig, case: str, expected: float, tolerance: float
) -> None:
    assert error_budget(case, production).peak_fidelity == pytest.approx(expected, abs=tolerance)


@pytest.mark.slow
@pytest.mark.parametrize(
    "case, expected", [("residual_only_315", 0.008), ("residual_only_450", 0.009)]
)
def test_residual_coupling_infidelity(
    production: NumericsConfig, case: str, expected: float
) -> None:
    assert error_budget(case, production).infidelity == pytest.approx(expected, abs=0.003)


@pytest.mark.slow
@pytest.mark.parametrize(
    "eta, expected, tolerance", [(0.229, 0.010, 0.002), (0.024, 0.0010, 0.0004)]
)
def test_error_at_reference_eta(
    production: NumericsConfig, eta: float, expected: float, tolerance: float
) -> None:
    [point] = eta_sweep([eta], production)
    assert point.error == pytest.approx(expected, abs=tolerance)


@pytest.mark.slow
def test_full_search_recovers_optimum(production: NumericsConfig) -> None:
    result = optimize_large_detuning(STRETCH_ETA, production)

    best = result.best_params
    assert result.best_fidelity == pytest.approx(0.989, abs=0.003)
    assert best.b_pi == pytest.approx(0.59, abs=0.05)
    assert best.r_plus == pytest.approx(0.88, abs=0.05)
    assert best.r_q == pytest.approx(0.357, abs=0.04)
    assert best.omega_c_ratio == pytest.approx(0.27, abs=0.05)
    assert best.t_rep_ratio == pytest.approx(0.22, abs=0.05)
