"""Experiment registry: spec loading, driver dispatch and result emission."""

import csv
import hashlib
import json
import logging
import math
import time
from collections.abc import Callable
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ValidationError

from common.config import SimulationSettings
from dissq import __version__
from dissq.analysis import (
    CountRecord,
    basis_populations,
    bootstrap_ci,
    bright_populations,
    phi_calibration_curve,
    synthesize_counts,
    write_count_records,
    x_from_counts,
)
from dissq.core.atomic_rates import rate_table, ratio_report
from dissq.core.hilbert import build_layout
from dissq.core.lindblad import plateau_fidelity
from dissq.core.simulation import (
    protocol_with_rates,
    simulate,
    states_at,
    time_to_plateau,
    window_seconds,
)
from dissq.db import get_db
from dissq.models import (
    Condition,
    ExperimentSpec,
    ProtocolParams,
    RateTable,
    ResultSet,
)
from dissq.optimizer import (
    cooling_interleave,
    error_budget,
    eta_sweep,
    optimize_large_detuning,
    sensitivity_scan,
)
from dissq.providers import (
    LARGE_DETUNING_OPTIMUM,
    STRETCH_ETA,
    preset_protocol,
    preset_rates,
)

logger = logging.getLogger(__name__)


class SpecError(ValueError):
    """Unreadable or invalid experiment spec, with the location of the problem."""

    def __init__(
        self,
        message: str,
        field: str | None = None,
        line: int | None = None,
        column: int | None = None,
    ) -> None:
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column

    def record(self) -> dict[str, object]:
        out: dict[str, object] = {"error": type(self).__name__, "detail": str(self)}
        for key in ("field", "line", "column"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


class RunContext(BaseModel):
    threads: int = 1
    out_dir: Path = Path("results")
    stem: str = "run"


Cell = float | int | str


def _cell(value: object) -> Cell:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int | float | str):
        return value
    return str(value)


class DriverOutput(BaseModel):
    columns: list[str]
    rows: list[list[Cell]]
    summary: dict[str, object]


Driver = Callable[[ExperimentSpec, RunContext], DriverOutput]
EXPERIMENTS: dict[str, Driver] = {}


def experiment(name: str) -> Callable[[Driver], Driver]:
    def register(fn: Driver) -> Driver:
        EXPERIMENTS[name] = fn
        return fn

    return register


# --- Spec handling ---


def load_spec(path: str | Path) -> ExperimentSpec:
    """Parse and validate a JSON spec; unknown keys are errors."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    try:
        return ExperimentSpec.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        raise SpecError(f"{field or 'spec'}: {first['msg']}", field=field) from exc


def dump_spec(spec: ExperimentSpec) -> str:
    return json.dumps(spec.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def spec_hash(spec: ExperimentSpec) -> str:
    return hashlib.sha256(dump_spec(spec).encode("utf-8")).hexdigest()


def apply_settings(spec: ExperimentSpec, settings: SimulationSettings) -> ExperimentSpec:
    """Environment overrides: ``DISSQ_SEED`` replaces the spec seed."""
    if settings.DISSQ_SEED is None:
        return spec
    statistics = spec.statistics.model_copy(update={"seed": settings.DISSQ_SEED})
    return spec.model_copy(update={"statistics": statistics})


def resolve_physics(spec: ExperimentSpec) -> tuple[ProtocolParams, RateTable | None]:
    """Protocol and scattering rates from explicit blocks, falling back to the preset.

    Explicit rates or beams replace the preset rates; sideband strengths they carry
    replace the protocol's.
    """
    if spec.protocol is not None:
        params = spec.protocol
    elif spec.preset is not None:
        params = preset_protocol(spec.preset, with_residual=spec.preset != "large_detuning")
    else:
        raise SpecError("spec needs a 'protocol' block or a 'preset'", field="protocol")

    rates: RateTable | None = None
    if spec.rates is not None:
        rates = spec.rates
    elif spec.beams is not None:
        rates = rate_table(spec.beams, params.eta)
    elif spec.preset is not None:
        rates = preset_rates(spec.preset)
    if rates is not None:
        params = protocol_with_rates(params, rates)
    return params, rates


def _study_eta(spec: ExperimentSpec) -> float:
    return spec.protocol.eta if spec.protocol is not None else STRETCH_ETA


# --- Drivers ---


@experiment("time_sweep")
def run_time_sweep(spec: ExperimentSpec, ctx: RunContext) -> DriverOutput:
    params, rates = resolve_physics(spec)
    traj = simulate(params, rates, spec.numerics)
    rows: list[list[Cell]] = [
        [t * 1e3, *pops, n, f]
        for t, pops, n, f in zip(
            traj.times, traj.populations, traj.mean_phonons, traj.fidelities, strict=True
        )
    ]
    summary: dict[str, object] = {
        "peak_fidelity": max(traj.fidelities),
        "time_to_plateau_ms": time_to_plateau(traj) * 1e3,
        "ratios": ratio_report(params),
        "diagnostics": traj.diagnostics.model_dump(),
        "truncation_flag": traj.diagnostics.truncation_flag,
    }
    try:
        summary["plateau_fidelity"] = plateau_fidelity(traj, window_seconds(spec.numerics))
    except ValueError:
        logger.warning(
            "plateau window has no samples window_ms=%s", spec.numerics.plateau_window_ms
        )
    return DriverOutput(
        columns=[
            "t_ms",
            "p_down_down",
            "p_up_up",
            "p_singlet",
            "p_triplet",
            "p_leak",
            "mean_phonons",
            "fidelity",
        ],
        rows=rows,
        summary=summary,
    )


@experiment("eta_sweep")
def run_eta_sweep(spec: ExperimentSpec, ctx: RunContext) -> DriverOutput:
    opts = spec.eta_sweep
    points = eta_sweep(
        opts.etas,
        spec.numerics,
        mode=opts.mode,
        budget=opts.budget,
        space=spec.optimize.space,
        threads=ctx.threads,
    )
    summary: dict[str, object] = {
        "mode": opts.mode,
        "polarizations_frozen_at": LARGE_DETUNING_OPTIMUM.model_dump(),
        "all_converged": all(p.converged for p in points),
    }
    if len(points) >= 2 and all(p.error > 0 for p in points):
        etas = np.log([p.eta for p in points])
        slope, _ = np.polyfit(etas, np.log([p.error for p in points]), 1)
        summary["log_log_slope"] = float(slope)
    return DriverOutput(
        columns=[
            "eta",
            "fidelity",
            "error",
            "time_to_plateau_ms",
            "omega_c_ratio",
            "t_rep_ratio",
            "converged",
        ],
        rows=[
            [
                p.eta,
                p.fidelity,
                p.error,
                p.time_to_plateau_s * 1e3,
                p.omega_c_ratio,
                p.t_rep_ratio,
                _cell(p.converged),
            ]
            for p in points
        ],
        summary=summary,
    )


@experiment("optimize")
def run_optimize(spec: ExperimentSpec, ctx: RunContext) -> DriverOutput:
    opts = spec.optimize
    eta = _study_eta(spec)
    result = optimize_large_detuning(
        eta,
        spec.numerics,
        space=opts.space,
        budget=opts.budget,
        n_starts=opts.n_starts,
        mode=opts.steady_mode,
        seed=spec.statistics.seed,
        threads=ctx.threads,
    )
    summary: dict[str, object] = {
        "eta": eta,
        "best_params": result.best_params.model_dump(),
        "best_fidelity": result.best_fidelity,
        "evaluation_count": result.evaluation_count,
        "converged": result.converged,
    }
    if opts.sensitivity_factors:
        summary["sensitivity"] = {
            name: [
                p.model_dump()
                for p in sensitivity_scan(
                    name,
                    opts.sensitivity_factors,
                    eta,
                    spec.numerics,
                    base=result.best_params,
                    mode=opts.steady_mode,
                    space=opts.space,
                )
            ]
            for name in opts.space.names
        }
    return DriverOutput(
        columns=["evaluation", "best_fidelity"],
        rows=[[k + 1, f] for k, f in enumerate(result.convergence_trace)],
        summary=summary,
    )


@experiment("error_budget")
def run_error_budget(spec: ExperimentSpec, ctx: RunContext) -> DriverOutput:
    rows = [error_budget(case, spec.numerics) for case in spec.error_budget.cases]
    return DriverOutput(
        columns=["case", "plateau_fidelity", "peak_fidelity", "infidelity"],
        rows=[[r.case, r.plateau_fidelity, r.peak_fidelity, r.infidelity] for r in rows],
        summary={r.case: r.plateau_fidelity for r in rows},
    )


@experiment("cooling_interleave")
def run_cooling_interleave(spec: ExperimentSpec, ctx: RunContext) -> DriverOutput:
    opts = spec.cooling_interleave
    period = None if opts.reset_period_us is None else opts.reset_period_us * 1e-6
    result = cooling_interleave(
        spec.numerics,
        point=LARGE_DETUNING_OPTIMUM,
        eta=_study_eta(spec),
        reset_period=period,
        n_periods=opts.n_periods,
        space=spec.optimize.space,
    )
    values = result.model_dump()
    return DriverOutput(
        columns=list(values),
        rows=[[_cell(v) for v in values.values()]],
        summary=values,
    )


@experiment("phi_calibration")
def run_phi_calibration(spec: ExperimentSpec, ctx: RunContext) -> DriverOutput:
    opts = spec.phi_calibration
    curve = phi_calibration_curve(
        2.0 * math.pi * opts.omega_cr_hz,
        opts.phi_grid_rad,
        shots=opts.shots,
        seed=spec.statistics.seed,
    )
    expected = [0.5 + math.cos(phi) / 4.0 for phi in opts.phi_grid_rad]
    rows: list[list[Cell]] = [
        [phi, even, odd, want]
        for phi, (even, odd), want in zip(opts.phi_grid_rad, curve, expected, strict=True)
    ]
    deviation = max(abs(even - want) for (even, _), want in zip(curve, expected, strict=True))
    return DriverOutput(
        columns=["phi_rad", "p_even", "p_odd", "p_even_expected"],
        rows=rows,
        summary={"mode": "sampled" if opts.shots else "analytic", "max_deviation": deviation},
    )


@experiment("synthetic_readout")
def run_synthetic_readout(spec: ExperimentSpec, ctx: RunContext) -> DriverOutput:
    """Simulate, draw photon counts, estimate X by maximum likelihood and bootstrap it."""
    params, rates = resolve_physics(spec)
    stats = spec.statistics
    times_ms = spec.synthetic_readout.times_ms
    shots = {
        Condition.IDENTITY: stats.shots,
        Condition.PI: stats.shots,
        Condition.HALF_PI_RANDOM: stats.shots * spec.synthetic_readout.half_pi_shot_multiplier,
    }
    states = states_at(params, rates, spec.numerics, [t * 1e-3 for t in times_ms])
    layout = build_layout(spec.numerics.n_max)
    streams = iter(np.random.SeedSequence(stats.seed).spawn(len(times_ms) * len(Condition)))

    def estimate(counts: dict) -> float:
        return x_from_counts(counts, spec.detection)

    records: list[CountRecord] = []
    pooled: dict[tuple[int, Condition], np.ndarray] = {}
    rows: list[list[Cell]] = []
    lo, hi = spec.numerics.plateau_window_ms
    for k, (t_ms, rho) in enumerate(zip(times_ms, states, strict=True)):
        p_n = bright_populations(rho, layout)
        counts = {
            c: synthesize_counts(p_n[c], spec.detection, shots[c], next(streams)) for c in Condition
        }
        records.extend(
            CountRecord(time_us=t_ms * 1e3, condition=c, counts=counts[c].tolist())
            for c in Condition
        )
        ci = bootstrap_ci(
            counts,
            estimate,
            n_resamples=stats.n_resamples,
            level=stats.confidence_level,
            seed=stats.seed + k,
            threads=ctx.threads,
        )
        rows.append([t_ms, basis_populations(p_n).x, ci.estimate, ci.lower, ci.upper])
        if lo <= t_ms <= hi:
            pooled.update({(k, c): counts[c] for c in Condition})

    counts_path = write_count_records(ctx.out_dir / f"{ctx.stem}_counts.txt", records)
    summary: dict[str, object] = {
        "counts_file": str(counts_path),
        "shots": {c.value: n for c, n in shots.items()},
    }
    if pooled:
        samples = sorted({k for k, _ in pooled})

        def plateau_x(counts: dict) -> float:
            per_sample = [
                x_from_counts({c: counts[(k, c)] for c in Condition}, spec.detection)
                for k in samples
            ]
            return float(np.mean(per_sample))

        ci = bootstrap_ci(
            pooled,
            plateau_x,
            n_resamples=stats.n_resamples,
            level=stats.confidence_level,
            seed=stats.seed,
            threads=ctx.threads,
        )
        summary["plateau"] = ci.model_dump() | {"half_width": ci.half_width}
    else:
        logger.warning("no readout times inside the plateau window window_ms=%s", (lo, hi))
    return DriverOutput(
        columns=["t_ms", "x_true", "x_estimate", "x_lower", "x_upper"],
        rows=rows,
        summary=summary,
    )


# --- Emission ---


def write_table(path: Path, result: ResultSet) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow([*result.columns, "spec_hash"])
        for row in result.rows:
            writer.writerow([*row, result.spec_hash])
    return path


def write_summary(path: Path, result: ResultSet) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {
        "experiment": result.experiment,
        "spec_hash": result.spec_hash,
        "version": result.version,
        "wall_time_s": result.wall_time_s,
        "rows": len(result.rows),
        "summary": result.summary,
    }
    path.write_text(json.dumps(document, indent=2, sort_keys=True, default=str), encoding="utf-8")
    return path


def run(spec: ExperimentSpec, threads: int = 1, out_dir: str | Path | None = None) -> ResultSet:
    """Dispatch ``spec`` to its driver, write the table and summary, and register the run."""
    directory = Path(out_dir) if out_dir is not None else Path(spec.output.directory)
    stem = spec.output.stem or spec.experiment
    digest = spec_hash(spec)
    ctx = RunContext(threads=threads, out_dir=directory, stem=stem)
    logger.info(
        "run start experiment=%s spec_hash=%s threads=%d", spec.experiment, digest[:12], threads
    )

    started = time.perf_counter()
    output = EXPERIMENTS[spec.experiment](spec, ctx)
    result = ResultSet(
        experiment=spec.experiment,
        columns=output.columns,
        rows=output.rows,
        summary=output.summary,
        spec_hash=digest,
        version=__version__,
        wall_time_s=time.perf_counter() - started,
    )
    table = write_table(directory / f"{stem}.csv", result)
    summary = write_summary(directory / f"{stem}.json", result)
    get_db().insert(
        {
            "spec_hash": digest,
            "experiment": spec.experiment,
            "table": str(table),
            "summary": str(summary),
            "version": __version__,
            "wall_time_s": result.wall_time_s,
        }
    )
    logger.info(
        "run done experiment=%s rows=%d wall_time_s=%.3f",
        spec.experiment,
        len(result.rows),
        result.wall_time_s,
    )
    return result


def list_experiments() -> list[str]:
    return sorted(EXPERIMENTS)


__all__ = [
    "EXPERIMENTS",
    "SpecError",
    "apply_settings",
    "dump_spec",
    "experiment",
    "list_experiments",
    "load_spec",
    "resolve_physics",
    "run",
    "spec_hash",
    "write_summary",
    "write_table",
]
