import math
from enum import Enum
from typing import Literal, get_args

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TWO_PI = 2.0 * math.pi


class Level(str, Enum):
    DOWN = "down"
    UP = "up"
    AUX = "aux"
    LEAK = "leak"

    @property
    def index(self) -> int:
        return _LEVEL_ORDER.index(self)


_LEVEL_ORDER = [Level.DOWN, Level.UP, Level.AUX, Level.LEAK]


class Site(str, Enum):
    ION1 = "ion1"
    ION2 = "ion2"
    MOTION = "motion"


class Polarization(str, Enum):
    SIGMA_MINUS = "sigma_minus"
    PI = "pi"
    SIGMA_PLUS = "sigma_plus"


class Condition(str, Enum):
    """Analysis rotation applied before fluorescence detection."""

    IDENTITY = "I"
    PI = "pi"
    HALF_PI_RANDOM = "pi2"


class _Frozen(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# --- Protocol ---


class ProtocolParams(_Frozen):
    """Drive strengths and phases of the four interactions.

    Frequencies are configured in Hz (cyclic); the ``omega_*`` properties return rad/s.
    """

    omega_bq_hz: float = Field(..., ge=0)
    omega_ba_hz: float = Field(..., ge=0)
    omega_c_hz: float = Field(..., ge=0)
    phi_rad: float = Field(default=math.pi, ge=0, lt=TWO_PI)
    global_phase_rad: float = 0.0
    omega_res_hz: float = Field(default=0.0, ge=0)
    stark_shifts_hz: dict[Literal["ion1", "ion2"], dict[Level, float]] = Field(
        default_factory=dict
    )
    rabi_imbalance: float = Field(default=0.0, gt=-2.0, lt=2.0)
    t_rep_us: float = Field(..., gt=0)
    eta: float = Field(..., gt=0, lt=1)
    raman_detuning_ghz: float | None = None

    @property
    def omega_bq(self) -> float:
        return TWO_PI * self.omega_bq_hz

    @property
    def omega_ba(self) -> float:
        return TWO_PI * self.omega_ba_hz

    @property
    def omega_c(self) -> float:
        return TWO_PI * self.omega_c_hz

    @property
    def omega_res(self) -> float:
        return TWO_PI * self.omega_res_hz

    @property
    def t_rep(self) -> float:
        return self.t_rep_us * 1e-6

    def stark_shift(self, ion: Literal["ion1", "ion2"], level: Level) -> float:
        """Stark shift of ``level`` on ``ion`` in rad/s."""
        return TWO_PI * self.stark_shifts_hz.get(ion, {}).get(level, 0.0)


# --- Beams and rates ---


class BeamConfig(_Frozen):
    """Raman beam powers, polarizations and detuning.

    Polarization triples are (sigma_minus, pi, sigma_plus) amplitudes. The blue beam's
    wavevector is perpendicular to the field, so its sigma components have equal weight.
    """

    p_total: float = Field(..., ge=0)
    p_blue_fraction: float = Field(default=0.5, gt=0, lt=1)
    r_q: float = Field(..., ge=0, le=1)
    blue_pol: tuple[float, float, float]
    red_pol: tuple[float, float, float]
    detuning_ghz: float
    fine_structure_ghz: float = Field(default=197.15, gt=0)
    aux_mixing: float = Field(default=0.608, gt=0, lt=1)

    @field_validator("blue_pol", "red_pol")
    @classmethod
    def _unit_norm(cls, v: tuple[float, float, float]) -> tuple[float, float, float]:
        norm = math.sqrt(sum(c * c for c in v))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"polarization {v} is not unit-norm (|p| = {norm:.12f})")
        return v

    @model_validator(mode="after")
    def _geometry(self) -> "BeamConfig":
        b_minus, _, b_plus = self.blue_pol
        if abs(abs(b_minus) - abs(b_plus)) > 1e-9:
            raise ValueError("blue_pol must have equal sigma_minus and sigma_plus weights")
        for bad in (0.0, self.fine_structure_ghz):
            if self.detuning_ghz == bad:
                raise ValueError(f"detuning_ghz={self.detuning_ghz} is on resonance")
        return self

    @classmethod
    def from_components(
        cls,
        b_pi: float,
        r_plus: float,
        r_q: float,
        detuning_ghz: float,
        r_pi: float = 0.0,
        p_total: float = 1.0,
        p_blue_fraction: float = 0.5,
        **kwargs: float,
    ) -> "BeamConfig":
        """Build a config from the free polarization components; the rest are derived."""
        b_sigma = math.sqrt(max(0.0, (1.0 - b_pi * b_pi) / 2.0))
        r_minus = math.sqrt(max(0.0, 1.0 - r_plus * r_plus - r_pi * r_pi))
        blue = (b_sigma, b_pi, b_sigma)
        red = (r_minus, r_pi, r_plus)
        return cls(
            p_total=p_total,
            p_blue_fraction=p_blue_fraction,
            r_q=r_q,
            blue_pol=_renormalized(blue),
            red_pol=_renormalized(red),
            detuning_ghz=detuning_ghz,
            **kwargs,
        )

    @property
    def p_blue(self) -> float:
        return self.p_total * self.p_blue_fraction

    @property
    def p_red_qubit(self) -> float:
        return self.p_total * (1.0 - self.p_blue_fraction) * self.r_q

    @property
    def p_red_aux(self) -> float:
        return self.p_total * (1.0 - self.p_blue_fraction) * (1.0 - self.r_q)


def _renormalized(v: tuple[float, float, float]) -> tuple[float, float, float]:
    norm = math.sqrt(sum(c * c for c in v))
    return (v[0] / norm, v[1] / norm, v[2] / norm)


class RamanRate(_Frozen):
    initial: Level
    final: Level
    polarization: Polarization = Polarization.PI
    rate_per_s: float = Field(..., ge=0)


class RateTable(_Frozen):
    """Effective model rates derived from beam settings (or given explicitly)."""

    omega_bq_hz: float = Field(default=0.0, ge=0)
    omega_ba_hz: float = Field(default=0.0, ge=0)
    raman_rates: list[RamanRate] = Field(default_factory=list)
    rayleigh_rate_per_s: float = Field(default=0.0, ge=0)
    rayleigh_polarization_mix: dict[Polarization, float] = Field(
        default_factory=lambda: {p: 1.0 / 3.0 for p in Polarization}
    )
    stark_shifts_hz: dict[Level, float] = Field(default_factory=dict)
    omega_res_hz: float = Field(default=0.0, ge=0)
    repump_recoil: bool = Field(default=True, description="Dress the repump with recoil")

    @field_validator("rayleigh_polarization_mix")
    @classmethod
    def _mix_normalized(cls, v: dict[Polarization, float]) -> dict[Polarization, float]:
        if any(w < 0 for w in v.values()):
            raise ValueError("rayleigh_polarization_mix weights must be non-negative")
        total = sum(v.values())
        if v and abs(total - 1.0) > 1e-9:
            raise ValueError(f"rayleigh_polarization_mix must sum to 1, got {total}")
        return v

    @property
    def total_raman_rate(self) -> float:
        return sum(r.rate_per_s for r in self.raman_rates)


# --- Numerics ---


class EvolutionConfig(_Frozen):
    t_final_ms: float = Field(..., gt=0)
    dt_max_us: float | None = Field(default=None, gt=0)
    abs_tol: float = Field(default=1e-9, gt=0, le=1e-2)
    rel_tol: float = Field(default=1e-7, gt=0, le=1e-2)
    sample_times_ms: list[float] | None = None
    n_samples: int = Field(default=161, ge=2)
    integrator: Literal["rk4", "adaptive"] = "adaptive"

    @model_validator(mode="after")
    def _check_times(self) -> "EvolutionConfig":
        if self.dt_max_us is not None and self.dt_max_us * 1e-3 > self.t_final_ms:
            raise ValueError("dt_max_us must not exceed t_final_ms")
        if self.sample_times_ms is not None:
            times = self.sample_times_ms
            if any(t < 0 or t > self.t_final_ms for t in times):
                raise ValueError("sample_times_ms must lie within [0, t_final_ms]")
            if any(b <= a for a, b in zip(times, times[1:], strict=False)):
                raise ValueError("sample_times_ms must be strictly increasing")
        return self

    @property
    def t_final(self) -> float:
        return self.t_final_ms * 1e-3

    @property
    def dt_max(self) -> float | None:
        return None if self.dt_max_us is None else self.dt_max_us * 1e-6

    def sample_grid(self) -> np.ndarray:
        """Sample times in seconds."""
        if self.sample_times_ms is not None:
            return np.asarray(self.sample_times_ms, dtype=float) * 1e-3
        return np.linspace(0.0, self.t_final, self.n_samples)


class NumericsConfig(_Frozen):
    n_max: int = Field(default=16, ge=1)
    series_order: int = Field(default=12, ge=2)
    dissipator: Literal["quadrature", "series"] = "quadrature"
    quadrature_nodes: int = Field(default=24, ge=4)
    repump_axial_k: float = 1.0 / math.sqrt(2.0)
    initial_state: Literal["down_down", "singlet"] = "down_down"
    plateau_window_ms: tuple[float, float] = (6.0, 16.0)
    evolution: EvolutionConfig = Field(default_factory=lambda: EvolutionConfig(t_final_ms=16.0))

    @field_validator("series_order")
    @classmethod
    def _even(cls, v: int) -> int:
        if v % 2:
            raise ValueError(f"series_order must be even, got {v}")
        return v


# --- Readout ---


class DetectionModel(_Frozen):
    """Poisson means for 0, 1 and 2 bright ions.

    ``c2`` defaults to two independent emitters over a shared background.
    """

    c0: float = Field(default=1.0, ge=0)
    c1: float = Field(default=15.0, gt=0)
    c2_override: float | None = Field(default=None, gt=0)

    @property
    def c2(self) -> float:
        if self.c2_override is not None:
            return self.c2_override
        return 2.0 * (self.c1 - self.c0) + self.c0

    @model_validator(mode="after")
    def _ordered(self) -> "DetectionModel":
        if not self.c0 < self.c1 < self.c2:
            raise ValueError(
                f"detection means must satisfy c0 < c1 < c2, got {self.c0}, {self.c1}, {self.c2}"
            )
        return self

    @property
    def means(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2], dtype=float)


class PopulationEstimate(_Frozen):
    """Bright-ion populations per analysis condition and the derived basis populations."""

    p_n: dict[Condition, tuple[float, float, float]]
    p_down_down: float
    p_up_up: float
    x: float
    p_triplet: float


class StatisticsConfig(_Frozen):
    shots: int = Field(default=200, ge=1)
    n_resamples: int = Field(default=10_000, ge=1)
    seed: int = 1234
    confidence_level: float = Field(default=0.95, gt=0, lt=1)


# --- Optimization ---


class OptSpace(_Frozen):
    b_pi: tuple[float, float] = (0.0, 1.0)
    r_plus: tuple[float, float] = (0.0, 1.0)
    r_q: tuple[float, float] = (0.01, 0.99)
    omega_c_ratio: tuple[float, float] = (0.01, 2.0)
    t_rep_ratio: tuple[float, float] = (0.01, 5.0)
    r_pi: float = Field(default=0.0, ge=0, lt=1)
    p_blue_fraction: float = Field(default=0.5, gt=0, lt=1)

    @property
    def names(self) -> tuple[str, ...]:
        return ("b_pi", "r_plus", "r_q", "omega_c_ratio", "t_rep_ratio")

    @property
    def bounds(self) -> list[tuple[float, float]]:
        return [getattr(self, name) for name in self.names]


class ControlPoint(_Frozen):
    """A point of the large-detuning search space."""

    b_pi: float = Field(..., ge=0, le=1)
    r_plus: float = Field(..., ge=0, le=1)
    r_q: float = Field(..., gt=0, lt=1)
    omega_c_ratio: float = Field(..., gt=0)
    t_rep_ratio: float = Field(..., gt=0)

    def as_vector(self) -> np.ndarray:
        return np.array(
            [self.b_pi, self.r_plus, self.r_q, self.omega_c_ratio, self.t_rep_ratio], dtype=float
        )


class OptResult(_Frozen):
    best_params: ControlPoint
    best_fidelity: float = Field(..., ge=0, le=1)
    evaluation_count: int
    convergence_trace: list[float]
    converged: bool


# --- Experiments ---


ExperimentName = Literal[
    "time_sweep",
    "eta_sweep",
    "optimize",
    "error_budget",
    "cooling_interleave",
    "phi_calibration",
    "synthetic_readout",
]

PresetName = Literal["detuning_315", "detuning_450", "large_detuning"]


class EtaSweepOptions(_Frozen):
    etas: list[float] = Field(default_factory=lambda: [0.024, 0.05, 0.1, 0.15, 0.2, 0.229, 0.257])
    mode: Literal["fixed", "reoptimize"] = "reoptimize"
    budget: int = Field(default=120, ge=10)

    @field_validator("etas")
    @classmethod
    def _range(cls, v: list[float]) -> list[float]:
        if not v or any(not 0 < e <= 0.3 for e in v):
            raise ValueError("etas must be a non-empty list in (0, 0.3]")
        return v


class OptimizeOptions(_Frozen):
    budget: int = Field(default=800, ge=100)
    n_starts: int = Field(default=8, ge=1)
    space: OptSpace = Field(default_factory=OptSpace)
    steady_mode: Literal["steady", "fixed"] = "steady"
    sensitivity_factors: list[float] = Field(default_factory=list)


BudgetCaseName = Literal[
    "nominal_315",
    "phi_error_315",
    "slow_repump_315",
    "nominal_450",
    "phi_only",
    "imbalance_only",
    "residual_only_315",
    "residual_only_450",
]


class ErrorBudgetOptions(_Frozen):
    cases: list[BudgetCaseName] = Field(default_factory=lambda: list(get_args(BudgetCaseName)))


class CoolingOptions(_Frozen):
    reset_period_us: float | None = Field(default=None, gt=0)
    n_periods: int | None = Field(default=None, ge=1)


class PhiCalibrationOptions(_Frozen):
    omega_cr_hz: float = Field(default=50_000.0, gt=0)
    phi_grid_rad: list[float] = Field(
        default_factory=lambda: [TWO_PI * k / 100 for k in range(100)]
    )
    shots: int | None = Field(default=None, ge=1)


class SyntheticReadoutOptions(_Frozen):
    times_ms: list[float] = Field(
        default_factory=lambda: [0.0, 1.0, 2.0, 4.0, 7.0, 10.0, 13.0, 16.0]
    )
    half_pi_shot_multiplier: int = Field(default=3, ge=1)


class OutputConfig(_Frozen):
    directory: str = "results"
    stem: str | None = None


class ExperimentSpec(_Frozen):
    experiment: ExperimentName
    preset: PresetName | None = None
    protocol: ProtocolParams | None = None
    beams: BeamConfig | None = None
    rates: RateTable | None = None
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    statistics: StatisticsConfig = Field(default_factory=StatisticsConfig)
    detection: DetectionModel = Field(default_factory=DetectionModel)
    eta_sweep: EtaSweepOptions = Field(default_factory=EtaSweepOptions)
    optimize: OptimizeOptions = Field(default_factory=OptimizeOptions)
    error_budget: ErrorBudgetOptions = Field(default_factory=ErrorBudgetOptions)
    cooling_interleave: CoolingOptions = Field(default_factory=CoolingOptions)
    phi_calibration: PhiCalibrationOptions = Field(default_factory=PhiCalibrationOptions)
    synthetic_readout: SyntheticReadoutOptions = Field(default_factory=SyntheticReadoutOptions)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _exclusive_rate_sources(self) -> "ExperimentSpec":
        if self.rates is not None and self.beams is not None:
            raise ValueError("'rates' and 'beams' are mutually exclusive; give one of them")
        return self


class ResultSet(_Frozen):
    experiment: ExperimentName
    columns: list[str]
    rows: list[list[float | int | str]]
    summary: dict[str, object]
    spec_hash: str
    version: str
    wall_time_s: float
