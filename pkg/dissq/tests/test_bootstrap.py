import numpy as np
import pytest

from dissq.analysis.bootstrap import bca_interval, bias_correction, bootstrap_ci
from dissq.analysis.measurement import analysis_map, synthesize_counts, x_from_counts
from dissq.models import Condition, DetectionModel

# --- Fixtures for testing ---


@pytest.fixture
def model() -> DetectionModel:
    """Provides the default detection model."""
    return DetectionModel()


def mean_of_identity(counts: dict) -> float:
    return float(np.mean(counts[Condition.IDENTITY]))


def internal_mixture(x: float) -> np.ndarray:
    """Singlet with weight ``x``; the rest spread over the three triplet-manifold states."""
    rho = np.zeros((16, 16), dtype=complex)
    singlet = np.zeros(16)
    singlet[4], singlet[1] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    triplet = np.zeros(16)
    triplet[4], triplet[1] = 1 / np.sqrt(2), 1 / np.sqrt(2)
    rho += x * np.outer(singlet, singlet)
    rho += (1 - x) / 3 * np.outer(triplet, triplet)
    rho[0, 0] += (1 - x) / 3
    rho[5, 5] += (1 - x) / 3
    return rho


def synthetic_experiment(
    x: float, model: DetectionModel, shots: int, seed: int
) -> dict[Condition, np.ndarray]:
    rho = internal_mixture(x)
    streams = np.random.SeedSequence(seed).spawn(3)
    multiplier = {Condition.IDENTITY: 1, Condition.PI: 1, Condition.HALF_PI_RANDOM: 3}
    return {
        c: synthesize_counts(analysis_map(rho, c), model, shots * multiplier[c], stream)
        for c, stream in zip(Condition, streams, strict=True)
    }


# --- Test cases for bca_interval ---


def test_symmetric_replicas_give_percentile_interval() -> None:
    replicas = np.linspace(-1.0, 1.0, 1001)
    lower, upper, z0 = bca_interval(replicas, 0.0, 0.95)
    assert z0 == pytest.approx(0.0, abs=1e-12)
    assert (lower, upper) == pytest.approx(tuple(np.quantile(replicas, [0.025, 0.975])))


def test_estimate_below_replicas_shifts_interval_down() -> None:
    replicas = np.linspace(0.0, 1.0, 1001)
    lower, upper, z0 = bca_interval(replicas, 0.3, 0.95)
    plain_lower, plain_upper = np.quantile(replicas, [0.025, 0.975])
    assert z0 < 0
    assert lower < plain_lower
    assert upper < plain_upper


def test_ties_count_half() -> None:
    replicas = np.array([1.0, 2.0, 2.0, 3.0])
    assert bias_correction(replicas, 2.0) == pytest.approx(0.0)


def test_bad_level_rejected() -> None:
    with pytest.raises(ValueError, match="confidence level"):
        bca_interval(np.arange(10.0), 4.5, 1.0)


# --- Test cases for bootstrap_ci ---


def test_constant_data_gives_degenerate_interval() -> None:
    counts = {c: np.full(50, 7) for c in Condition}
    ci = bootstrap_ci(counts, mean_of_identity, n_resamples=200, seed=1)
    assert ci.degenerate
    assert ci.lower == ci.upper == ci.estimate == 7.0


def test_interval_brackets_estimate(model: DetectionModel) -> None:
    counts = synthetic_experiment(0.9, model, 200, seed=4)
    ci = bootstrap_ci(counts, lambda c: x_from_counts(c, model), n_resamples=200, seed=2)
    assert not ci.degenerate
    assert ci.lower <= ci.estimate <= ci.upper
    assert ci.half_width > 0


def test_result_independent_of_thread_count() -> None:
    rng = np.random.default_rng(0)
    counts = {c: rng.poisson(10.0, size=100) for c in Condition}
    serial = bootstrap_ci(counts, mean_of_identity, n_resamples=300, seed=9, threads=1)
    parallel = bootstrap_ci(counts, mean_of_identity, n_resamples=300, seed=9, threads=4)
    assert serial == parallel


def test_empty_condition_rejected() -> None:
    counts = {Condition.IDENTITY: np.array([], dtype=int)}
    with pytest.raises(ValueError, match="at least one count"):
        bootstrap_ci(counts, mean_of_identity, n_resamples=10)


@pytest.mark.slow
def test_coverage_over_synthetic_experiments(model: DetectionModel) -> None:
    truth = 0.9
    hits = 0
    for k in range(200):
        counts = synthetic_experiment(truth, model, 200, seed=1000 + k)
        ci = bootstrap_ci(counts, lambda c: x_from_counts(c, model), n_resamples=1000, seed=k)
        hits += ci.lower <= truth <= ci.upper
    assert 0.91 <= hits / 200 <= 0.99


@pytest.mark.slow
def test_plateau_interval_width(model: DetectionModel) -> None:
    counts = synthetic_experiment(0.949, model, 4000, seed=77)
    ci = bootstrap_ci(counts, lambda c: x_from_counts(c, model), n_resamples=2000, seed=3)
    assert 0.002 <= ci.half_width <= 0.008
