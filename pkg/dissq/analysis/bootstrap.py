"""Bias-corrected percentile bootstrap (BCa with zero acceleration)."""

import logging
from collections.abc import Callable, Hashable, Mapping
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import BaseModel
from scipy.stats import norm

logger = logging.getLogger(__name__)

# Keys are analysis conditions, or (sample, condition) pairs when several samples are pooled.
CountsByCondition = Mapping[Hashable, np.ndarray]
AnalysisFn = Callable[[CountsByCondition], float]


class BootstrapInterval(BaseModel):
    estimate: float
    lower: float
    upper: float
    level: float
    z0: float
    n_resamples: int
    degenerate: bool = False

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)


def bias_correction(replicates: np.ndarray, estimate: float) -> float:
    """z0 from the fraction of replicas below the estimate; ties count one half."""
    n = replicates.size
    below = np.count_nonzero(replicates < estimate)
    ties = np.count_nonzero(replicates == estimate)
    fraction = (below + 0.5 * ties) / n
    fraction = min(max(fraction, 0.5 / n), 1.0 - 0.5 / n)
    return float(norm.ppf(fraction))


def bca_interval(
    replicates: np.ndarray, estimate: float, level: float = 0.95
) -> tuple[float, float, float]:
    """(lower, upper, z0) of the bias-corrected percentile interval."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    replicates = np.asarray(replicates, dtype=float)
    if replicates.size == 0:
        raise ValueError("no bootstrap replicates")
    z0 = bias_correction(replicates, estimate)
    tail = 0.5 * (1.0 - level)
    q_low = norm.cdf(2.0 * z0 + norm.ppf(tail))
    q_high = norm.cdf(2.0 * z0 + norm.ppf(1.0 - tail))
    lower, upper = np.quantile(replicates, [q_low, q_high])
    return float(lower), float(upper), z0


def _resample(counts: CountsByCondition, rng: np.random.Generator) -> dict[Hashable, np.ndarray]:
    out = {}
    for condition in sorted(counts, key=repr):
        data = np.asarray(counts[condition])
        out[condition] = data[rng.integers(0, data.size, size=data.size)]
    return out


def bootstrap_ci(
    counts_by_condition: CountsByCondition,
    analysis_fn: AnalysisFn,
    n_resamples: int = 10_000,
    level: float = 0.95,
    seed: int = 1234,
    threads: int = 1,
) -> BootstrapInterval:
    """Resample every condition with replacement, rerun ``analysis_fn`` and build the interval.

    Replica ``i`` draws from its own stream spawned from ``seed``, so results do not
    depend on ``threads``.
    """
    if n_resamples < 1:
        raise ValueError(f"n_resamples must be at least 1, got {n_resamples}")
    if any(np.asarray(c).size == 0 for c in counts_by_condition.values()):
        raise ValueError("every condition needs at least one count")
    estimate = float(analysis_fn(counts_by_condition))
    streams = np.random.SeedSequence(seed).spawn(n_resamples)

    def replica(stream: np.random.SeedSequence) -> float:
        return float(analysis_fn(_resample(counts_by_condition, np.random.default_rng(stream))))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        replicates = np.fromiter(pool.map(replica, streams), dtype=float, count=n_resamples)

    if np.ptp(replicates) == 0.0:
        logger.warning("bootstrap distribution is degenerate value=%.6g", replicates[0])
        return BootstrapInterval(
            estimate=estimate,
            lower=estimate,
            upper=estimate,
            level=level,
            z0=0.0,
            n_resamples=n_resamples,
            degenerate=True,
        )
    lower, upper, z0 = bca_interval(replicates, estimate, level)
    logger.debug(
        "bootstrap estimate=%.5f lower=%.5f upper=%.5f z0=%.3f", estimate, lower, upper, z0
    )
    return BootstrapInterval(
        estimate=estimate, lower=lower, upper=upper, level=level, z0=z0, n_resamples=n_resamples
    )
