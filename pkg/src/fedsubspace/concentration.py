"""Monte Carlo checks of the concentration statements used by the analysis.

Only scaling exponents are measured; absolute constants are not.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike

from .enums import StreamTag
from .exceptions import InvalidSampleSizeError
from .linalg import spectral_norm
from .models import DeviationCurve, EventRateReport, FloatArray
from .problem import diversity_stats, head_sampling_threshold
from .rng import counter_stream, stream_key

logger = logging.getLogger(__name__)

MIN_TRIALS = 30


def _check_sizes(sizes: Sequence[int], name: str) -> tuple[int, ...]:
    values = tuple(int(size) for size in sizes)
    if not values:
        raise ValueError(f"{name} must be nonempty")
    if values[0] < 1 or any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} must be positive and strictly increasing")
    return values


def _check_trials(trials: int) -> None:
    if trials < MIN_TRIALS:
        raise ValueError(f"need at least {MIN_TRIALS} trials, got {trials}")


def _factors(
    seed: int, index: int, d: int, d1: int, d2: int
) -> tuple[FloatArray, FloatArray]:
    gaussian = counter_stream(stream_key(seed, StreamTag.GRAM_FACTORS, index)).normal(
        (d, d1 + d2)
    )
    return gaussian[:, :d1], gaussian[:, d1:]


def _sampled_cross_gram(
    U: FloatArray, V: FloatArray, b: int, seed: int, trial: int, index: int
) -> FloatArray:
    """``U^T Sigma V - U^T V`` for one empirical covariance of *b* samples."""
    X = counter_stream(stream_key(seed, StreamTag.GRAM_SAMPLES, b, trial, index)).normal(
        (b, U.shape[0])
    )
    return (X @ U).T @ (X @ V) / b - U.T @ V


def _fit_curve(sizes: tuple[int, ...], deviations: list[FloatArray]) -> DeviationCurve:
    means = tuple(float(np.mean(values)) for values in deviations)
    quantiles = tuple(float(np.quantile(values, 0.95)) for values in deviations)
    slope = math.nan
    defined = len(sizes) >= 2 and all(mean > 0.0 for mean in means)
    if defined:
        slope = float(np.polyfit(np.log(sizes), np.log(means), 1)[0])
    return DeviationCurve(
        sample_sizes=sizes,
        mean_deviation=means,
        quantile95=quantiles,
        fitted_slope=slope,
        slope_defined=defined,
    )


def gram_deviation_experiment(
    d: int,
    d1: int,
    d2: int,
    b_values: Sequence[int],
    trials: int,
    seed: int,
    *,
    u: ArrayLike | None = None,
    v: ArrayLike | None = None,
) -> DeviationCurve:
    """Deviation ``||U^T Sigma V - U^T V||_2`` of one empirical covariance.

    Parameters
    ----------
    d, d1, d2:
        Sample dimension and the column counts of ``U`` and ``V``.
    b_values:
        Strictly increasing sample sizes.
    trials:
        Monte Carlo repetitions per sample size (at least 30).
    seed:
        Master seed.
    u, v:
        Fixed factors; Gaussian ones are drawn when omitted.
    """
    sizes = _check_sizes(b_values, "b_values")
    _check_trials(trials)
    U, V = _factors(seed, 0, d, d1, d2)
    if u is not None:
        U = np.asarray(u, dtype=np.float64).reshape(d, -1)
    if v is not None:
        V = np.asarray(v, dtype=np.float64).reshape(d, -1)

    deviations = []
    for b in sizes:
        values = np.array(
            [
                spectral_norm(_sampled_cross_gram(U, V, b, seed, trial, 0))
                for trial in range(trials)
            ]
        )
        deviations.append(values)
        logger.debug("b=%d mean deviation %.6e", b, values.mean())
    return _fit_curve(sizes, deviations)


def averaged_gram_deviation_experiment(
    d: int,
    d1: int,
    d2: int,
    M_values: Sequence[int],
    b: int,
    trials: int,
    seed: int,
    *,
    us: Sequence[ArrayLike] | None = None,
    vs: Sequence[ArrayLike] | None = None,
) -> DeviationCurve:
    """Deviation ``||1/M sum_i (U_i^T Sigma_i V_i - U_i^T V_i)||_2`` against ``M``.

    Client ``i`` uses the same streams as the single-covariance experiment
    does for index ``0``, so ``M = 1`` reproduces it exactly.
    """
    sizes = _check_sizes(M_values, "M_values")
    _check_trials(trials)
    largest = sizes[-1]
    if us is not None and len(us) < largest:
        raise ValueError(f"need {largest} U factors, got {len(us)}")
    if vs is not None and len(vs) < largest:
        raise ValueError(f"need {largest} V factors, got {len(vs)}")

    factors = []
    for i in range(largest):
        U, V = _factors(seed, i, d, d1, d2)
        if us is not None:
            U = np.asarray(us[i], dtype=np.float64).reshape(d, -1)
        if vs is not None:
            V = np.asarray(vs[i], dtype=np.float64).reshape(d, -1)
        factors.append((U, V))

    deviations = []
    for M in sizes:
        values = np.empty(trials)
        for trial in range(trials):
            total = np.zeros((factors[0][0].shape[1], factors[0][1].shape[1]))
            for i in range(M):
                U, V = factors[i]
                total += _sampled_cross_gram(U, V, b, seed, trial, i)
            values[trial] = spectral_norm(total / M)
        deviations.append(values)
        logger.debug("M=%d mean deviation %.6e", M, values.mean())
    return _fit_curve(sizes, deviations)


def head_sampling_event_rate(
    heads: ArrayLike,
    m: int,
    alpha: float,
    T: int,
    trials: int,
    seed: int,
) -> EventRateReport:
    """Frequency with which subsampled head statistics stay close for T rounds.

    A trial succeeds when, in each of *T* simulated rounds of sampling *m*
    heads without replacement, the sample mean is within
    ``4 alpha^2 L^3`` of the full mean and the sample second moment is within
    ``4 alpha^2 L^4`` of the full second moment (spectral norm).
    """
    W = np.atleast_2d(np.asarray(heads, dtype=np.float64))
    M = W.shape[0]
    if not 1 <= m <= M:
        raise InvalidSampleSizeError(f"cannot sample {m} of {M} heads")
    if trials < 1 or T < 1:
        raise ValueError("trials and T must be at least 1")
    stats = diversity_stats(W)
    L = stats.L_max
    mean_bound = 4.0 * alpha**2 * L**3
    moment_bound = 4.0 * alpha**2 * L**4
    full_mean = W.mean(axis=0)
    full_moment = W.T @ W / M

    successes = 0
    for trial in range(trials):
        held = True
        for t in range(T):
            stream = counter_stream(stream_key(seed, StreamTag.HEAD_EVENT, trial, t))
            sample = W[sorted(stream.partial_shuffle(M, m))]
            mean_gap = float(np.linalg.norm(sample.mean(axis=0) - full_mean))
            moment_gap = spectral_norm(sample.T @ sample / m - full_moment)
            if mean_gap > mean_bound or moment_gap > moment_bound:
                held = False
                break
        successes += held
    report = EventRateReport(
        m=m,
        trials=trials,
        successes=successes,
        threshold=head_sampling_threshold(stats, alpha, T, M),
        mean_bound=mean_bound,
        second_moment_bound=moment_bound,
    )
    logger.info(
        "head sampling m=%d: rate %.4f over %d trials (threshold m %.2f)",
        m,
        report.rate,
        trials,
        report.threshold,
    )
    return report
