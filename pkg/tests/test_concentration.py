"""Tests for the Monte Carlo concentration experiments."""

import math

import numpy as np
import pytest

from fedsubspace.concentration import (
    MIN_TRIALS,
    averaged_gram_deviation_experiment,
    gram_deviation_experiment,
    head_sampling_event_rate,
)
from fedsubspace.exceptions import InvalidSampleSizeError
from fedsubspace.problem import gen_ground_truth


class TestGramDeviation:
    def test_decays_like_inverse_sqrt_b(self):
        curve = gram_deviation_experiment(10, 2, 2, (100, 1000, 10_000), trials=30, seed=0)
        assert curve.slope_defined
        assert curve.fitted_slope == pytest.approx(-0.5, abs=0.15)
        assert curve.mean_deviation[0] > curve.mean_deviation[-1]
        assert all(q >= 0.0 for q in curve.quantile95)

    def test_single_direction_matches_chi_square(self):
        e1 = np.eye(10)[:, :1]
        b = 10_000
        curve = gram_deviation_experiment(10, 1, 1, (b,), trials=60, seed=3, u=e1, v=e1)
        assert curve.mean_deviation[0] == pytest.approx(2.0 / math.sqrt(math.pi * b), rel=0.35)

    def test_single_size_has_no_slope(self):
        curve = gram_deviation_experiment(5, 1, 1, (50,), trials=MIN_TRIALS, seed=0)
        assert not curve.slope_defined
        assert math.isnan(curve.fitted_slope)
        assert curve.to_dict()["fitted_slope"] is None

    def test_deterministic(self):
        first = gram_deviation_experiment(5, 1, 2, (20, 40), trials=30, seed=7)
        second = gram_deviation_experiment(5, 1, 2, (20, 40), trials=30, seed=7)
        assert first == second

    def test_too_few_trials_raises(self):
        with pytest.raises(ValueError, match="at least 30"):
            gram_deviation_experiment(5, 1, 1, (10, 20), trials=MIN_TRIALS - 1, seed=0)

    @pytest.mark.parametrize("sizes", [(), (10, 10), (20, 10), (0, 10)])
    def test_bad_sizes_raise(self, sizes):
        with pytest.raises(ValueError, match="b_values"):
            gram_deviation_experiment(5, 1, 1, sizes, trials=30, seed=0)


class TestAveragedGramDeviation:
    def test_decays_like_inverse_sqrt_m(self):
        curve = averaged_gram_deviation_experiment(
            10, 2, 2, (1, 10, 100), b=50, trials=30, seed=0
        )
        assert curve.fitted_slope == pytest.approx(-0.5, abs=0.15)

    def test_one_client_reproduces_single_covariance(self):
        single = gram_deviation_experiment(8, 2, 1, (40,), trials=30, seed=5)
        averaged = averaged_gram_deviation_experiment(8, 2, 1, (1,), b=40, trials=30, seed=5)
        assert averaged.mean_deviation == single.mean_deviation
        assert averaged.quantile95 == single.quantile95

    def test_too_few_factors_raise(self):
        factors = [np.eye(6)[:, :1]] * 2
        with pytest.raises(ValueError, match="U factors"):
            averaged_gram_deviation_experiment(
                6, 1, 1, (1, 5), b=10, trials=30, seed=0, us=factors
            )


class TestHeadSamplingEventRate:
    @pytest.fixture
    def heads(self):
        return gen_ground_truth(10, 3, 20, seed=0).heads

    def test_full_participation_always_succeeds(self, heads):
        report = head_sampling_event_rate(heads, 20, alpha=1e-3, T=5, trials=50, seed=0)
        assert report.rate == 1.0
        assert report.successes == 50

    def test_single_head_with_tiny_step_fails(self, heads):
        report = head_sampling_event_rate(heads, 1, alpha=1e-3, T=5, trials=50, seed=0)
        assert report.rate == 0.0

    def test_rate_grows_with_m(self, heads):
        rates = [
            head_sampling_event_rate(heads, m, alpha=0.3, T=3, trials=200, seed=1).rate
            for m in (2, 10, 20)
        ]
        assert rates[0] <= rates[1] <= rates[2] == 1.0

    def test_deterministic(self, heads):
        first = head_sampling_event_rate(heads, 8, alpha=0.3, T=3, trials=40, seed=2)
        second = head_sampling_event_rate(heads, 8, alpha=0.3, T=3, trials=40, seed=2)
        assert first == second

    @pytest.mark.parametrize("m", [0, 21])
    def test_sample_size_out_of_range_raises(self, heads, m):
        with pytest.raises(InvalidSampleSizeError, match="cannot sample"):
            head_sampling_event_rate(heads, m, alpha=0.1, T=1, trials=1, seed=0)
