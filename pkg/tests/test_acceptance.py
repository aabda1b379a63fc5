"""Full-scale reproduction runs.

These take minutes rather than seconds; deselect them with ``-m "not slow"``.
"""

import json

import numpy as np
import pytest

from fedsubspace import (
    ExperimentConfig,
    ExperimentKind,
    MonitorLevel,
    SimConfig,
    diversity_stats,
    gen_ground_truth,
    run_training,
)
from fedsubspace.concentration import (
    averaged_gram_deviation_experiment,
    gram_deviation_experiment,
    head_sampling_event_rate,
)
from fedsubspace.experiments import EXIT_OK, SUMMARY_FILE, run_experiment
from fedsubspace.linalg import principal_angle_distance
from fedsubspace.lowerbound import (
    construct_adversarial,
    make_b0_containing_product,
    paired_dgd_experiment,
)
from fedsubspace.monitors import global_grad_norm
from fedsubspace.problem import head_sampling_threshold, theorem_step_size

pytestmark = pytest.mark.slow

SEEDS = range(10)


@pytest.fixture(scope="module")
def recovery_runs():
    """Final distances and gradient norms of FedAvg and D-GD on ten seeds."""
    config = SimConfig(monitor=MonitorLevel.OFF)
    runs = {"fedavg": [], "dgd": []}
    for seed in SEEDS:
        for name, sim in (("fedavg", config), ("dgd", config.as_dgd())):
            result = run_training(sim.replace(seed=seed))
            runs[name].append(
                (
                    result.dist0,
                    principal_angle_distance(result.final_state.B, result.ground_truth.b_star),
                    global_grad_norm(result.final_state, result.ground_truth),
                )
            )
    return {name: np.array(values) for name, values in runs.items()}


# ---------------------------------------------------------------------------
# Representation recovery
# ---------------------------------------------------------------------------
class TestRepresentationRecovery:
    def test_fedavg_recovers_the_subspace(self, recovery_runs):
        assert np.median(recovery_runs["fedavg"][:, 1]) < 1e-6

    def test_dgd_stays_far(self, recovery_runs):
        dgd = recovery_runs["dgd"]
        assert np.median(dgd[:, 1] / dgd[:, 0]) >= 0.5

    def test_dgd_reaches_a_stationary_point_fedavg_does_not(self, recovery_runs):
        assert np.median(recovery_runs["dgd"][:, 2]) < 1e-6
        assert np.median(recovery_runs["fedavg"][:, 2]) > 1e-3


# ---------------------------------------------------------------------------
# Hypotheses at the guaranteed step size
# ---------------------------------------------------------------------------
class TestGuaranteedStepSizeRun:
    @pytest.mark.parametrize("seed", range(5))
    def test_every_hypothesis_holds(self, seed):
        gt = gen_ground_truth(20, 3, 10, seed=seed)
        stats = diversity_stats(gt.heads)
        alpha = theorem_step_size(stats, 0.5, 2)
        config = SimConfig(
            d=20,
            k=3,
            M=10,
            tau=2,
            alpha=alpha,
            T=500,
            seed=seed,
            delta0_target=0.5,
            monitor=MonitorLevel.FULL,
        )
        result = run_training(config, ground_truth=gt)
        rate = 1.0 - 0.04 * alpha**2 * 2 * stats.mu**2 * result.E0
        previous = result.dist0
        for metrics in result.metrics:
            assert metrics.global_flags.all_hold(), metrics.t
            assert metrics.local_flags.all_hold(), metrics.t
            assert metrics.dist <= rate ** (metrics.t - 1) * (1.0 + 1e-9)
            assert metrics.dist <= previous * (1.0 + 1e-9)
            previous = metrics.dist


# ---------------------------------------------------------------------------
# D-GD lower bound
# ---------------------------------------------------------------------------
class TestLowerBound:
    @pytest.mark.parametrize("delta0", [0.1, 0.3, 0.5])
    def test_paired_runs(self, delta0):
        gt = gen_ground_truth(100, 5, 40, seed=0)
        b0 = make_b0_containing_product(gt.b_star, gt.heads, delta0, seed=0)
        pair = construct_adversarial(b0, gt.b_star, gt.heads)
        report = paired_dgd_experiment(pair, gt.heads, alpha=0.4, T=2000)
        assert all(value < 1e-8 for value in report.residuals.values())
        assert report.bit_identical
        assert report.final_max_dist >= 0.7 * delta0 - 1e-6
        assert report.triangle_holds


# ---------------------------------------------------------------------------
# Fine-tuning
# ---------------------------------------------------------------------------
def test_fedavg_pretraining_fine_tunes_better(tmp_path):
    config = ExperimentConfig(kind=ExperimentKind.FINETUNE, out=str(tmp_path), trials=10)
    assert run_experiment(config) == EXIT_OK
    summary = json.loads((tmp_path / SUMMARY_FILE).read_text(encoding="utf-8"))
    assert summary["result"]["fedavg_better_for_all_n"] is True


# ---------------------------------------------------------------------------
# Concentration
# ---------------------------------------------------------------------------
class TestConcentration:
    def test_single_covariance_slope(self):
        curve = gram_deviation_experiment(100, 5, 5, (100, 1000, 10_000), trials=30, seed=0)
        assert -0.6 <= curve.fitted_slope <= -0.4

    def test_averaged_slope(self):
        curve = averaged_gram_deviation_experiment(
            100, 5, 5, (1, 10, 100), b=100, trials=30, seed=0
        )
        assert -0.6 <= curve.fitted_slope <= -0.4

    def test_head_sampling_at_threshold(self):
        gt = gen_ground_truth(100, 5, 40, seed=0)
        stats = diversity_stats(gt.heads)
        threshold = head_sampling_threshold(stats, 0.4, 10, 40)
        m = min(40, max(1, int(np.ceil(threshold))))
        report = head_sampling_event_rate(gt.heads, m, 0.4, T=10, trials=10_000, seed=0)
        assert report.rate == 1.0

    def test_single_head_with_tight_step(self):
        gt = gen_ground_truth(100, 5, 40, seed=0)
        report = head_sampling_event_rate(gt.heads, 1, 1e-3, T=10, trials=10_000, seed=0)
        assert report.rate < 1.0
