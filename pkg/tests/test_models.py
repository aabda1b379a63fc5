"""Tests for the data models."""

import math

import numpy as np
import pytest

from fedsubspace.enums import MonitorLevel, Regime
from fedsubspace.exceptions import InvalidConfigError
from fedsubspace.models import (
    ROUND_COLUMNS,
    EventRateReport,
    GlobalHypothesisFlags,
    GroundTruth,
    LocalHypothesisFlags,
    LowerBoundReport,
    ModelState,
    MonitorConstants,
    RoundMetrics,
    SimConfig,
)


# ---------------------------------------------------------------------------
# GroundTruth / ModelState
# ---------------------------------------------------------------------------
class TestGroundTruth:
    def test_dimensions(self, small_truth):
        assert small_truth.d == 20
        assert small_truth.k == 3
        assert small_truth.M == 10

    def test_w_bar_and_target(self):
        gt = GroundTruth(b_star=np.eye(3)[:, :2], heads=np.array([[1.0, 0.0], [3.0, 2.0]]))
        np.testing.assert_array_equal(gt.w_bar, [2.0, 1.0])
        np.testing.assert_array_equal(gt.target(1), [3.0, 2.0, 0.0])


class TestModelState:
    def test_product(self):
        state = ModelState(B=np.eye(3)[:, :2], w=np.array([2.0, -1.0]))
        np.testing.assert_array_equal(state.product, [2.0, -1.0, 0.0])

    def test_is_finite(self):
        state = ModelState(B=np.ones((3, 2)), w=np.zeros(2))
        assert state.is_finite()
        assert state.is_finite(limit=1.0)
        assert not state.is_finite(limit=0.5)

    def test_nan_is_not_finite(self):
        state = ModelState(B=np.ones((3, 2)), w=np.array([np.nan, 0.0]))
        assert not state.is_finite()


# ---------------------------------------------------------------------------
# SimConfig
# ---------------------------------------------------------------------------
class TestSimConfig:
    def test_defaults(self):
        config = SimConfig()
        assert (config.d, config.k, config.M) == (100, 5, 40)
        assert config.tau == 2
        assert config.alpha == 0.4
        assert config.clients_per_round == 40
        assert config.regime is Regime.POPULATION
        assert config.monitor is MonitorLevel.GLOBAL
        assert config.constants == MonitorConstants(c3=4800.0, rate_const=0.04)
        config.validate()

    def test_as_dgd(self):
        config = SimConfig(M=10, m=4, tau=3).as_dgd()
        assert config.tau == 1
        assert config.clients_per_round == 10
        assert config.is_dgd

    def test_fedavg_is_not_dgd(self):
        assert not SimConfig(tau=2).is_dgd
        assert not SimConfig(tau=1, M=10, m=5).is_dgd

    @pytest.mark.parametrize(
        ("changes", "message"),
        [
            ({"k": 0}, "1 <= k < d"),
            ({"k": 100}, "1 <= k < d"),
            ({"M": 0}, "M must be at least 1"),
            ({"m": 41}, "m must be between 1 and M"),
            ({"m": 0}, "m must be between 1 and M"),
            ({"tau": 0}, "tau must be at least 1"),
            ({"alpha": 0.0}, "alpha must be positive"),
            ({"T": -1}, "T must be non-negative"),
            ({"noise_sigma": -0.1}, "noise_sigma"),
            ({"seed": -1}, "seed"),
            ({"regime": Regime.FINITE_SAMPLE}, "batch_size"),
            ({"threads": 0}, "threads"),
        ],
    )
    def test_validate_rejects(self, changes, message):
        with pytest.raises(InvalidConfigError, match=message):
            SimConfig().replace(**changes).validate()

    def test_zero_rounds_allowed(self):
        SimConfig(T=0).validate()

    def test_dict_round_trip(self):
        config = SimConfig(
            d=30,
            k=4,
            M=12,
            m=6,
            regime=Regime.FINITE_SAMPLE,
            batch_size=50,
            delta0_target=0.3,
            monitor=MonitorLevel.FULL,
        )
        assert SimConfig.from_dict(config.to_dict()) == config

    def test_from_dict_fills_defaults(self):
        assert SimConfig.from_dict({"d": 50}) == SimConfig(d=50)

    def test_to_dict_resolves_m(self):
        assert SimConfig(M=8).to_dict()["m"] == 8


# ---------------------------------------------------------------------------
# Hypothesis flags and round metrics
# ---------------------------------------------------------------------------
class TestFlags:
    def test_not_applicable_does_not_fail(self):
        flags = GlobalHypothesisFlags(a1=True, a2=True)
        assert flags.all_hold()
        assert flags.to_dict() == {"A1": True, "A2": True, "A3": None, "A4": None, "A5": None}

    def test_any_false_fails(self):
        assert not GlobalHypothesisFlags(a1=True, a4=False).all_hold()
        assert not LocalHypothesisFlags(a2_loc=False).all_hold()

    def test_local_infinite_margin_serializes_as_null(self):
        assert LocalHypothesisFlags().to_dict()["worst_margin"] is None


class TestRoundMetrics:
    def _metrics(self, **changes):
        base = RoundMetrics(
            t=4,
            dist=0.25,
            delta_norm=0.01,
            w_norm=1.5,
            grad_norm_global=0.5,
            perp_norm=0.2,
            E0=0.75,
        )
        return RoundMetrics(**{**base.__dict__, **changes})

    def test_row_matches_columns(self):
        row = self._metrics().to_row()
        assert len(row) == len(ROUND_COLUMNS)
        assert row[:2] == ["4", "0.25"]

    def test_row_without_flags_is_na(self):
        row = dict(zip(ROUND_COLUMNS, self._metrics().to_row()))
        assert row["A1"] == "NA"
        assert row["A4_loc"] == "NA"
        assert row["prior_weight_measured"] == "NA"

    def test_row_with_flags(self):
        metrics = self._metrics(
            global_flags=GlobalHypothesisFlags(a1=True, a2=False),
            local_flags=LocalHypothesisFlags(a3_loc=True),
            prior_weight_measured=0.5,
        )
        row = dict(zip(ROUND_COLUMNS, metrics.to_row()))
        assert (row["A1"], row["A2"], row["A3"]) == ("1", "0", "NA")
        assert row["A3_loc"] == "1"
        assert row["prior_weight_measured"] == "0.5"

    def test_to_dict_includes_flags(self):
        data = self._metrics(global_flags=GlobalHypothesisFlags(a2=True)).to_dict()
        assert data["A2"] is True
        assert data["a1_residual"] is None


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------
class TestLowerBoundReport:
    def _report(self, star, prime, slack=0.1):
        return LowerBoundReport(
            delta0=0.5,
            T=1,
            bit_identical=False,
            max_trajectory_gap=1e-16,
            dist_to_star=np.array([0.5, star]),
            dist_to_star_prime=np.array([0.5, prime]),
            separation=0.86,
            separation_bound=math.sqrt(3.0) / 2.0,
            separation_bound_sqrt=math.sqrt(0.5),
            triangle_slack=slack,
        )

    def test_case_and_final_max(self):
        report = self._report(0.6, 0.3)
        assert report.case == "star"
        assert report.final_max_dist == 0.6
        assert self._report(0.2, 0.7).case == "star_prime"

    def test_triangle_holds_within_tolerance(self):
        assert self._report(0.5, 0.5, slack=-1e-9).triangle_holds
        assert not self._report(0.5, 0.5, slack=-1e-6).triangle_holds

    def test_to_dict(self):
        data = self._report(0.6, 0.3).to_dict()
        assert data["case"] == "star"
        assert data["final_dist_star"] == 0.6
        assert data["residuals"] == {}


class TestEventRateReport:
    def test_rate(self):
        report = EventRateReport(
            m=5, trials=8, successes=6, threshold=4.2, mean_bound=1.0, second_moment_bound=2.0
        )
        assert report.rate == 0.75
        assert report.to_dict()["rate"] == 0.75
