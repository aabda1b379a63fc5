"""Tests for internal helper functions."""

import math

from fedsubspace._helpers import _format_flag, _format_float, _json_float


class TestFormatFloat:
    def test_none(self):
        assert _format_float(None) == "NA"

    def test_seventeen_significant_digits(self):
        assert _format_float(0.1) == "0.10000000000000001"

    def test_round_trips_exactly(self):
        value = 1.0 / 3.0
        assert float(_format_float(value)) == value

    def test_integers_have_no_trailing_zeros(self):
        assert _format_float(2.0) == "2"

    def test_nan(self):
        assert _format_float(math.nan) == "nan"


class TestFormatFlag:
    def test_values(self):
        assert _format_flag(True) == "1"
        assert _format_flag(False) == "0"
        assert _format_flag(None) == "NA"


class TestJsonFloat:
    def test_finite_passes_through(self):
        assert _json_float(1.5) == 1.5

    def test_non_finite_becomes_none(self):
        assert _json_float(math.inf) is None
        assert _json_float(math.nan) is None

    def test_none(self):
        assert _json_float(None) is None
