"""Unit tests for delay embedding and source windows."""

import math

import numpy as np
import pytest

from irregular_forecast.models.pipeline import ResampleConfig
from irregular_forecast.services.embedding_service import (
    build_embedding,
    build_forecast_row,
    window_arrays,
    window_observations,
)
from irregular_forecast.services.resample_service import resample


@pytest.fixture
def unit_grid(make_series):
    """Build a regular series of width one from a list of values."""

    def _build(values):
        series = make_series(list(range(len(values))), values)
        return resample(series, ResampleConfig(frequency=1)), series

    return _build


class TestBuildEmbedding:
    """Test build_embedding."""

    def test_rows_and_targets(self, unit_grid):
        """Test the sliding windows of a short series."""
        reg, _ = unit_grid([1, 2, 3, 4, 5])
        matrix = build_embedding(reg, 3)

        assert len(matrix) == 2
        assert matrix.lag_matrix().tolist() == [[1, 2, 3], [2, 3, 4]]
        assert [row.target for row in matrix.rows] == [4.0, 5.0]

    def test_insufficient_series(self, unit_grid):
        """Test that k equal to l gives no rows."""
        reg, _ = unit_grid([1.0] * 7)
        matrix = build_embedding(reg, 7)
        assert len(matrix) == 0
        assert matrix.insufficient

    def test_row_count(self, unit_grid):
        """Test k - l rows for a long series."""
        reg, _ = unit_grid(np.arange(100, dtype=float).tolist())
        matrix = build_embedding(reg, 10)
        assert len(matrix) == 90
        assert not matrix.insufficient

    def test_invalid_lag(self, unit_grid):
        """Test that the lag must be positive."""
        reg, _ = unit_grid([1, 2])
        with pytest.raises(ValueError):
            build_embedding(reg, 0)

    def test_row_metadata(self, make_series):
        """Test lag timestamps, target time and imputed flags."""
        reg = resample(make_series([10, 12, 16], [1, 2, 3]), ResampleConfig(frequency=2))
        row = build_embedding(reg, 2).rows[0]

        assert row.lag_timestamps.tolist() == [10.0, 12.0]
        assert row.window == (10.0, 14.0)
        assert row.target_time == 14.0
        assert row.frequency == 2.0
        assert reg.imputed.tolist() == [False, False, True, False]

    def test_windows_match_brute_force(self, random_series):
        """Test that each window holds exactly the observations inside it."""
        for _ in range(5):
            series = random_series(80)
            reg = resample(series, ResampleConfig(frequency=1.3))
            matrix = build_embedding(reg, 4)
            for row in matrix.rows:
                lo, hi = row.window
                expected = [
                    i for i, t in enumerate(series.timestamps) if lo <= t < hi
                ]
                assert row.window_obs.tolist() == expected
                assert hi - lo == pytest.approx(4 * 1.3)
                assert row.target_time == hi


class TestForecastRow:
    """Test build_forecast_row."""

    def test_final_window(self, unit_grid):
        """Test that the forecast row covers the last l bins."""
        reg, _ = unit_grid([1, 2, 3, 4, 5])
        row = build_forecast_row(reg, 3)

        assert row.lags.tolist() == [3.0, 4.0, 5.0]
        assert math.isnan(row.target)
        assert row.target_time == 5.0

    def test_too_short(self, unit_grid):
        """Test that fewer than l bins is an error."""
        reg, _ = unit_grid([1, 2])
        with pytest.raises(ValueError, match="at least 3"):
            build_forecast_row(reg, 3)


class TestWindowObservations:
    """Test window extraction from the source series."""

    def test_arrays_and_observations_agree(self, make_series):
        """Test both window views on a known layout."""
        series = make_series([0, 0.5, 1.2, 2.9, 3.0], [1, 2, 3, 4, 5])
        reg = resample(series, ResampleConfig(frequency=1))
        row = build_embedding(reg, 2).rows[1]

        times, values = window_arrays(row, series)
        assert times.tolist() == [1.2, 2.9]
        assert values.tolist() == [3.0, 4.0]
        assert [obs.timestamp for obs in window_observations(row, series)] == [1.2, 2.9]
