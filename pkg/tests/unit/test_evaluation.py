"""Unit tests for metrics, sweeps and win summaries."""

import numpy as np
import pytest

from irregular_forecast.models.features import FeatureConfig, FeatureName
from irregular_forecast.models.learners import LearnerConfig, LearnerKind
from irregular_forecast.models.pipeline import (
    LagRule,
    LagSchedule,
    PipelineConfig,
    ResampleConfig,
    Variant,
)
from irregular_forecast.models.report import Metric, SweepCell, SweepGrid, SweepReport
from irregular_forecast.models.series import EntityDataset
from irregular_forecast.services.evaluation_service import (
    SweepRunner,
    config_fingerprint,
    dataset_fingerprint,
    mae,
    r2,
    summarize_wins,
)
from irregular_forecast.services.learner_service import make_regressor
from irregular_forecast.services.pipeline_service import PipelineService
from irregular_forecast.utils.exceptions import ConfigurationError, MetricError
from tests.conftest import DAY

LASSO = LearnerKind.LASSO
FOREST = LearnerKind.RANDOM_FOREST


def _cell(frequency, variant, mae_value, r2_value=None, learner=LASSO):
    return SweepCell(
        frequency=frequency,
        lag=7,
        learner=learner,
        variant=variant,
        mae=mae_value,
        r2=r2_value,
        n_test=5,
    )


def _report(cells):
    return SweepReport(cells=cells, seed=42, config_fingerprint="c", dataset_fingerprint="d")


@pytest.fixture
def runner() -> SweepRunner:
    """Create sweep runner instance."""
    return SweepRunner()


@pytest.fixture
def sweep_config() -> PipelineConfig:
    """Daily lag-3 configuration with a small forest."""
    return PipelineConfig(
        resample=ResampleConfig(frequency=DAY),
        lag=3,
        learner=LearnerConfig(n_trees=10, seed=3),
    )


class TestMetrics:
    """Test mae and r2."""

    def test_mae(self):
        """Test mean absolute error cases."""
        assert mae([1, 2, 3], [1, 2, 3]) == 0.0
        assert mae([1, 3], [2, 2]) == 1.0

    def test_mae_shuffle_invariant(self, rng):
        """Test that reordering pairs does not change the error."""
        pred, actual = rng.normal(size=20), rng.normal(size=20)
        order = rng.permutation(20)
        assert mae(pred[order], actual[order]) == pytest.approx(mae(pred, actual))

    def test_r2(self):
        """Test perfect, mean and worse-than-mean predictions."""
        actual = [1.0, 2.0, 3.0, 4.0]
        assert r2(actual, actual) == 1.0
        assert r2([2.5] * 4, actual) == 0.0
        assert r2([4.0, 3.0, 2.0, 1.0], actual) < 0

    def test_r2_constant_target(self):
        """Test that R² is undefined for a constant target."""
        assert r2([1.0, 2.0], [3.0, 3.0]) is None

    @pytest.mark.parametrize("pred,actual", [([1, 2], [1]), ([], [])])
    def test_invalid_lengths(self, pred, actual):
        """Test mismatched and empty inputs."""
        with pytest.raises(MetricError):
            mae(pred, actual)
        with pytest.raises(MetricError):
            r2(pred, actual)


class TestSummarizeWins:
    """Test summarize_wins."""

    def test_half_of_frequencies(self):
        """Test a 9 of 18 win rate."""
        cells = []
        for i in range(18):
            f = 250.0 * (i + 1)
            better = i % 2 == 0
            cells.append(_cell(f, Variant.BASELINE, 2.0, 0.5))
            cells.append(_cell(f, Variant.AUTOFITS, 1.0 if better else 3.0, 0.7 if better else 0.4))
        table = summarize_wins(_report(cells))

        record = table.record(LASSO, Variant.AUTOFITS, Metric.MAE)
        assert record.wins == 9
        assert record.frequencies == 18
        assert record.win_rate == 0.5
        assert table.record(LASSO, Variant.AUTOFITS, Metric.R2).wins == 9

    def test_tie_shares_win(self):
        """Test that tied variants split the win."""
        table = summarize_wins(
            _report([_cell(1.0, Variant.BASELINE, 2.0), _cell(1.0, Variant.AUTOFITS, 2.0)])
        )
        assert table.record(LASSO, Variant.BASELINE, Metric.MAE).wins == 0.5
        assert table.record(LASSO, Variant.AUTOFITS, Metric.MAE).wins == 0.5
        assert set(table.winners[0].winners) == {Variant.BASELINE, Variant.AUTOFITS}

    def test_single_variant(self):
        """Test that a lone variant wins everything."""
        table = summarize_wins(_report([_cell(1.0, Variant.AUTOFITS, 2.0), _cell(2.0, Variant.AUTOFITS, 1.0)]))
        assert table.record(LASSO, Variant.AUTOFITS, Metric.MAE).win_rate == 1.0

    def test_failed_cells_do_not_compete(self):
        """Test that a failed variant cannot win."""
        cells = [
            _cell(1.0, Variant.BASELINE, 5.0),
            SweepCell.failed(1.0, 7, LASSO, Variant.AUTOFITS, "no rows"),
        ]
        table = summarize_wins(_report(cells))
        assert table.record(LASSO, Variant.BASELINE, Metric.MAE).wins == 1.0
        assert table.record(LASSO, Variant.AUTOFITS, Metric.MAE).wins == 0.0

    def test_positive_r2_only(self):
        """Test that non-positive R² values can be excluded."""
        cells = [
            _cell(1.0, Variant.BASELINE, 1.0, -0.2),
            _cell(1.0, Variant.AUTOFITS, 1.5, -0.5),
        ]
        assert summarize_wins(_report(cells)).record(LASSO, Variant.BASELINE, Metric.R2).wins == 1.0
        strict = summarize_wins(_report(cells), positive_r2_only=True)
        assert strict.record(LASSO, Variant.BASELINE, Metric.R2).wins == 0.0
        assert strict.positive_r2_only

    def test_learners_counted_separately(self):
        """Test per-learner win tables."""
        cells = [
            _cell(1.0, Variant.BASELINE, 1.0),
            _cell(1.0, Variant.AUTOFITS, 2.0),
            _cell(1.0, Variant.BASELINE, 2.0, learner=FOREST),
            _cell(1.0, Variant.AUTOFITS, 1.0, learner=FOREST),
        ]
        table = summarize_wins(_report(cells))
        assert table.record(LASSO, Variant.BASELINE, Metric.MAE).wins == 1.0
        assert table.record(FOREST, Variant.AUTOFITS, Metric.MAE).wins == 1.0


class TestFingerprints:
    """Test config and dataset fingerprints."""

    def test_enabled_order_irrelevant(self):
        """Test that the feature set hashes independently of iteration order."""
        names = list(FeatureName)
        a = PipelineConfig(
            resample=ResampleConfig(frequency=1.0), lag=2, features=FeatureConfig(enabled=set(names))
        )
        b = PipelineConfig(
            resample=ResampleConfig(frequency=1.0),
            lag=2,
            features=FeatureConfig(enabled=set(reversed(names))),
        )
        assert config_fingerprint(a) == config_fingerprint(b)

    def test_seed_changes_fingerprint(self, sweep_config):
        """Test sensitivity to the learner seed."""
        other = sweep_config.model_copy(
            update={"learner": sweep_config.learner.model_copy(update={"seed": 4})}
        )
        assert config_fingerprint(sweep_config) != config_fingerprint(other)

    def test_dataset_fingerprint(self, daily_dataset, make_series):
        """Test sensitivity to values."""
        series = daily_dataset.entities[None]
        values = series.values.copy()
        values[0] += 1.0
        changed = EntityDataset(
            entities={None: make_series(series.timestamps, values)}, schema=daily_dataset.schema
        )
        assert dataset_fingerprint(daily_dataset) == dataset_fingerprint(daily_dataset)
        assert dataset_fingerprint(daily_dataset) != dataset_fingerprint(changed)


class TestSweepRunner:
    """Test SweepRunner.run_sweep."""

    @pytest.fixture
    def grid(self) -> SweepGrid:
        """Three daily frequencies for both learners and two variants."""
        return SweepGrid(
            frequencies=[DAY, 2 * DAY, 3 * DAY],
            learners=[LASSO, FOREST],
            variants=[Variant.BASELINE, Variant.AUTOFITS],
        )

    def test_every_cell_ok(self, runner, multi_entity_dataset, grid, sweep_config):
        """Test a toy grid where every cell succeeds."""
        report = runner.run_sweep(multi_entity_dataset, grid, sweep_config)
        assert len(report.cells) == 12
        assert all(cell.ok for cell in report.cells)
        assert report.frequencies == grid.frequencies
        assert all(cell.lag == 3 for cell in report.cells)

    def test_deterministic(self, runner, multi_entity_dataset, grid, sweep_config):
        """Test identical reports for identical inputs."""
        first = runner.run_sweep(multi_entity_dataset, grid, sweep_config)
        second = runner.run_sweep(multi_entity_dataset, grid, sweep_config)
        assert first.model_dump() == second.model_dump()

    def test_process_pool_matches_serial(self, runner, multi_entity_dataset, grid, sweep_config):
        """Test that two worker processes write the serial report."""
        serial = runner.run_sweep(multi_entity_dataset, grid, sweep_config, jobs=1)
        parallel = runner.run_sweep(multi_entity_dataset, grid, sweep_config, jobs=2)
        assert parallel.model_dump() == serial.model_dump()

    def test_single_cell_matches_direct_run(self, runner, multi_entity_dataset, sweep_config):
        """Test one cell against a hand-wired pipeline run."""
        grid = SweepGrid(frequencies=[DAY], learners=[LASSO], variants=[Variant.AUTOFITS])
        cell = runner.run_sweep(multi_entity_dataset, grid, sweep_config).cells[0]

        pipeline = PipelineService()
        merged = pipeline.run_dataset(multi_entity_dataset, sweep_config)
        split = pipeline.holdout_split(merged.rows, 0.10)
        train = pipeline.assemble_variant(split.train, Variant.AUTOFITS)
        test = pipeline.assemble_variant(split.test, Variant.AUTOFITS)
        predictions = make_regressor(sweep_config.learner).fit(train.X, train.y).predict(test.X)

        assert cell.mae == pytest.approx(mae(predictions, test.y))
        assert cell.n_test == test.n_rows

    def test_failed_frequency_recorded(self, runner, multi_entity_dataset, sweep_config):
        """Test that a frequency discarding every entity yields failed cells."""
        grid = SweepGrid(frequencies=[DAY, 100 * DAY], variants=[Variant.BASELINE])
        report = runner.run_sweep(multi_entity_dataset, grid, sweep_config)

        ok, failed = report.cells
        assert ok.ok
        assert failed.status.startswith("failed: ")
        assert failed.entities_discarded == len(multi_entity_dataset.entities)
        assert not report.all_failed

    def test_lag_schedule_per_frequency(self, runner, multi_entity_dataset):
        """Test that each frequency uses its scheduled lag."""
        cfg = PipelineConfig(
            resample=ResampleConfig(frequency=DAY),
            lag_schedule=LagSchedule(
                rules=[LagRule(lower=DAY, upper=2 * DAY, lag=4), LagRule(lower=2 * DAY, lag=2)]
            ),
        )
        grid = SweepGrid(frequencies=[DAY, 3 * DAY], variants=[Variant.BASELINE])
        report = runner.run_sweep(multi_entity_dataset, grid, cfg)
        assert [cell.lag for cell in report.cells] == [4, 2]

    def test_uncovered_schedule(self, runner, multi_entity_dataset):
        """Test that every grid frequency needs a scheduled lag."""
        cfg = PipelineConfig(
            resample=ResampleConfig(frequency=DAY),
            lag_schedule=LagSchedule(rules=[LagRule(lower=DAY, upper=2 * DAY, lag=4)]),
        )
        grid = SweepGrid(frequencies=[DAY, 3 * DAY])
        with pytest.raises(ConfigurationError, match="lag schedule"):
            runner.run_sweep(multi_entity_dataset, grid, cfg)

    def test_merged_needs_external(self, runner, multi_entity_dataset, sweep_config):
        """Test the external bundle requirement."""
        grid = SweepGrid(frequencies=[DAY], variants=[Variant.MERGED])
        with pytest.raises(ConfigurationError, match="external"):
            runner.run_sweep(multi_entity_dataset, grid, sweep_config)

    def test_fingerprints_recorded(self, runner, multi_entity_dataset, sweep_config):
        """Test run metadata on the report."""
        grid = SweepGrid(frequencies=[DAY], variants=[Variant.BASELINE])
        report = runner.run_sweep(multi_entity_dataset, grid, sweep_config)
        assert report.seed == 3
        assert report.config_fingerprint == config_fingerprint(sweep_config, grid)
        assert report.dataset_fingerprint == dataset_fingerprint(multi_entity_dataset)
        assert np.isfinite(report.cells[0].mae)
