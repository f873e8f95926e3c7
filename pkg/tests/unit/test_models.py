"""Unit tests for configuration and container models."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from irregular_forecast.models.embedding import EmbeddingMatrix
from irregular_forecast.models.features import (
    FeatureConfig,
    FeatureName,
    aux_feature_column,
    feature_columns,
    lag_columns,
)
from irregular_forecast.models.learners import LearnerConfig, LearnerKind
from irregular_forecast.models.pipeline import (
    LagRule,
    LagSchedule,
    PipelineConfig,
    ResampleConfig,
    Variant,
)
from irregular_forecast.models.report import SweepCell, SweepGrid, SweepReport
from irregular_forecast.models.series import (
    ColumnSpec,
    EntityDataset,
    IrregularSeries,
    Observation,
    RegularSeries,
    ValidationReport,
    entity_sort_key,
)


class TestIrregularSeries:
    """Test IrregularSeries invariants."""

    def test_arrays_are_read_only(self, make_series):
        """Test that stored arrays cannot be modified."""
        series = make_series([0, 1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            series.values[0] = 5.0

    def test_unsorted_timestamps_rejected(self, make_series):
        """Test that construction requires nondecreasing timestamps."""
        with pytest.raises(ValueError, match="sorted"):
            make_series([2, 1], [1, 1])

    def test_duplicates_allowed(self, make_series):
        """Test that tied timestamps are permitted."""
        series = make_series([1, 1, 2], [1, 2, 3])
        assert len(series) == 3

    def test_empty_rejected(self, make_series):
        """Test that a series needs one observation."""
        with pytest.raises(ValueError, match="at least one"):
            make_series([], [])

    def test_from_observations_sorts(self):
        """Test building a series from unordered observations."""
        series = IrregularSeries.from_observations(
            "a", [Observation(3.0, 1.0), Observation(1.0, 2.0), Observation(2.0, 3.0)]
        )
        assert series.timestamps.tolist() == [1.0, 2.0, 3.0]
        assert series.values.tolist() == [2.0, 3.0, 1.0]

    def test_observation_requires_finite_timestamp(self):
        """Test that an observation rejects a non-finite timestamp."""
        with pytest.raises(ValueError):
            Observation(math.inf, 1.0)

    def test_is_finite(self, make_series):
        """Test missing value detection."""
        assert make_series([0, 1], [1, 2]).is_finite()
        assert not make_series([0, 1], [1, math.nan]).is_finite()


class TestEntityDataset:
    """Test EntityDataset ordering and schema checks."""

    def test_anonymous_entity_sorts_first(self):
        """Test deterministic entity order."""
        assert sorted(["b", None, "a"], key=entity_sort_key) == [None, "a", "b"]

    def test_mismatched_aux_rejected(self, make_series):
        """Test that all entities share the aux schema."""
        schema = ColumnSpec(timestamp_column="t", value_column="y", entity_column="e")
        with pytest.raises(ValueError, match="aux columns"):
            EntityDataset(
                entities={"a": make_series([0], [1], "a", aux={"x": [1]})},
                schema=schema,
                aux_columns=(),
            )

    def test_observation_count(self, make_series):
        """Test summed observation count."""
        schema = ColumnSpec(timestamp_column="t", value_column="y", entity_column="e")
        dataset = EntityDataset(
            entities={"a": make_series([0, 1], [1, 2], "a"), "b": make_series([0], [1], "b")},
            schema=schema,
        )
        assert dataset.observation_count == 3
        assert dataset.entity_ids == ["a", "b"]


class TestColumnSpec:
    """Test ColumnSpec validation."""

    def test_distinct_roles(self):
        """Test that one column cannot be timestamp and value."""
        with pytest.raises(ValidationError):
            ColumnSpec(timestamp_column="t", value_column="t")

    def test_drop_primary_rejected(self):
        """Test that a primary column cannot be dropped."""
        with pytest.raises(ValidationError):
            ColumnSpec(timestamp_column="t", value_column="y", drop_columns=["y"])


class TestValidationReport:
    """Test ValidationReport model."""

    def test_range_order(self):
        """Test that max must not precede min."""
        with pytest.raises(ValidationError):
            ValidationReport(
                count=2, duplicates=0, min_timestamp=5, max_timestamp=1, monotonic=True
            )


class TestRegularSeries:
    """Test RegularSeries invariants."""

    def test_imputed_matches_members(self):
        """Test that imputed flags must mirror empty bins."""
        with pytest.raises(ValueError, match="imputed"):
            RegularSeries(
                origin=0.0,
                frequency=1.0,
                values=[1.0, 0.0],
                imputed=[False, False],
                bin_members=(np.array([0]), np.array([], dtype=np.int64)),
            )

    def test_bin_timestamps(self):
        """Test bin start times."""
        reg = RegularSeries(
            origin=2.0,
            frequency=3.0,
            values=[1.0, 2.0],
            imputed=[False, False],
            bin_members=(np.array([0]), np.array([1])),
        )
        assert reg.bin_timestamps.tolist() == [2.0, 5.0]
        assert reg.bin_start(2) == 8.0


class TestFeatureColumns:
    """Test feature column naming."""

    def test_default_catalog_width(self):
        """Test the number of catalog columns with every feature enabled."""
        columns = feature_columns(FeatureConfig())
        assert len(columns) == 32
        assert len(set(columns)) == 32

    def test_naming_contract(self):
        """Test representative column names."""
        columns = feature_columns(FeatureConfig())
        assert columns[0] == "rel_disp_t_orig"
        assert columns[1] == "rel_disp_t_res"
        assert "t_dif_stats_orig_iqr" in columns
        assert "reg_mod_res_lasso_abs_error" in columns
        assert "missing_t_count_res" in columns
        assert "2d_space_area_orig" in columns
        assert "entropy_t_res" not in columns

    def test_disabled_catalog(self):
        """Test that a disabled catalog yields no columns."""
        assert feature_columns(FeatureConfig.disabled()) == []

    def test_aux_columns_appended(self):
        """Test window-mean aux columns."""
        cfg = FeatureConfig(enabled={FeatureName.MOV_AVG}, include_aux=True)
        assert feature_columns(cfg, ["price"]) == ["mov_avg_res", aux_feature_column("price")]

    def test_lag_columns(self):
        """Test lag column names."""
        assert lag_columns(3) == ["lag_1", "lag_2", "lag_3"]


class TestLagSchedule:
    """Test frequency-dependent lag sizes."""

    @pytest.fixture
    def schedule(self) -> LagSchedule:
        """Daily schedule in day units."""
        return LagSchedule(
            rules=[
                LagRule(lower=28, upper=None, lag=2),
                LagRule(lower=1, upper=14, lag=10),
                LagRule(lower=14, upper=21, lag=7),
                LagRule(lower=21, upper=28, lag=3),
            ]
        )

    @pytest.mark.parametrize(
        "frequency,lag", [(1, 10), (13, 10), (14, 7), (20, 7), (21, 3), (27, 3), (28, 2), (31, 2)]
    )
    def test_lag_for(self, schedule, frequency, lag):
        """Test rule lookup at range boundaries."""
        assert schedule.lag_for(frequency) == lag

    def test_uncovered_frequency(self, schedule):
        """Test that frequencies below every rule are rejected."""
        with pytest.raises(KeyError):
            schedule.lag_for(0.5)

    def test_overlap_rejected(self):
        """Test that overlapping ranges are rejected."""
        with pytest.raises(ValidationError, match="overlap"):
            LagSchedule(rules=[LagRule(lower=1, upper=10, lag=3), LagRule(lower=5, lag=2)])

    def test_empty_range_rejected(self):
        """Test that an upper bound must exceed the lower bound."""
        with pytest.raises(ValidationError):
            LagRule(lower=5, upper=5, lag=1)


class TestPipelineConfig:
    """Test PipelineConfig validation."""

    def test_exactly_one_lag_source(self):
        """Test that lag and lag_schedule are mutually exclusive and required."""
        resample = ResampleConfig(frequency=1.0)
        with pytest.raises(ValidationError):
            PipelineConfig(resample=resample)
        with pytest.raises(ValidationError):
            PipelineConfig(resample=resample, lag=3, lag_schedule=LagSchedule.constant(3))

    def test_effective_lag_from_schedule(self):
        """Test schedule lookup at the configured frequency."""
        cfg = PipelineConfig(
            resample=ResampleConfig(frequency=15.0),
            lag_schedule=LagSchedule(
                rules=[LagRule(lower=1, upper=14, lag=10), LagRule(lower=14, lag=7)]
            ),
        )
        assert cfg.effective_lag == 7
        assert cfg.at_frequency(2.0).effective_lag == 10

    @pytest.mark.parametrize("frequency", [0.0, -1.0, math.inf])
    def test_invalid_frequency(self, frequency):
        """Test that frequencies must be finite and positive."""
        with pytest.raises(ValidationError):
            ResampleConfig(frequency=frequency)

    @pytest.mark.parametrize("fraction", [0.0, 1.0])
    def test_holdout_fraction_bounds(self, fraction):
        """Test the open holdout interval."""
        with pytest.raises(ValidationError):
            PipelineConfig(resample=ResampleConfig(frequency=1.0), lag=2, holdout_fraction=fraction)

    def test_learner_defaults(self):
        """Test learner defaults."""
        cfg = LearnerConfig()
        assert cfg.kind is LearnerKind.LASSO
        assert cfg.lasso_lambda == 0.1
        assert cfg.n_trees == 100
        assert cfg.seed == 42


class TestEmbeddingMatrix:
    """Test EmbeddingMatrix helpers."""

    def test_empty_matrix(self):
        """Test an insufficient matrix."""
        matrix = EmbeddingMatrix(rows=(), l=7, k=7)
        assert matrix.insufficient
        assert matrix.lag_matrix().shape == (0, 7)
        assert matrix.rows == ()


class TestSweepModels:
    """Test sweep cell, grid and report models."""

    def test_failed_cell(self):
        """Test failure status formatting."""
        cell = SweepCell.failed(1.0, 3, LearnerKind.LASSO, Variant.BASELINE, "no rows")
        assert cell.status == "failed: no rows"
        assert not cell.ok
        assert cell.mae is None

    def test_ok_cell_needs_metrics(self):
        """Test that a successful cell carries an MAE."""
        with pytest.raises(ValidationError):
            SweepCell(frequency=1.0, lag=3, learner=LearnerKind.LASSO, variant=Variant.BASELINE)

    def test_r2_upper_bound(self):
        """Test that R² above one is rejected."""
        with pytest.raises(ValidationError):
            SweepCell(
                frequency=1.0,
                lag=3,
                learner=LearnerKind.LASSO,
                variant=Variant.BASELINE,
                mae=1.0,
                r2=1.5,
                n_test=1,
            )

    def test_report_rejects_duplicate_cells(self):
        """Test one cell per grid key."""
        cell = SweepCell.failed(1.0, 3, LearnerKind.LASSO, Variant.BASELINE, "x")
        with pytest.raises(ValidationError, match="Duplicate"):
            SweepReport(cells=[cell, cell], seed=1, config_fingerprint="a", dataset_fingerprint="b")

    def test_report_sorts_cells(self):
        """Test deterministic cell order."""
        cells = [
            SweepCell.failed(2.0, 3, LearnerKind.LASSO, Variant.BASELINE, "x"),
            SweepCell.failed(1.0, 3, LearnerKind.LASSO, Variant.BASELINE, "x"),
        ]
        report = SweepReport(cells=cells, seed=1, config_fingerprint="a", dataset_fingerprint="b")
        assert [cell.frequency for cell in report.cells] == [1.0, 2.0]
        assert report.all_failed

    def test_grid_size_and_dedup(self):
        """Test grid normalization."""
        grid = SweepGrid(
            frequencies=[3.0, 1.0, 3.0],
            learners=[LearnerKind.LASSO, LearnerKind.RANDOM_FOREST],
            variants=[Variant.BASELINE, Variant.AUTOFITS],
        )
        assert grid.frequencies == [1.0, 3.0]
        assert grid.size == 8

    def test_grid_rejects_empty(self):
        """Test that a grid needs frequencies."""
        with pytest.raises(ValidationError):
            SweepGrid(frequencies=[])
