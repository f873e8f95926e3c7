"""Per-entity feature construction, merging, holdout and forecasting."""

import math
from itertools import groupby
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from irregular_forecast.models.features import FeatureConfig, FeatureRow, lag_columns
from irregular_forecast.models.pipeline import (
    DesignMatrix,
    DiscardRecord,
    EntityResult,
    ExternalFeatures,
    Forecast,
    MergedRows,
    PipelineConfig,
    SplitDataset,
    Variant,
)
from irregular_forecast.models.series import EntityDataset, IrregularSeries, entity_sort_key
from irregular_forecast.services.embedding_service import build_embedding, build_forecast_row
from irregular_forecast.services.feature_service import (
    compute_feature_matrix,
    compute_feature_row,
    feature_vector,
)
from irregular_forecast.services.learner_service import make_regressor
from irregular_forecast.services.resample_service import resample
from irregular_forecast.utils.exceptions import (
    ConfigurationError,
    DataError,
    ExternalFeatureError,
    InsufficientObservationsError,
)
from irregular_forecast.utils.monitoring import create_span, increment_counter
from irregular_forecast.utils.parallel import map_ordered

# Absorbs float error in fraction * n so that 0.1 * 30 yields 3 test rows
CEIL_GUARD = 1e-9


def _row_sort_key(row: FeatureRow) -> Tuple[Tuple[int, str], float]:
    return (entity_sort_key(row.entity_id), row.target_time)


def _effective_features(cfg: PipelineConfig) -> FeatureConfig:
    """Baseline runs never read the catalog, so skip computing it."""
    if cfg.variant is Variant.BASELINE:
        return FeatureConfig.disabled()
    return cfg.features


def _entity_task(task: Tuple[IrregularSeries, PipelineConfig]) -> EntityResult:
    """Process-pool entry point for one entity."""
    series, cfg = task
    return PipelineService().run_entity(series, cfg)


class PipelineService:
    """Runs the resample, embed and featurize chain and trains forecasters."""

    def __init__(self) -> None:
        self.logger = structlog.get_logger(__name__)

    def run_entity(self, series: IrregularSeries, cfg: PipelineConfig) -> EntityResult:
        """Feature rows of one entity, or a discarded result when ``k <= l``."""
        if not np.all(np.isfinite(series.values)):
            raise DataError(
                f"Entity {series.entity_id!r} has missing values; impute input before resampling"
            )

        lag = cfg.effective_lag
        regular = resample(series, cfg.resample)
        if regular.k <= lag:
            reason = f"{regular.k} bins for lag {lag}"
            self.logger.warning(
                "Entity discarded",
                entity_id=series.entity_id,
                frequency=cfg.resample.frequency,
                bins=regular.k,
                lag=lag,
            )
            return EntityResult(
                entity_id=series.entity_id, bins=regular.k, lag=lag, discard_reason=reason
            )

        embedding = build_embedding(regular, lag)
        rows = compute_feature_matrix(embedding, series, _effective_features(cfg))
        return EntityResult(
            entity_id=series.entity_id, rows=tuple(rows), bins=regular.k, lag=lag
        )

    def run_dataset(
        self, dataset: EntityDataset, cfg: PipelineConfig, jobs: Optional[int] = 1
    ) -> MergedRows:
        """Run every entity (in parallel when ``jobs > 1``) and merge the results."""
        with create_span(
            "pipeline.run_dataset", tags={"frequency": cfg.resample.frequency}
        ):
            tasks = [(dataset.entities[entity_id], cfg) for entity_id in dataset.entity_ids]
            results = map_ordered(_entity_task, tasks, jobs=jobs)
            merged = self.merge_entities(results)

        self.logger.info(
            "Dataset processed",
            frequency=cfg.resample.frequency,
            rows=len(merged.rows),
            entities_used=merged.entities_used,
            discarded=len(merged.discarded),
        )
        increment_counter("pipeline.entities_discarded", len(merged.discarded))
        return merged

    def merge_entities(self, results: Sequence[EntityResult]) -> MergedRows:
        """Concatenate retained rows ordered by (entity_id, target_time)."""
        rows: List[FeatureRow] = []
        discarded: List[DiscardRecord] = []
        for result in sorted(results, key=lambda r: entity_sort_key(r.entity_id)):
            if result.discarded:
                discarded.append(
                    DiscardRecord(
                        entity_id=result.entity_id,
                        reason=result.discard_reason or "",
                        bins=result.bins,
                        lag=result.lag,
                    )
                )
            else:
                rows.extend(result.rows)
        rows.sort(key=_row_sort_key)
        return MergedRows(rows=tuple(rows), discarded=tuple(discarded))

    def holdout_split(self, rows: Sequence[FeatureRow], fraction: float) -> SplitDataset:
        """Per entity, the last ``ceil(fraction * n_e)`` rows become test rows.

        Entities with a single row train only. Every other entity keeps at
        least one training row.
        """
        if not rows:
            raise DataError("No feature rows to split; every entity was discarded")
        if not 0 < fraction < 1:
            raise ConfigurationError(
                f"Holdout fraction must lie in (0, 1), got {fraction}", config_key="holdout_fraction"
            )

        train: List[FeatureRow] = []
        test: List[FeatureRow] = []
        boundaries: Dict[Optional[str], Tuple[int, int]] = {}
        ordered = sorted(rows, key=_row_sort_key)
        for entity_id, group in groupby(ordered, key=lambda row: row.entity_id):
            entity_rows = list(group)
            n = len(entity_rows)
            n_test = 0
            if n > 1:
                n_test = min(max(math.ceil(fraction * n - CEIL_GUARD), 1), n - 1)
            train.extend(entity_rows[: n - n_test])
            test.extend(entity_rows[n - n_test :])
            boundaries[entity_id] = (n - n_test, n_test)

        return SplitDataset(train=tuple(train), test=tuple(test), boundaries=boundaries)

    def assemble_variant(
        self,
        rows: Sequence[FeatureRow],
        variant: Variant,
        external: Optional[ExternalFeatures] = None,
        frequency: Optional[float] = None,
    ) -> DesignMatrix:
        """Design matrix and targets for ``variant``.

        Baseline uses lag columns only, autofits appends the catalog and merged
        appends the external bundle joined on ``(entity_id, target_time)``.
        """
        keys = tuple(row.key for row in rows)
        y = np.array([row.target for row in rows], dtype=np.float64)
        if not rows:
            return DesignMatrix(X=np.empty((0, 0)), y=y, columns=(), keys=keys)

        columns: List[str] = lag_columns(rows[0].lags.size)
        blocks: List[np.ndarray] = [np.vstack([row.lags for row in rows])]

        if variant in (Variant.AUTOFITS, Variant.MERGED):
            feature_names = list(rows[0].features)
            columns.extend(feature_names)
            blocks.append(
                np.array([feature_vector(row, feature_names) for row in rows]).reshape(
                    len(rows), len(feature_names)
                )
            )

        if variant is Variant.MERGED:
            if external is None:
                raise ConfigurationError(
                    "The merged variant needs an external feature bundle",
                    config_key="external_features",
                )
            found: List[np.ndarray] = []
            missing: List[Tuple[Optional[str], float]] = []
            for key in keys:
                values = external.lookup(key, frequency)
                if values is None:
                    missing.append(key)
                else:
                    found.append(values)
            if missing:
                raise ExternalFeatureError(missing)
            columns.extend(external.columns)
            blocks.append(np.vstack(found).reshape(len(rows), len(external.columns)))

        return DesignMatrix(X=np.hstack(blocks), y=y, columns=tuple(columns), keys=keys)

    def forecast_dataset(
        self,
        dataset: EntityDataset,
        cfg: PipelineConfig,
        external: Optional[ExternalFeatures] = None,
        jobs: Optional[int] = 1,
    ) -> List[Forecast]:
        """Train one model on every retained entity's rows, forecast each entity's next bin."""
        merged = self.run_dataset(dataset, cfg, jobs=jobs)
        if not merged.rows:
            first = merged.discarded[0]
            raise InsufficientObservationsError(first.entity_id, first.bins, first.lag)

        retained = sorted({row.entity_id for row in merged.rows}, key=entity_sort_key)
        return self._fit_and_forecast(
            merged.rows, [dataset.entities[e] for e in retained], cfg, external
        )

    def forecast_next(
        self,
        series: IrregularSeries,
        cfg: PipelineConfig,
        external: Optional[ExternalFeatures] = None,
    ) -> Forecast:
        """Predict the value of the bin starting at ``t0 + k*f`` for one entity."""
        result = self.run_entity(series, cfg)
        if result.discarded:
            raise InsufficientObservationsError(series.entity_id, result.bins, result.lag)
        return self._fit_and_forecast(result.rows, [series], cfg, external)[0]

    def _fit_and_forecast(
        self,
        rows: Sequence[FeatureRow],
        entities: Sequence[IrregularSeries],
        cfg: PipelineConfig,
        external: Optional[ExternalFeatures],
    ) -> List[Forecast]:
        frequency = cfg.resample.frequency
        train = self.assemble_variant(rows, cfg.variant, external, frequency)
        with create_span("pipeline.fit", tags={"learner": cfg.learner.kind.value}):
            model = make_regressor(cfg.learner).fit(train.X, train.y)

        lag = cfg.effective_lag
        features = _effective_features(cfg)
        forecast_rows = [
            compute_feature_row(build_forecast_row(resample(series, cfg.resample), lag), series, features)
            for series in entities
        ]
        query = self.assemble_variant(forecast_rows, cfg.variant, external, frequency)
        predictions = model.predict(query.X)

        forecasts = [
            Forecast(entity_id=row.entity_id, target_time=row.target_time, prediction=float(p))
            for row, p in zip(forecast_rows, predictions)
        ]
        self.logger.info(
            "Forecasts produced",
            forecasts=len(forecasts),
            train_rows=train.n_rows,
            learner=cfg.learner.kind.value,
            variant=cfg.variant.value,
        )
        return forecasts
