"""Forecast metrics, frequency sweeps and win summaries."""

import hashlib
import json
import math
from collections import defaultdict
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from irregular_forecast.models.learners import LearnerKind
from irregular_forecast.models.pipeline import (
    ExternalFeatures,
    MergedRows,
    PipelineConfig,
    SplitDataset,
    Variant,
)
from irregular_forecast.models.report import (
    FrequencyWinner,
    Metric,
    SweepCell,
    SweepGrid,
    SweepReport,
    WinRecord,
    WinTable,
)
from irregular_forecast.models.series import EntityDataset
from irregular_forecast.services.learner_service import make_regressor
from irregular_forecast.services.pipeline_service import PipelineService
from irregular_forecast.utils.exceptions import (
    ConfigurationError,
    IrregularForecastError,
    MetricError,
)
from irregular_forecast.utils.monitoring import create_span
from irregular_forecast.utils.parallel import map_ordered

# Relative tolerance under which two metric values count as a tie
TIE_TOLERANCE = 1e-12


def _paired(pred: Sequence[float], actual: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape:
        raise MetricError(
            f"Prediction and target lengths differ: {p.size} vs {a.size}",
            {"predictions": p.size, "targets": a.size},
        )
    if p.size == 0:
        raise MetricError("Metrics need at least one prediction")
    return p, a


def mae(pred: Sequence[float], actual: Sequence[float]) -> float:
    """Mean absolute error."""
    p, a = _paired(pred, actual)
    return float(np.mean(np.abs(p - a)))


def r2(pred: Sequence[float], actual: Sequence[float]) -> Optional[float]:
    """Coefficient of determination; None when the target is constant."""
    p, a = _paired(pred, actual)
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        return None
    ss_res = float(np.sum((a - p) ** 2))
    return 1.0 - ss_res / ss_tot


def config_fingerprint(cfg: PipelineConfig, grid: Optional[SweepGrid] = None) -> str:
    """SHA-256 over the canonical JSON of the pipeline config and grid."""
    payload: Dict[str, Any] = {"pipeline": cfg.model_dump(mode="json")}
    payload["pipeline"]["features"]["enabled"] = sorted(payload["pipeline"]["features"]["enabled"])
    if grid is not None:
        payload["grid"] = grid.model_dump(mode="json")
    encoded = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(encoded).hexdigest()


def dataset_fingerprint(dataset: EntityDataset) -> str:
    """SHA-256 over entity ids, timestamps, values and aux columns."""
    digest = hashlib.sha256()
    for entity_id in dataset.entity_ids:
        series = dataset.entities[entity_id]
        digest.update(repr(entity_id).encode("utf-8"))
        digest.update(np.ascontiguousarray(series.timestamps).tobytes())
        digest.update(np.ascontiguousarray(series.values).tobytes())
        for name in dataset.aux_columns:
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(series.aux[name]).tobytes())
    return digest.hexdigest()


def _frequency_task(
    task: Tuple[EntityDataset, PipelineConfig, SweepGrid, Optional[ExternalFeatures]],
) -> List[SweepCell]:
    """Process-pool entry point for one sweep frequency."""
    dataset, cfg, grid, external = task
    return SweepRunner().run_frequency(dataset, cfg, grid, external)


class SweepRunner:
    """Runs the pipeline across a grid of frequencies, learners and variants."""

    def __init__(self) -> None:
        self.logger = structlog.get_logger(__name__)
        self.pipeline = PipelineService()

    def run_sweep(
        self,
        dataset: EntityDataset,
        grid: SweepGrid,
        cfg: PipelineConfig,
        external: Optional[ExternalFeatures] = None,
        jobs: Optional[int] = 1,
    ) -> SweepReport:
        """Evaluate every grid cell; failed cells are recorded, never raised."""
        if not grid.frequencies:
            raise ConfigurationError("The sweep grid has no frequencies", config_key="frequencies")
        if cfg.lag_schedule is not None and not cfg.lag_schedule.covers_all(grid.frequencies):
            raise ConfigurationError(
                "The lag schedule does not cover every sweep frequency", config_key="lag_schedule"
            )
        if Variant.MERGED in grid.variants and external is None:
            raise ConfigurationError(
                "The merged variant needs an external feature bundle",
                config_key="external_features",
            )

        self.logger.info(
            "Sweep started",
            frequencies=len(grid.frequencies),
            learners=[kind.value for kind in grid.learners],
            variants=[variant.value for variant in grid.variants],
            cells=grid.size,
        )
        featurized = Variant.BASELINE if grid.variants == [Variant.BASELINE] else Variant.AUTOFITS
        tasks = [
            (dataset, cfg.at_frequency(f).model_copy(update={"variant": featurized}), grid, external)
            for f in grid.frequencies
        ]
        with create_span("evaluation.run_sweep", tags={"cells": grid.size}):
            per_frequency = map_ordered(_frequency_task, tasks, jobs=jobs)

        cells = [cell for group in per_frequency for cell in group]
        report = SweepReport(
            cells=cells,
            seed=cfg.learner.seed,
            config_fingerprint=config_fingerprint(cfg, grid),
            dataset_fingerprint=dataset_fingerprint(dataset),
        )
        self.logger.info(
            "Sweep finished",
            cells=len(report.cells),
            failed=sum(not cell.ok for cell in report.cells),
        )
        return report

    def run_frequency(
        self,
        dataset: EntityDataset,
        cfg: PipelineConfig,
        grid: SweepGrid,
        external: Optional[ExternalFeatures] = None,
    ) -> List[SweepCell]:
        """All learner and variant cells of one frequency, sharing one feature pass."""
        frequency = cfg.resample.frequency
        lag = cfg.effective_lag
        combos = [(kind, variant) for kind in grid.learners for variant in grid.variants]

        try:
            merged = self.pipeline.run_dataset(dataset, cfg, jobs=1)
            split = self.pipeline.holdout_split(merged.rows, cfg.holdout_fraction)
        except IrregularForecastError as e:
            self.logger.warning("Frequency failed", frequency=frequency, reason=e.message)
            discarded = len(dataset.entities)
            return [
                SweepCell.failed(frequency, lag, kind, variant, e.message, discarded)
                for kind, variant in combos
            ]

        cells: List[SweepCell] = []
        for kind, variant in combos:
            try:
                cells.append(self._evaluate(split, cfg, kind, variant, external, merged))
            except (IrregularForecastError, ValueError, np.linalg.LinAlgError) as e:
                reason = e.message if isinstance(e, IrregularForecastError) else str(e)
                self.logger.warning(
                    "Sweep cell failed",
                    frequency=frequency,
                    learner=kind.value,
                    variant=variant.value,
                    reason=reason,
                )
                cells.append(
                    SweepCell.failed(frequency, lag, kind, variant, reason, len(merged.discarded))
                )
        return cells

    def _evaluate(
        self,
        split: SplitDataset,
        cfg: PipelineConfig,
        kind: LearnerKind,
        variant: Variant,
        external: Optional[ExternalFeatures],
        merged: MergedRows,
    ) -> SweepCell:
        frequency = cfg.resample.frequency
        train = self.pipeline.assemble_variant(split.train, variant, external, frequency)
        test = self.pipeline.assemble_variant(split.test, variant, external, frequency)
        if test.n_rows == 0:
            raise MetricError("No entity contributed a test row")

        learner = cfg.learner.model_copy(update={"kind": kind})
        predictions = make_regressor(learner).fit(train.X, train.y).predict(test.X)
        return SweepCell(
            frequency=frequency,
            lag=cfg.effective_lag,
            learner=kind,
            variant=variant,
            mae=mae(predictions, test.y),
            r2=r2(predictions, test.y),
            n_test=test.n_rows,
            entities_used=merged.entities_used,
            entities_discarded=len(merged.discarded),
        )


def _winners(values: Dict[Variant, float], lower_is_better: bool) -> List[Variant]:
    best = min(values.values()) if lower_is_better else max(values.values())
    return [
        variant
        for variant, value in values.items()
        if math.isclose(value, best, rel_tol=TIE_TOLERANCE, abs_tol=0.0)
    ]


def summarize_wins(report: SweepReport, positive_r2_only: bool = False) -> WinTable:
    """Count per learner how often each variant has the best MAE and R².

    ``t`` variants tied for best at one frequency each receive ``1/t`` of a
    win. Failed cells and missing R² values do not compete; with
    ``positive_r2_only`` non-positive R² values are ignored as well.
    """
    wins: Dict[Tuple[LearnerKind, Variant, Metric], float] = defaultdict(float)
    frequencies: Dict[LearnerKind, int] = defaultdict(int)
    variants: Dict[LearnerKind, List[Variant]] = defaultdict(list)
    winners: List[FrequencyWinner] = []

    by_frequency: Dict[Tuple[float, LearnerKind], List[SweepCell]] = defaultdict(list)
    for cell in report.cells:
        by_frequency[(cell.frequency, cell.learner)].append(cell)
        if cell.variant not in variants[cell.learner]:
            variants[cell.learner].append(cell.variant)

    for (frequency, learner), cells in sorted(
        by_frequency.items(), key=lambda item: (item[0][0], item[0][1].value)
    ):
        frequencies[learner] += 1
        ok = [cell for cell in cells if cell.ok]

        candidates = {
            Metric.MAE: {cell.variant: cell.mae for cell in ok if cell.mae is not None},
            Metric.R2: {
                cell.variant: cell.r2
                for cell in ok
                if cell.r2 is not None and (not positive_r2_only or cell.r2 > 0)
            },
        }
        for metric, values in candidates.items():
            if not values:
                continue
            best = _winners(values, lower_is_better=metric is Metric.MAE)  # type: ignore[arg-type]
            for variant in best:
                wins[(learner, variant, metric)] += 1.0 / len(best)
            winners.append(
                FrequencyWinner(frequency=frequency, learner=learner, metric=metric, winners=best)
            )

    records = [
        WinRecord(
            learner=learner,
            variant=variant,
            metric=metric,
            wins=wins[(learner, variant, metric)],
            frequencies=frequencies[learner],
        )
        for learner in sorted(variants, key=lambda kind: kind.value)
        for variant in sorted(variants[learner], key=lambda v: v.value)
        for metric in Metric
    ]
    return WinTable(records=records, winners=winners, positive_r2_only=positive_r2_only)
