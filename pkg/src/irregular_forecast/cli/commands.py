"""Command implementations behind the ``irregular-forecast`` entry point.

Each command receives a validated ``RunConfig``; every output path is
checked before the dataset is read.
"""

import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, TextIO

from irregular_forecast.models.features import FeatureRow
from irregular_forecast.models.pipeline import ExternalFeatures, Variant
from irregular_forecast.models.run_config import RunConfig
from irregular_forecast.models.series import EntityDataset
from irregular_forecast.services.evaluation_service import SweepRunner, summarize_wins
from irregular_forecast.services.export_service import (
    read_external_features,
    validation_frame,
    write_feature_matrix,
    write_forecasts,
    write_report,
    write_validation,
    write_wins,
)
from irregular_forecast.services.ingestion_service import IngestionService
from irregular_forecast.services.pipeline_service import PipelineService
from irregular_forecast.utils.exceptions import AllCellsFailedError, ConfigurationError, DataError


@dataclass(frozen=True)
class CommandResult:
    """Summary of one finished command."""

    outputs: List[Path]
    rows: int = 0
    entities: int = 0
    discarded: int = 0
    failed: int = 0


def _output_path(override: Optional[Path], configured: Optional[Path], key: str) -> Path:
    path = override or configured
    if path is None:
        raise ConfigurationError(
            f"No output path: pass --output or set [output] {key}", config_key=key
        )
    return Path(path)


def load_dataset(config: RunConfig, impute: bool = True) -> EntityDataset:
    """Load the configured CSV, split date columns and impute missing input."""
    ingestion = IngestionService()
    dataset = ingestion.load_csv(config.dataset.path, config.dataset.columns)
    dataset = ingestion.split_date_components(dataset, config.dataset.split_date_columns)
    if impute:
        dataset = ingestion.impute_input_missing(dataset, config.dataset.missing)
    if not dataset.entities:
        raise DataError(f"No usable observations in {config.dataset.path}")
    return dataset


def _load_external(config: RunConfig, required: bool) -> Optional[ExternalFeatures]:
    if config.external_features is None:
        if required:
            raise ConfigurationError(
                "The merged variant needs --external-features or [dataset] external_features",
                config_key="external_features",
            )
        return None
    return read_external_features(config.external_features)


def _attach_external(
    rows: List[FeatureRow], external: ExternalFeatures, frequency: float
) -> List[FeatureRow]:
    """Append bundle columns to each row's features; raises on uncovered rows."""
    if not rows:
        return rows
    design = PipelineService().assemble_variant(rows, Variant.MERGED, external, frequency)
    block = design.X[:, design.X.shape[1] - len(external.columns) :]
    return [
        replace(row, features={**row.features, **dict(zip(external.columns, block[i].tolist()))})
        for i, row in enumerate(rows)
    ]


def cmd_extract(
    config: RunConfig,
    output: Optional[Path] = None,
    jobs: Optional[int] = None,
    stdout: Optional[TextIO] = None,
) -> CommandResult:
    """Write the feature matrix of every retained entity at the configured frequency."""
    stdout = stdout or sys.stdout
    target = _output_path(output, config.output.features, "features")
    cfg = config.pipeline
    external = _load_external(config, required=cfg.variant is Variant.MERGED)
    dataset = load_dataset(config)

    merged = PipelineService().run_dataset(dataset, cfg, jobs=jobs)
    rows = list(merged.rows)
    if cfg.variant is Variant.MERGED and external is not None:
        rows = _attach_external(rows, external, cfg.resample.frequency)

    write_feature_matrix(rows, target)
    result = CommandResult(
        outputs=[target],
        rows=len(rows),
        entities=merged.entities_used,
        discarded=len(merged.discarded),
    )
    print(
        f"rows={result.rows} entities={result.entities} discarded={result.discarded} "
        f"lag={cfg.effective_lag} output={target}",
        file=stdout,
    )
    return result


def cmd_forecast(
    config: RunConfig,
    output: Optional[Path] = None,
    jobs: Optional[int] = None,
    stdout: Optional[TextIO] = None,
) -> CommandResult:
    """Forecast the next bin of every retained entity with one global model."""
    stdout = stdout or sys.stdout
    target = _output_path(output, config.output.forecast, "forecast")
    cfg = config.pipeline
    external = _load_external(config, required=cfg.variant is Variant.MERGED)
    dataset = load_dataset(config)

    forecasts = PipelineService().forecast_dataset(dataset, cfg, external=external, jobs=jobs)
    write_forecasts(forecasts, target, config.dataset.columns.timestamp_format)
    result = CommandResult(
        outputs=[target],
        rows=len(forecasts),
        entities=len(forecasts),
        discarded=len(dataset.entities) - len(forecasts),
    )
    print(
        f"forecasts={result.rows} discarded={result.discarded} output={target}", file=stdout
    )
    return result


def cmd_sweep(
    config: RunConfig,
    output: Optional[Path] = None,
    jobs: Optional[int] = None,
    stdout: Optional[TextIO] = None,
) -> CommandResult:
    """Run the frequency sweep and write the report, its metadata and the win table."""
    stdout = stdout or sys.stdout
    if config.sweep is None:
        raise ConfigurationError("[sweep] frequencies are required for a sweep", config_key="frequencies")
    report_path = _output_path(output, config.output.report, "report")
    wins_path = None if output is not None else config.output.wins_path
    wins_path = wins_path or report_path.with_name(f"{report_path.stem}.wins.csv")
    external = _load_external(config, required=Variant.MERGED in config.sweep.variants)
    dataset = load_dataset(config)

    report = SweepRunner().run_sweep(
        dataset, config.sweep, config.pipeline, external=external, jobs=jobs
    )
    _, meta_path = write_report(report, report_path, config.sweep)
    _, winners_path = write_wins(
        summarize_wins(report, positive_r2_only=config.positive_r2_only), wins_path
    )

    failed = sum(not cell.ok for cell in report.cells)
    print(
        f"cells={len(report.cells)} failed={failed} report={report_path} wins={wins_path}",
        file=stdout,
    )
    if report.all_failed:
        raise AllCellsFailedError(len(report.cells), {"report": str(report_path)})
    return CommandResult(
        outputs=[report_path, meta_path, wins_path, winners_path], rows=len(report.cells), failed=failed
    )


def cmd_validate(
    config: RunConfig,
    output: Optional[Path] = None,
    jobs: Optional[int] = None,
    stdout: Optional[TextIO] = None,
) -> CommandResult:
    """Per-entity timestamp summary of the raw input (before imputation)."""
    stdout = stdout or sys.stdout
    target = output or config.output.validation
    dataset = load_dataset(config, impute=False)
    ingestion = IngestionService()
    reports = [ingestion.validate(dataset.entities[e]) for e in dataset.entity_ids]

    if target is None:
        validation_frame(reports).to_csv(stdout, index=False, lineterminator="\n")
        return CommandResult(outputs=[], rows=len(reports), entities=len(reports))

    write_validation(reports, target)
    duplicates = sum(report.duplicates for report in reports)
    print(f"entities={len(reports)} duplicates={duplicates} output={target}", file=stdout)
    return CommandResult(outputs=[Path(target)], rows=len(reports), entities=len(reports))
