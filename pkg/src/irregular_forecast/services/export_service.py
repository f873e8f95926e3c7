"""CSV and JSON surfaces: feature matrices, reports, forecasts and external bundles."""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from irregular_forecast.models.features import FeatureRow, lag_columns
from irregular_forecast.models.pipeline import ExternalFeatures, Forecast
from irregular_forecast.models.report import SweepGrid, SweepMetadata, SweepReport, WinTable
from irregular_forecast.models.series import TimestampFormat, ValidationReport
from irregular_forecast.utils.exceptions import DataError, SchemaError
from irregular_forecast.utils.io import atomic_write

REPORT_COLUMNS = (
    "frequency",
    "lag",
    "learner",
    "variant",
    "mae",
    "r2",
    "n_test",
    "entities_used",
    "entities_discarded",
    "status",
)
WIN_COLUMNS = ("learner", "variant", "metric", "wins", "frequencies", "win_rate")
WINNER_COLUMNS = ("frequency", "learner", "metric", "winners")
WINNER_SEPARATOR = ";"
FORECAST_COLUMNS = ("entity_id", "target_time", "prediction")
VALIDATION_COLUMNS = (
    "entity_id",
    "count",
    "duplicates",
    "min_timestamp",
    "max_timestamp",
    "monotonic",
)
EXTERNAL_KEY_COLUMNS = ("entity_id", "target_time")
EXTERNAL_FREQUENCY_COLUMN = "frequency"

logger = structlog.get_logger(__name__)


def _entity_label(entity_id: Optional[str]) -> str:
    return "" if entity_id is None else entity_id


def _write_frame(frame: pd.DataFrame, path: Path | str) -> Path:
    target = Path(path)
    with atomic_write(target) as handle:
        frame.to_csv(handle, index=False, lineterminator="\n")
    return target


def metadata_path(report_path: Path | str) -> Path:
    """Sidecar path ``<report>.meta.json`` next to a report CSV."""
    report_path = Path(report_path)
    return report_path.with_name(report_path.name + ".meta.json")


def feature_matrix_frame(
    rows: Sequence[FeatureRow], feature_names: Optional[Sequence[str]] = None
) -> pd.DataFrame:
    """Tabular feature matrix with key, lag, feature and target columns.

    ``feature_names`` selects and orders feature columns; by default every
    feature of the first row is written.
    """
    lag_count = rows[0].lags.size if rows else 0
    names = list(feature_names) if feature_names is not None else (
        list(rows[0].features) if rows else []
    )
    columns = [
        "entity_id",
        "window_start",
        "window_end",
        "target_time",
        *lag_columns(lag_count),
        *names,
        "target",
    ]
    records = [
        [
            _entity_label(row.entity_id),
            row.window_start,
            row.window_end,
            row.target_time,
            *row.lags.tolist(),
            *(row.features[name] for name in names),
            row.target,
        ]
        for row in rows
    ]
    return pd.DataFrame(records, columns=columns)


def write_feature_matrix(
    rows: Sequence[FeatureRow], path: Path | str, feature_names: Optional[Sequence[str]] = None
) -> Path:
    target = _write_frame(feature_matrix_frame(rows, feature_names), path)
    logger.info("Feature matrix written", path=str(target), rows=len(rows))
    return target


def report_frame(report: SweepReport) -> pd.DataFrame:
    records = [
        [
            cell.frequency,
            cell.lag,
            cell.learner.value,
            cell.variant.value,
            cell.mae,
            cell.r2,
            cell.n_test,
            cell.entities_used,
            cell.entities_discarded,
            cell.status,
        ]
        for cell in report.cells
    ]
    return pd.DataFrame(records, columns=list(REPORT_COLUMNS))


def write_report(report: SweepReport, path: Path | str, grid: SweepGrid) -> Tuple[Path, Path]:
    """Write the sweep report CSV and its metadata sidecar.

    The CSV body holds only grid coordinates and metrics, so reruns with the
    same seed produce identical bytes.
    """
    target = _write_frame(report_frame(report), path)
    metadata = SweepMetadata(
        seed=report.seed,
        config_fingerprint=report.config_fingerprint,
        dataset_fingerprint=report.dataset_fingerprint,
        grid=grid,
        cells=len(report.cells),
        failed_cells=sum(not cell.ok for cell in report.cells),
    )
    sidecar = metadata_path(target)
    with atomic_write(sidecar) as handle:
        handle.write(metadata.model_dump_json(indent=2))
        handle.write("\n")
    logger.info("Sweep report written", path=str(target), cells=len(report.cells))
    return target, sidecar


def winners_path(wins_path: Path | str) -> Path:
    """Sidecar path ``<wins stem>.winners.csv`` next to a win table."""
    wins_path = Path(wins_path)
    return wins_path.with_name(f"{wins_path.stem}.winners.csv")


def winners_frame(table: WinTable) -> pd.DataFrame:
    """One row per (frequency, learner, metric) with the best variants joined by ``;``."""
    records = [
        [
            entry.frequency,
            entry.learner.value,
            entry.metric.value,
            WINNER_SEPARATOR.join(variant.value for variant in entry.winners),
        ]
        for entry in table.winners
    ]
    return pd.DataFrame(records, columns=list(WINNER_COLUMNS))


def write_wins(table: WinTable, path: Path | str) -> Tuple[Path, Path]:
    """Write the win table and the per-frequency winners sidecar."""
    records = [
        [
            record.learner.value,
            record.variant.value,
            record.metric.value,
            record.wins,
            record.frequencies,
            record.win_rate,
        ]
        for record in table.records
    ]
    target = _write_frame(pd.DataFrame(records, columns=list(WIN_COLUMNS)), path)
    sidecar = _write_frame(winners_frame(table), winners_path(target))
    logger.info("Win table written", path=str(target), winners=len(table.winners))
    return target, sidecar


def format_timestamp(value: float, fmt: TimestampFormat) -> str | float:
    """Render a domain timestamp the way the input column was written."""
    if fmt is TimestampFormat.ISO8601:
        return pd.Timestamp(value, unit="s", tz="UTC").isoformat()
    return value


def write_forecasts(
    forecasts: Sequence[Forecast],
    path: Path | str,
    timestamp_format: TimestampFormat = TimestampFormat.NUMERIC,
) -> Path:
    records = [
        [
            _entity_label(forecast.entity_id),
            format_timestamp(forecast.target_time, timestamp_format),
            forecast.prediction,
        ]
        for forecast in forecasts
    ]
    target = _write_frame(pd.DataFrame(records, columns=list(FORECAST_COLUMNS)), path)
    logger.info("Forecasts written", path=str(target), forecasts=len(forecasts))
    return target


def validation_frame(reports: Sequence[ValidationReport]) -> pd.DataFrame:
    records = [
        [
            _entity_label(report.entity_id),
            report.count,
            report.duplicates,
            report.min_timestamp,
            report.max_timestamp,
            report.monotonic,
        ]
        for report in reports
    ]
    return pd.DataFrame(records, columns=list(VALIDATION_COLUMNS))


def write_validation(reports: Sequence[ValidationReport], path: Path | str) -> Path:
    return _write_frame(validation_frame(reports), path)


def read_external_features(path: Path | str) -> ExternalFeatures:
    """Load an external feature bundle keyed by ``entity_id`` and ``target_time``.

    An empty ``entity_id`` denotes the anonymous entity. Target times and
    frequencies are in domain units (epoch seconds for calendar data) and must
    match the pipeline's values exactly.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"External feature file not found: {path}")
    try:
        frame = pd.read_csv(
            path,
            dtype={"entity_id": str},
            keep_default_na=False,
            na_values=[""],
            float_precision="round_trip",
        )
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DataError(f"Malformed external feature file {path}: {e}") from e

    for column in EXTERNAL_KEY_COLUMNS:
        if column not in frame.columns:
            raise SchemaError(column)

    has_frequency = EXTERNAL_FREQUENCY_COLUMN in frame.columns
    key_columns = set(EXTERNAL_KEY_COLUMNS) | ({EXTERNAL_FREQUENCY_COLUMN} if has_frequency else set())
    feature_names = [column for column in frame.columns if column not in key_columns]
    if not feature_names:
        raise DataError(f"External feature file {path} has no feature columns")

    numeric = frame[feature_names].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(numeric)
    if bad.any():
        row, column = (int(i) for i in np.argwhere(bad)[0])
        raise DataError(
            f"Non-numeric or missing external feature '{feature_names[column]}'",
            line_number=row + 2,
            column=feature_names[column],
        )

    entity_ids: List[Optional[str]] = [
        None if pd.isna(value) or str(value).strip() == "" else str(value).strip()
        for value in frame["entity_id"]
    ]
    target_times = pd.to_numeric(frame["target_time"], errors="coerce").to_numpy(dtype=np.float64)
    frequencies = (
        pd.to_numeric(frame[EXTERNAL_FREQUENCY_COLUMN], errors="coerce").to_numpy(dtype=np.float64)
        if has_frequency
        else np.full(len(frame), np.nan)
    )

    table: Dict[Tuple[Optional[str], float, Optional[float]], np.ndarray] = {}
    for i, (entity_id, target_time) in enumerate(zip(entity_ids, target_times)):
        if not np.isfinite(target_time) or (has_frequency and not np.isfinite(frequencies[i])):
            raise DataError("Unparseable bundle key", line_number=i + 2, column="target_time")
        key = (entity_id, float(target_time), float(frequencies[i]) if has_frequency else None)
        if key in table:
            raise DataError(f"Duplicate bundle key {key[:2]!r}", line_number=i + 2)
        table[key] = numeric[i]

    logger.info(
        "External features loaded",
        path=str(path),
        rows=len(table),
        columns=len(feature_names),
        per_frequency=has_frequency,
    )
    return ExternalFeatures(columns=tuple(feature_names), table=table, has_frequency=has_frequency)
