"""CSV ingestion, validation and input preprocessing."""

from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import structlog

from irregular_forecast.models.series import (
    ColumnSpec,
    EntityDataset,
    ImputeStrategy,
    IrregularSeries,
    TimestampFormat,
    ValidationReport,
)
from irregular_forecast.utils.exceptions import ConfigurationError, DataError, SchemaError
from irregular_forecast.utils.io import atomic_write
from irregular_forecast.utils.monitoring import create_span

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none"})
DATE_COMPONENTS = ("year", "month", "day", "weekday", "hour")
EPOCH = pd.Timestamp(0, tz="UTC")


class IngestionService:
    """Loads entity datasets from CSV and prepares them for the pipeline."""

    def __init__(self) -> None:
        self.logger = structlog.get_logger(__name__)

    def load_csv(self, path: Path | str, schema: ColumnSpec) -> EntityDataset:
        """Load a CSV into one sorted series per entity."""
        path = Path(path)
        with create_span("ingestion.load_csv", resource=str(path)):
            if not path.is_file():
                raise DataError(f"Input file not found: {path}")
            try:
                frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
            except pd.errors.EmptyDataError as e:
                raise DataError(f"Input file is empty: {path}") from e
            except pd.errors.ParserError as e:
                raise DataError(f"Malformed CSV {path}: {e}") from e

            frame.columns = [str(column).strip() for column in frame.columns]
            if frame.empty:
                raise DataError(f"Input file has no data rows: {path}")

            required = [schema.timestamp_column, schema.value_column, *schema.date_columns]
            if schema.entity_column:
                required.append(schema.entity_column)
            for column in required:
                if column not in frame.columns:
                    raise SchemaError(column)

            frame = frame.drop(columns=[c for c in schema.drop_columns if c in frame.columns])
            line_numbers = np.arange(len(frame)) + 2

            timestamps = self._parse_column(
                frame[schema.timestamp_column],
                schema.timestamp_column,
                schema.timestamp_format,
                line_numbers,
                allow_missing=False,
            )
            values = self._parse_column(
                frame[schema.value_column],
                schema.value_column,
                TimestampFormat.NUMERIC,
                line_numbers,
                allow_missing=True,
            )

            primary = {schema.timestamp_column, schema.value_column, schema.entity_column}
            aux_names = [c for c in frame.columns if c not in primary]
            aux: Dict[str, np.ndarray] = {}
            for column in aux_names:
                fmt = (
                    TimestampFormat.ISO8601
                    if column in schema.date_columns
                    else TimestampFormat.NUMERIC
                )
                aux[column] = self._parse_column(
                    frame[column], column, fmt, line_numbers, allow_missing=True
                )

            entity_ids: Optional[np.ndarray] = None
            if schema.entity_column:
                entity_ids = frame[schema.entity_column].str.strip().to_numpy()
                blank = np.flatnonzero(entity_ids == "")
                if blank.size:
                    raise DataError(
                        "Empty entity id",
                        line_number=int(line_numbers[blank[0]]),
                        column=schema.entity_column,
                    )

            entities = self._group_entities(entity_ids, timestamps, values, aux)

        self.logger.info(
            "Dataset loaded",
            path=str(path),
            rows=len(frame),
            entities=len(entities),
            aux_columns=aux_names,
        )
        return EntityDataset(entities=entities, schema=schema, aux_columns=tuple(aux_names))

    def _parse_column(
        self,
        raw: pd.Series,
        column: str,
        fmt: TimestampFormat,
        line_numbers: np.ndarray,
        allow_missing: bool,
    ) -> np.ndarray:
        """Parse one text column to float64, reporting the first bad line."""
        text = raw.astype(str).str.strip()
        missing = text.str.lower().isin(MISSING_TOKENS).to_numpy()

        if fmt is TimestampFormat.ISO8601:
            parsed = pd.to_datetime(text.where(~missing), utc=True, format="ISO8601", errors="coerce")
            numbers = ((parsed - EPOCH) / pd.Timedelta(seconds=1)).to_numpy(dtype=np.float64)
        else:
            numbers = pd.to_numeric(text.where(~missing), errors="coerce").to_numpy(
                dtype=np.float64, copy=True
            )
            converted = ~missing & ~np.isnan(numbers)
            # Correctly rounded decimal conversion so written floats read back unchanged
            numbers[converted] = np.asarray(text.to_numpy()[converted], dtype=np.float64)

        unparseable = ~missing & np.isnan(numbers)
        if unparseable.any():
            index = int(np.flatnonzero(unparseable)[0])
            raise DataError(
                f"Cannot parse {fmt.value} value {text.iloc[index]!r} in column '{column}'",
                line_number=int(line_numbers[index]),
                column=column,
            )
        if not allow_missing:
            invalid = missing | ~np.isfinite(numbers)
            if invalid.any():
                index = int(np.flatnonzero(invalid)[0])
                raise DataError(
                    f"Missing or non-finite value in column '{column}'",
                    line_number=int(line_numbers[index]),
                    column=column,
                )
        return numbers

    def _group_entities(
        self,
        entity_ids: Optional[np.ndarray],
        timestamps: np.ndarray,
        values: np.ndarray,
        aux: Dict[str, np.ndarray],
    ) -> Dict[Optional[str], IrregularSeries]:
        """Split rows per entity and sort each entity by timestamp (stable).

        Without an entity column every row belongs to the anonymous entity ``None``.
        """
        groups: Dict[Optional[str], np.ndarray]
        if entity_ids is None:
            groups = {None: np.arange(timestamps.size)}
        else:
            keys = pd.Series(entity_ids, dtype=str)
            groups = {
                str(key): np.asarray(positions)
                for key, positions in keys.groupby(keys, sort=True).indices.items()
            }

        entities: Dict[Optional[str], IrregularSeries] = {}
        for entity_id, positions in groups.items():
            rows = positions[np.argsort(timestamps[positions], kind="mergesort")]
            entities[entity_id] = IrregularSeries(
                entity_id=entity_id,
                timestamps=timestamps[rows],
                values=values[rows],
                aux={name: column[rows] for name, column in aux.items()},
            )
        return entities

    def split_date_components(self, dataset: EntityDataset, columns: Sequence[str]) -> EntityDataset:
        """Replace epoch-second aux columns with year, month, day, weekday and hour."""
        if not columns:
            return dataset

        for column in columns:
            if column == dataset.schema.timestamp_column:
                raise ConfigurationError(
                    f"The primary timestamp column '{column}' cannot be split",
                    config_key="split_date_columns",
                )
            if column not in dataset.aux_columns:
                raise ConfigurationError(
                    f"Cannot split unknown aux column '{column}'", config_key="split_date_columns"
                )

        targets = set(columns)
        new_aux_columns: List[str] = []
        for name in dataset.aux_columns:
            if name in targets:
                new_aux_columns.extend(f"{name}_{part}" for part in DATE_COMPONENTS)
            else:
                new_aux_columns.append(name)

        entities: Dict[Optional[str], IrregularSeries] = {}
        for entity_id, series in dataset.entities.items():
            aux: Dict[str, np.ndarray] = {}
            for name in dataset.aux_columns:
                if name not in targets:
                    aux[name] = series.aux[name]
                    continue
                stamps = pd.DatetimeIndex(pd.to_datetime(series.aux[name], unit="s", utc=True))
                parts = {
                    "year": stamps.year,
                    "month": stamps.month,
                    "day": stamps.day,
                    "weekday": stamps.weekday,
                    "hour": stamps.hour,
                }
                for part in DATE_COMPONENTS:
                    aux[f"{name}_{part}"] = np.asarray(parts[part], dtype=np.float64)
            entities[entity_id] = IrregularSeries(
                entity_id=entity_id,
                timestamps=series.timestamps,
                values=series.values,
                aux=aux,
            )

        self.logger.info("Date columns split", columns=list(columns))
        return EntityDataset(
            entities=entities,
            schema=dataset.schema,
            aux_columns=tuple(new_aux_columns),
            removed_entities=dataset.removed_entities,
        )

    def impute_input_missing(self, dataset: EntityDataset, strategy: ImputeStrategy) -> EntityDataset:
        """Remove non-finite values and aux readings according to ``strategy``."""
        entities: Dict[Optional[str], IrregularSeries] = {}
        removed = list(dataset.removed_entities)

        for entity_id in dataset.entity_ids:
            series = dataset.entities[entity_id]
            if series.is_finite():
                entities[entity_id] = series
                continue

            if strategy is ImputeStrategy.DROP_ROW:
                keep = np.isfinite(series.values)
                for column in series.aux.values():
                    keep &= np.isfinite(column)
                if not keep.any():
                    self.logger.warning(
                        "Entity removed after dropping missing rows", entity_id=entity_id
                    )
                    removed.append(entity_id)
                    continue
                entities[entity_id] = IrregularSeries(
                    entity_id=entity_id,
                    timestamps=series.timestamps[keep],
                    values=series.values[keep],
                    aux={name: column[keep] for name, column in series.aux.items()},
                )
            else:
                entities[entity_id] = IrregularSeries(
                    entity_id=entity_id,
                    timestamps=series.timestamps,
                    values=self._fill(series.values, strategy, entity_id, "value"),
                    aux={
                        name: self._fill(column, strategy, entity_id, name)
                        for name, column in series.aux.items()
                    },
                )

        self.logger.info(
            "Input missing values imputed",
            strategy=strategy.value,
            entities=len(entities),
            removed=len(removed) - len(dataset.removed_entities),
        )
        return EntityDataset(
            entities=entities,
            schema=dataset.schema,
            aux_columns=dataset.aux_columns,
            removed_entities=tuple(removed),
        )

    def _fill(
        self, column: np.ndarray, strategy: ImputeStrategy, entity_id: Optional[str], name: str
    ) -> np.ndarray:
        finite = np.isfinite(column)
        if finite.all():
            return column
        fill = 0.0
        if strategy is ImputeStrategy.FILL_MEAN:
            if finite.any():
                fill = float(np.mean(column[finite]))
            else:
                # No observed entries to average
                self.logger.warning(
                    "Column has no finite values, filling zeros", entity_id=entity_id, column=name
                )
        return np.where(finite, column, fill)

    def validate(self, series: IrregularSeries) -> ValidationReport:
        """Summarize timestamp coverage and duplicates of one series."""
        timestamps = series.timestamps
        return ValidationReport(
            entity_id=series.entity_id,
            count=len(series),
            duplicates=int(timestamps.size - np.unique(timestamps).size),
            min_timestamp=float(timestamps[0]),
            max_timestamp=float(timestamps[-1]),
            monotonic=bool(np.all(np.diff(timestamps) >= 0)),
        )

    def write_dataset_csv(self, dataset: EntityDataset, path: Path | str) -> ColumnSpec:
        """Write the dataset back to CSV with numeric timestamps.

        Returns the column mapping that reads the file back into an equal dataset.
        """
        schema = dataset.schema
        frames = []
        for entity_id in dataset.entity_ids:
            series = dataset.entities[entity_id]
            data: Dict[str, object] = {}
            if schema.entity_column:
                data[schema.entity_column] = [entity_id] * len(series)
            data[schema.timestamp_column] = series.timestamps
            data[schema.value_column] = series.values
            for name in dataset.aux_columns:
                data[name] = series.aux[name]
            frames.append(pd.DataFrame(data))

        with atomic_write(path) as handle:
            pd.concat(frames, ignore_index=True).to_csv(handle, index=False)

        return ColumnSpec(
            timestamp_column=schema.timestamp_column,
            value_column=schema.value_column,
            entity_column=schema.entity_column,
            timestamp_format=TimestampFormat.NUMERIC,
        )
