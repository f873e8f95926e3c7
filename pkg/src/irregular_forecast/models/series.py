"""Series containers: irregular input, entity datasets and resampled output."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator


def _frozen_array(values: Sequence[float] | np.ndarray, dtype: type = np.float64) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


class TimestampFormat(str, Enum):
    """How the timestamp column is parsed."""

    NUMERIC = "numeric"
    ISO8601 = "iso8601"


class ImputeStrategy(str, Enum):
    """How missing input values are handled before resampling."""

    DROP_ROW = "drop_row"
    FILL_ZERO = "fill_zero"
    FILL_MEAN = "fill_mean"


class ColumnSpec(BaseModel):
    """Column mapping for CSV ingestion."""

    timestamp_column: str = Field(..., min_length=1)
    value_column: str = Field(..., min_length=1)
    entity_column: Optional[str] = None
    timestamp_format: TimestampFormat = TimestampFormat.NUMERIC
    date_columns: List[str] = Field(default_factory=list)
    drop_columns: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_distinct_roles(self) -> "ColumnSpec":
        """Reject mappings that assign one column to two roles."""
        roles = [self.timestamp_column, self.value_column]
        if self.entity_column:
            roles.append(self.entity_column)
        if len(set(roles)) != len(roles):
            raise ValueError("timestamp, value and entity columns must be distinct")
        for column in self.date_columns + self.drop_columns:
            if column in roles:
                raise ValueError(f"Column '{column}' already has a primary role")
        return self


@dataclass(frozen=True)
class Observation:
    """A single (timestamp, value) pair with optional auxiliary readings."""

    timestamp: float
    value: float
    aux: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not math.isfinite(self.timestamp):
            raise ValueError(f"Observation timestamp must be finite, got {self.timestamp!r}")


@dataclass(frozen=True, eq=False)
class IrregularSeries:
    """Time-ordered observations of one entity.

    Values and aux columns may hold NaN between ingestion and
    ``impute_input_missing``; every later stage requires them finite.
    """

    entity_id: Optional[str]
    timestamps: np.ndarray
    values: np.ndarray
    aux: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        timestamps = _frozen_array(self.timestamps)
        values = _frozen_array(self.values)
        if timestamps.ndim != 1 or timestamps.shape != values.shape:
            raise ValueError("timestamps and values must be 1-D arrays of equal length")
        if timestamps.size < 1:
            raise ValueError("An irregular series needs at least one observation")
        if not np.all(np.isfinite(timestamps)):
            raise ValueError("Timestamps must be finite")
        if np.any(np.diff(timestamps) < 0):
            raise ValueError("Timestamps must be sorted in nondecreasing order")

        aux = {}
        for name, column in self.aux.items():
            column_array = _frozen_array(column)
            if column_array.shape != timestamps.shape:
                raise ValueError(f"Aux column '{name}' length does not match the series")
            aux[name] = column_array

        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "aux", aux)

    @classmethod
    def from_observations(
        cls, entity_id: Optional[str], observations: Sequence[Observation]
    ) -> "IrregularSeries":
        """Build a series from observations, sorting them by timestamp."""
        ordered = sorted(observations, key=lambda obs: obs.timestamp)
        aux_names = sorted({name for obs in ordered for name in obs.aux})
        return cls(
            entity_id=entity_id,
            timestamps=np.array([obs.timestamp for obs in ordered]),
            values=np.array([obs.value for obs in ordered]),
            aux={
                name: np.array([obs.aux.get(name, math.nan) for obs in ordered])
                for name in aux_names
            },
        )

    def __len__(self) -> int:
        return int(self.timestamps.size)

    @property
    def aux_columns(self) -> Tuple[str, ...]:
        return tuple(self.aux)

    def observation(self, index: int) -> Observation:
        """Materialize the observation at ``index``."""
        return Observation(
            timestamp=float(self.timestamps[index]),
            value=float(self.values[index]),
            aux={name: float(column[index]) for name, column in self.aux.items()},
        )

    def is_finite(self) -> bool:
        """Whether values and aux columns hold no missing entries."""
        if not np.all(np.isfinite(self.values)):
            return False
        return all(bool(np.all(np.isfinite(column))) for column in self.aux.values())


@dataclass(frozen=True, eq=False)
class EntityDataset:
    """All entity series of one input file, sharing one aux schema."""

    entities: Dict[Optional[str], IrregularSeries]
    schema: ColumnSpec
    aux_columns: Tuple[str, ...] = ()
    removed_entities: Tuple[Optional[str], ...] = ()

    def __post_init__(self) -> None:
        for entity_id, series in self.entities.items():
            if series.entity_id != entity_id:
                raise ValueError(f"Series keyed as {entity_id!r} carries id {series.entity_id!r}")
            if series.aux_columns != self.aux_columns:
                raise ValueError(
                    f"Entity {entity_id!r} aux columns {series.aux_columns} "
                    f"differ from dataset schema {self.aux_columns}"
                )

    def __len__(self) -> int:
        return len(self.entities)

    @property
    def entity_ids(self) -> List[Optional[str]]:
        """Entity ids in deterministic order (anonymous entity first)."""
        return sorted(self.entities, key=entity_sort_key)

    @property
    def observation_count(self) -> int:
        return sum(len(series) for series in self.entities.values())


def entity_sort_key(entity_id: Optional[str]) -> Tuple[int, str]:
    """Sort key placing the anonymous entity before named ones."""
    return (0, "") if entity_id is None else (1, entity_id)


class ValidationReport(BaseModel):
    """Summary statistics of one series' timestamp column."""

    entity_id: Optional[str] = None
    count: int = Field(..., ge=1)
    duplicates: int = Field(..., ge=0)
    min_timestamp: float
    max_timestamp: float
    monotonic: bool

    @model_validator(mode="after")
    def validate_range(self) -> "ValidationReport":
        """Ensure the reported range is ordered."""
        if self.max_timestamp < self.min_timestamp:
            raise ValueError("max_timestamp must not precede min_timestamp")
        return self


@dataclass(frozen=True, eq=False)
class RegularSeries:
    """Fixed-width bins produced by resampling an irregular series.

    Bin ``i`` (0-based) covers ``[origin + i*f, origin + (i+1)*f)``.
    ``bin_members[i]`` holds indices into the source series.
    """

    origin: float
    frequency: float
    values: np.ndarray
    imputed: np.ndarray
    bin_members: Tuple[np.ndarray, ...]
    entity_id: Optional[str] = None

    def __post_init__(self) -> None:
        values = _frozen_array(self.values)
        imputed = _frozen_array(self.imputed, dtype=bool)
        members = tuple(_frozen_array(m, dtype=np.int64) for m in self.bin_members)
        if not (values.size == imputed.size == len(members) >= 1):
            raise ValueError("values, imputed and bin_members must share a length >= 1")
        if not math.isfinite(self.frequency) or self.frequency <= 0:
            raise ValueError("frequency must be finite and strictly positive")
        for flag, member in zip(imputed, members):
            if bool(flag) != (member.size == 0):
                raise ValueError("A bin is imputed exactly when it has no members")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "imputed", imputed)
        object.__setattr__(self, "bin_members", members)

    @property
    def k(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.k

    def bin_start(self, index: int) -> float:
        """Start time of the 0-based bin ``index``; valid past the last bin too."""
        return self.origin + index * self.frequency

    @property
    def bin_timestamps(self) -> np.ndarray:
        return self.origin + np.arange(self.k, dtype=np.float64) * self.frequency
