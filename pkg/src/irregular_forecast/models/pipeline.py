"""Pipeline configuration and intermediate result models."""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from irregular_forecast.models.features import FeatureConfig, FeatureRow
from irregular_forecast.models.learners import LearnerConfig


class Aggregator(str, Enum):
    """How observations sharing a bin are combined."""

    SUM = "sum"
    MEAN = "mean"


class Imputer(str, Enum):
    """How bins without observations are filled."""

    ZERO = "zero"
    FORWARD_FILL = "forward_fill"


class Variant(str, Enum):
    """Design-matrix variants compared by the sweep."""

    BASELINE = "baseline"
    AUTOFITS = "autofits"
    MERGED = "merged"


class ResampleConfig(BaseModel):
    """Temporal aggregation parameters."""

    frequency: float = Field(..., gt=0)
    aggregator: Aggregator = Aggregator.SUM
    imputer: Imputer = Imputer.ZERO

    @field_validator("frequency")
    @classmethod
    def validate_frequency(cls, v: float) -> float:
        """Reject infinite frequencies."""
        if not math.isfinite(v):
            raise ValueError("frequency must be finite")
        return v


class LagRule(BaseModel):
    """Lag size for frequencies in ``[lower, upper)``; open-ended when ``upper`` is None."""

    lower: float = Field(..., ge=0)
    upper: Optional[float] = None
    lag: int = Field(..., ge=1)

    @model_validator(mode="after")
    def validate_bounds(self) -> "LagRule":
        """Ensure the range is not empty."""
        if self.upper is not None and self.upper <= self.lower:
            raise ValueError(f"Empty lag range [{self.lower}, {self.upper})")
        return self

    def covers(self, frequency: float) -> bool:
        return self.lower <= frequency and (self.upper is None or frequency < self.upper)


class LagSchedule(BaseModel):
    """Frequency-dependent lag sizes with non-overlapping ranges."""

    rules: List[LagRule] = Field(..., min_length=1)

    @model_validator(mode="after")
    def validate_rules(self) -> "LagSchedule":
        """Sort rules and reject overlaps."""
        ordered = sorted(self.rules, key=lambda rule: rule.lower)
        for previous, current in zip(ordered, ordered[1:]):
            if previous.upper is None or previous.upper > current.lower:
                raise ValueError(
                    f"Lag ranges starting at {previous.lower} and {current.lower} overlap"
                )
        self.rules = ordered
        return self

    @classmethod
    def constant(cls, lag: int) -> "LagSchedule":
        return cls(rules=[LagRule(lower=0, upper=None, lag=lag)])

    def lag_for(self, frequency: float) -> int:
        """Lag size for ``frequency``; raises ``KeyError`` when no rule covers it."""
        for rule in self.rules:
            if rule.covers(frequency):
                return rule.lag
        raise KeyError(f"No lag rule covers frequency {frequency}")

    def covers_all(self, frequencies: List[float]) -> bool:
        return all(any(rule.covers(f) for rule in self.rules) for f in frequencies)


class PipelineConfig(BaseModel):
    """Everything one pipeline run needs."""

    resample: ResampleConfig
    lag: Optional[int] = Field(default=None, ge=1)
    lag_schedule: Optional[LagSchedule] = None
    features: FeatureConfig = Field(default_factory=FeatureConfig)
    variant: Variant = Variant.AUTOFITS
    learner: LearnerConfig = Field(default_factory=LearnerConfig)
    holdout_fraction: float = Field(default=0.10, gt=0, lt=1)

    @model_validator(mode="after")
    def validate_lag_source(self) -> "PipelineConfig":
        """Require exactly one of a fixed lag or a lag schedule."""
        if (self.lag is None) == (self.lag_schedule is None):
            raise ValueError("Configure exactly one of 'lag' or 'lag_schedule'")
        if self.lag_schedule is not None and not self.lag_schedule.covers_all(
            [self.resample.frequency]
        ):
            raise ValueError(f"Lag schedule does not cover frequency {self.resample.frequency}")
        return self

    @property
    def effective_lag(self) -> int:
        if self.lag is not None:
            return self.lag
        assert self.lag_schedule is not None
        return self.lag_schedule.lag_for(self.resample.frequency)

    def at_frequency(self, frequency: float) -> "PipelineConfig":
        """Copy of this config resampling at another frequency."""
        return self.model_copy(
            update={"resample": self.resample.model_copy(update={"frequency": frequency})}
        )


@dataclass(frozen=True, eq=False)
class EntityResult:
    """Feature rows of one entity, or the reason it was discarded."""

    entity_id: Optional[str]
    rows: Tuple[FeatureRow, ...] = ()
    bins: int = 0
    lag: int = 0
    discard_reason: Optional[str] = None

    @property
    def discarded(self) -> bool:
        return self.discard_reason is not None


@dataclass(frozen=True)
class DiscardRecord:
    """Why an entity contributed no rows."""

    entity_id: Optional[str]
    reason: str
    bins: int = 0
    lag: int = 0


@dataclass(frozen=True, eq=False)
class MergedRows:
    """Feature rows of all retained entities plus the discard report."""

    rows: Tuple[FeatureRow, ...]
    discarded: Tuple[DiscardRecord, ...] = ()

    @property
    def entities_used(self) -> int:
        return len({row.entity_id for row in self.rows})


@dataclass(frozen=True, eq=False)
class SplitDataset:
    """Temporal holdout split of merged feature rows."""

    train: Tuple[FeatureRow, ...]
    test: Tuple[FeatureRow, ...]
    boundaries: Dict[Optional[str], Tuple[int, int]] = field(default_factory=dict)


@dataclass(frozen=True)
class Forecast:
    """Next-bin prediction for one entity."""

    entity_id: Optional[str]
    target_time: float
    prediction: float


@dataclass(frozen=True, eq=False)
class ExternalFeatures:
    """Externally computed feature columns keyed by ``(entity_id, target_time)``.

    When the bundle carries a ``frequency`` column its rows are further keyed
    by frequency so one file can serve every sweep frequency.
    """

    columns: Tuple[str, ...]
    table: Dict[Tuple[Optional[str], float, Optional[float]], np.ndarray]
    has_frequency: bool = False

    def lookup(
        self, key: Tuple[Optional[str], float], frequency: Optional[float] = None
    ) -> Optional[np.ndarray]:
        entity_id, target_time = key
        return self.table.get((entity_id, target_time, frequency if self.has_frequency else None))

    def __len__(self) -> int:
        return len(self.table)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Learner input assembled from feature rows for one variant."""

    X: np.ndarray
    y: np.ndarray
    columns: Tuple[str, ...]
    keys: Tuple[Tuple[Optional[str], float], ...]

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])
