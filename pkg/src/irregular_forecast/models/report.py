"""Sweep report and win table models."""

import math
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from irregular_forecast.models.learners import LearnerKind
from irregular_forecast.models.pipeline import Variant

STATUS_OK = "ok"


class Metric(str, Enum):
    """Metrics tracked per sweep cell."""

    MAE = "mae"
    R2 = "r2"


class SweepCell(BaseModel):
    """Metrics of one (frequency, learner, variant) combination."""

    frequency: float = Field(..., gt=0)
    lag: int = Field(..., ge=0)
    learner: LearnerKind
    variant: Variant
    mae: Optional[float] = Field(default=None, ge=0)
    r2: Optional[float] = Field(default=None, le=1)
    n_test: int = Field(default=0, ge=0)
    entities_used: int = Field(default=0, ge=0)
    entities_discarded: int = Field(default=0, ge=0)
    status: str = STATUS_OK

    @model_validator(mode="after")
    def validate_status(self) -> "SweepCell":
        """Successful cells must carry an MAE over at least one test row."""
        if self.ok and (self.mae is None or self.n_test < 1):
            raise ValueError("A successful cell needs an MAE and at least one test row")
        return self

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    @property
    def key(self) -> Tuple[float, str, str]:
        return (self.frequency, self.learner.value, self.variant.value)

    @classmethod
    def failed(
        cls,
        frequency: float,
        lag: int,
        learner: LearnerKind,
        variant: Variant,
        reason: str,
        entities_discarded: int = 0,
    ) -> "SweepCell":
        """Cell recording a failure instead of metrics."""
        return cls(
            frequency=frequency,
            lag=lag,
            learner=learner,
            variant=variant,
            entities_discarded=entities_discarded,
            status=f"failed: {reason}",
        )


class SweepReport(BaseModel):
    """All cells of a frequency sweep with run fingerprints."""

    cells: List[SweepCell]
    seed: int
    config_fingerprint: str
    dataset_fingerprint: str

    @model_validator(mode="after")
    def validate_unique_cells(self) -> "SweepReport":
        """One cell per (frequency, learner, variant), sorted by that key."""
        keys = [cell.key for cell in self.cells]
        if len(set(keys)) != len(keys):
            raise ValueError("Duplicate sweep cells")
        self.cells = sorted(self.cells, key=lambda cell: cell.key)
        return self

    @property
    def frequencies(self) -> List[float]:
        return sorted({cell.frequency for cell in self.cells})

    @property
    def all_failed(self) -> bool:
        return bool(self.cells) and not any(cell.ok for cell in self.cells)


class WinRecord(BaseModel):
    """Aggregate wins of one variant for one learner and metric."""

    learner: LearnerKind
    variant: Variant
    metric: Metric
    wins: float = Field(..., ge=0)
    frequencies: int = Field(..., ge=0)

    @property
    def win_rate(self) -> float:
        return self.wins / self.frequencies if self.frequencies else 0.0


class FrequencyWinner(BaseModel):
    """Best variants at one frequency for one learner and metric."""

    frequency: float
    learner: LearnerKind
    metric: Metric
    winners: List[Variant]


class WinTable(BaseModel):
    """Win counts with the tie rule applied (t tied variants share 1/t each)."""

    records: List[WinRecord]
    winners: List[FrequencyWinner] = Field(default_factory=list)
    positive_r2_only: bool = False

    def record(self, learner: LearnerKind, variant: Variant, metric: Metric) -> WinRecord:
        for entry in self.records:
            if entry.learner == learner and entry.variant == variant and entry.metric == metric:
                return entry
        raise KeyError((learner, variant, metric))


class SweepGrid(BaseModel):
    """Frequencies, learners and variants crossed by a sweep."""

    frequencies: List[float] = Field(..., min_length=1)
    learners: List[LearnerKind] = Field(default_factory=lambda: [LearnerKind.LASSO])
    variants: List[Variant] = Field(
        default_factory=lambda: [Variant.BASELINE, Variant.AUTOFITS]
    )

    @model_validator(mode="after")
    def validate_grid(self) -> "SweepGrid":
        """Require positive finite frequencies; drop duplicate entries."""
        for frequency in self.frequencies:
            if not (math.isfinite(frequency) and frequency > 0):
                raise ValueError(f"Sweep frequencies must be finite and positive, got {frequency}")
        self.frequencies = sorted(set(self.frequencies))
        self.learners = list(dict.fromkeys(self.learners))
        self.variants = list(dict.fromkeys(self.variants))
        if not self.learners or not self.variants:
            raise ValueError("A sweep needs at least one learner and one variant")
        return self

    @property
    def size(self) -> int:
        return len(self.frequencies) * len(self.learners) * len(self.variants)


class SweepMetadata(BaseModel):
    """Run-specific values kept out of the report body."""

    seed: int
    config_fingerprint: str
    dataset_fingerprint: str
    grid: SweepGrid
    cells: int
    failed_cells: int
