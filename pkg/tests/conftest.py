"""Pytest configuration and fixtures."""

import configparser
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
import pytest
from faker import Faker

from irregular_forecast.config import settings
from irregular_forecast.models.pipeline import (
    Aggregator,
    Imputer,
    PipelineConfig,
    ResampleConfig,
)
from irregular_forecast.models.series import ColumnSpec, EntityDataset, IrregularSeries

fake = Faker()
Faker.seed(1234)

DAY = 86400.0
JAN_1_2024 = pd.Timestamp("2024-01-01", tz="UTC").timestamp()


@pytest.fixture(autouse=True)
def setup_test_environment(monkeypatch):
    """Keep tests single-process and free of tracing."""
    monkeypatch.setattr(settings, "tracing_enabled", False)
    monkeypatch.setattr(settings, "jobs", 1)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for randomized property checks."""
    return np.random.default_rng(20240101)


@pytest.fixture
def entity_ids() -> List[str]:
    """Distinct synthetic store identifiers."""
    return sorted({f"store_{fake.unique.bothify('??##')}" for _ in range(4)})


@pytest.fixture
def make_series() -> Callable[..., IrregularSeries]:
    """Factory for irregular series from plain sequences."""

    def _make(
        timestamps: Sequence[float],
        values: Sequence[float],
        entity_id: Optional[str] = None,
        aux: Optional[Dict[str, Sequence[float]]] = None,
    ) -> IrregularSeries:
        return IrregularSeries(
            entity_id=entity_id,
            timestamps=np.asarray(timestamps, dtype=float),
            values=np.asarray(values, dtype=float),
            aux={k: np.asarray(v, dtype=float) for k, v in (aux or {}).items()},
        )

    return _make


@pytest.fixture
def random_series(rng: np.random.Generator) -> Callable[..., IrregularSeries]:
    """Factory for random irregular series with gaps of varying size."""

    def _make(length: Optional[int] = None, entity_id: Optional[str] = None) -> IrregularSeries:
        n = int(length if length is not None else rng.integers(1, 201))
        gaps = rng.exponential(1.0, size=n) * rng.choice([0.0, 1.0, 5.0], size=n, p=[0.1, 0.7, 0.2])
        timestamps = np.cumsum(gaps) + rng.uniform(-100, 100)
        return IrregularSeries(
            entity_id=entity_id,
            timestamps=timestamps,
            values=rng.normal(10.0, 3.0, size=n),
        )

    return _make


@pytest.fixture
def numeric_schema() -> ColumnSpec:
    """Column mapping for files with numeric timestamps and an entity column."""
    return ColumnSpec(timestamp_column="t", value_column="y", entity_column="entity")


@pytest.fixture
def write_csv(tmp_path: Path) -> Callable[[str, pd.DataFrame], Path]:
    """Write a frame into the test directory and return its path."""

    def _write(name: str, frame: pd.DataFrame) -> Path:
        path = tmp_path / name
        frame.to_csv(path, index=False)
        return path

    return _write


@pytest.fixture
def daily_dataset(make_series) -> EntityDataset:
    """One anonymous entity observed on Jan 1-10, 2024, several times a day."""
    timestamps: List[float] = []
    values: List[float] = []
    for day in range(10):
        for hour in (9, 13, 18)[: 1 + day % 3]:
            timestamps.append(JAN_1_2024 + day * DAY + hour * 3600.0)
            values.append(float(10 + day + hour % 5))
    series = make_series(timestamps, values)
    schema = ColumnSpec(timestamp_column="ts", value_column="y")
    return EntityDataset(entities={None: series}, schema=schema)


@pytest.fixture
def multi_entity_dataset(make_series, entity_ids, rng) -> EntityDataset:
    """Several entities of different lengths on a daily clock."""
    entities = {}
    for i, entity_id in enumerate(entity_ids):
        n = 40 + 15 * i
        timestamps = np.sort(rng.uniform(0, n, size=2 * n)) * DAY + JAN_1_2024
        values = rng.poisson(5 + i, size=2 * n).astype(float)
        entities[entity_id] = make_series(timestamps, values, entity_id=entity_id)
    schema = ColumnSpec(timestamp_column="ts", value_column="y", entity_column="entity")
    return EntityDataset(entities=entities, schema=schema)


@pytest.fixture
def daily_config() -> PipelineConfig:
    """Daily sum/zero resampling with a lag of 3."""
    return PipelineConfig(
        resample=ResampleConfig(frequency=DAY, aggregator=Aggregator.SUM, imputer=Imputer.ZERO),
        lag=3,
    )


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    """Write an INI run config from a mapping of sections."""

    def _write(sections: Mapping[str, Mapping[str, Any]], name: str = "run.cfg") -> Path:
        parser = configparser.ConfigParser()
        for section, values in sections.items():
            parser[section] = {key: str(value) for key, value in values.items()}
        path = tmp_path / name
        with path.open("w", encoding="utf-8") as handle:
            parser.write(handle)
        return path

    return _write
