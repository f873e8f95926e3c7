"""INI run configuration: parsing, unit conversion and validation."""

import configparser
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from irregular_forecast.config import settings
from irregular_forecast.models.features import FeatureConfig, FeatureName
from irregular_forecast.models.learners import LearnerConfig, LearnerKind
from irregular_forecast.models.pipeline import (
    Aggregator,
    Imputer,
    LagRule,
    LagSchedule,
    PipelineConfig,
    ResampleConfig,
    Variant,
)
from irregular_forecast.models.report import SweepGrid
from irregular_forecast.models.series import ColumnSpec, ImputeStrategy, TimestampFormat
from irregular_forecast.utils.exceptions import ConfigurationError

SECTIONS = ("dataset", "resample", "embedding", "features", "model", "evaluation", "sweep", "output")


class TimeUnit(str, Enum):
    """Unit in which frequencies and lag-schedule bounds are written."""

    RAW = "raw"
    SECOND = "second"
    MINUTE = "minute"
    HOUR = "hour"
    DAY = "day"

    @property
    def seconds(self) -> float:
        return {
            TimeUnit.RAW: 1.0,
            TimeUnit.SECOND: 1.0,
            TimeUnit.MINUTE: 60.0,
            TimeUnit.HOUR: 3600.0,
            TimeUnit.DAY: 86400.0,
        }[self]


class DatasetConfig(BaseModel):
    """Input file, column mapping and input preprocessing."""

    path: Path
    columns: ColumnSpec
    missing: ImputeStrategy = ImputeStrategy.DROP_ROW
    split_date_columns: List[str] = Field(default_factory=list)
    time_unit: TimeUnit = TimeUnit.RAW


class OutputConfig(BaseModel):
    """Where each command writes; unset paths fall back to ``--output`` or stdout."""

    features: Optional[Path] = None
    forecast: Optional[Path] = None
    report: Optional[Path] = None
    wins: Optional[Path] = None
    validation: Optional[Path] = None

    @property
    def wins_path(self) -> Optional[Path]:
        """Configured wins path, else ``<report stem>.wins.csv`` beside the report."""
        if self.wins is not None:
            return self.wins
        if self.report is None:
            return None
        return self.report.with_name(f"{self.report.stem}.wins.csv")


class RunConfig(BaseModel):
    """Everything one CLI run needs, validated before any data is read."""

    dataset: DatasetConfig
    pipeline: PipelineConfig
    sweep: Optional[SweepGrid] = None
    positive_r2_only: bool = False
    external_features: Optional[Path] = None
    output: OutputConfig = Field(default_factory=OutputConfig)
    source: Optional[Path] = None

    @model_validator(mode="after")
    def validate_sweep_coverage(self) -> "RunConfig":
        """The lag schedule must cover every sweep frequency."""
        schedule = self.pipeline.lag_schedule
        if self.sweep is not None and schedule is not None:
            uncovered = [f for f in self.sweep.frequencies if not schedule.covers_all([f])]
            if uncovered:
                raise ValueError(f"Lag schedule does not cover sweep frequencies {uncovered}")
        return self

    @property
    def seed(self) -> int:
        return self.pipeline.learner.seed

    def with_overrides(
        self,
        seed: Optional[int] = None,
        variant: Optional[Variant] = None,
        external_features: Optional[Path] = None,
    ) -> "RunConfig":
        """Copy with command-line overrides applied and re-validated."""
        data = self.model_dump()
        if seed is not None:
            data["pipeline"]["learner"]["seed"] = seed
        if variant is not None:
            data["pipeline"]["variant"] = variant
        if external_features is not None:
            data["external_features"] = Path(external_features).resolve()
        try:
            return RunConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(describe_validation_error(e)) from e


def describe_validation_error(error: ValidationError) -> str:
    """Single-line rendering of a pydantic validation error."""
    parts = []
    for entry in error.errors():
        location = ".".join(str(part) for part in entry["loc"]) or "config"
        parts.append(f"{location}: {entry['msg']}")
    return "; ".join(parts)


def _split_list(raw: str) -> List[str]:
    return [item.strip() for item in raw.replace("\n", ",").split(",") if item.strip()]


def _float(key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError as e:
        raise ConfigurationError(f"'{key}' must be a number, got {raw!r}", config_key=key) from e
    if not math.isfinite(value):
        raise ConfigurationError(f"'{key}' must be finite, got {raw!r}", config_key=key)
    return value


def parse_frequencies(raw: str) -> List[float]:
    """Frequency list: comma-separated values and/or ``start:stop:step`` ranges (stop inclusive)."""
    frequencies: List[float] = []
    for item in _split_list(raw):
        if ":" not in item:
            frequencies.append(_float("frequencies", item))
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigurationError(
                f"Frequency range must be start:stop:step, got {item!r}", config_key="frequencies"
            )
        start, stop, step = (_float("frequencies", part) for part in parts)
        if step <= 0 or stop < start:
            raise ConfigurationError(f"Empty frequency range {item!r}", config_key="frequencies")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        frequencies.extend(float(start + i * step) for i in range(count))
    if not frequencies:
        raise ConfigurationError("No sweep frequencies configured", config_key="frequencies")
    return frequencies


def parse_lag_schedule(raw: str, scale: float = 1.0) -> LagSchedule:
    """Rules written as ``lower-upper:lag``; an empty upper bound is open-ended.

    Example: ``1-14:10, 14-21:7, 21-28:3, 28-:2``.
    """
    rules: List[LagRule] = []
    for item in _split_list(raw):
        try:
            bounds, lag = item.split(":")
            lower, upper = bounds.split("-")
            rules.append(
                LagRule(
                    lower=_float("lag_schedule", lower) * scale,
                    upper=_float("lag_schedule", upper) * scale if upper.strip() else None,
                    lag=int(lag),
                )
            )
        except (ValueError, ValidationError) as e:
            raise ConfigurationError(
                f"Invalid lag schedule rule {item!r}", config_key="lag_schedule"
            ) from e
    return LagSchedule(rules=rules)


def _features(section: configparser.SectionProxy) -> Dict[str, Any]:
    data: Dict[str, Any] = {}
    enabled = section.get("enabled", "all").strip()
    if enabled.lower() == "none":
        data["enabled"] = set()
    elif enabled.lower() != "all":
        names = _split_list(enabled)
        known = {name.value for name in FeatureName}
        unknown = [name for name in names if name not in known]
        if unknown:
            raise ConfigurationError(f"Unknown features {unknown}", config_key="enabled")
        data["enabled"] = {FeatureName(name) for name in names}
    for key in ("mov_avg_window", "entropy_bins", "reg_mod_lambda"):
        if key in section:
            data[key] = section[key]
    if "include_aux" in section:
        data["include_aux"] = section.getboolean("include_aux")
    return data


def _learner(section: configparser.SectionProxy) -> Dict[str, Any]:
    data: Dict[str, Any] = {"seed": settings.default_seed}
    keys = (
        "lasso_lambda",
        "lasso_max_sweeps",
        "lasso_tolerance",
        "n_trees",
        "max_features",
        "min_samples_split",
        "seed",
    )
    for key in keys:
        if key in section:
            data[key] = section[key]
    if "learner" in section:
        data["kind"] = section["learner"]
    if section.get("max_depth", "").strip():
        data["max_depth"] = section["max_depth"]
    if "bootstrap" in section:
        data["bootstrap"] = section.getboolean("bootstrap")
    return data


def _resolve(base: Path, raw: Optional[str]) -> Optional[Path]:
    if raw is None or not raw.strip():
        return None
    path = Path(raw.strip()).expanduser()
    return path if path.is_absolute() else (base / path).resolve()


def build_run_config(parser: configparser.ConfigParser, base: Path) -> RunConfig:
    """Translate a parsed INI file into a validated ``RunConfig``."""
    unknown = [name for name in parser.sections() if name not in SECTIONS]
    if unknown:
        raise ConfigurationError(f"Unknown config sections {unknown}")
    for name in SECTIONS:
        if not parser.has_section(name):
            parser.add_section(name)

    dataset = parser["dataset"]
    if not dataset.get("path", "").strip():
        raise ConfigurationError("[dataset] path is required", config_key="path")
    time_unit = TimeUnit(dataset.get("time_unit", TimeUnit.RAW.value).strip())
    scale = time_unit.seconds

    embedding = parser["embedding"]
    lag = embedding.get("lag", "").strip()
    schedule = embedding.get("lag_schedule", "").strip()

    sweep_section = parser["sweep"]
    grid: Optional[SweepGrid] = None
    if sweep_section.get("frequencies", "").strip():
        grid = SweepGrid(
            frequencies=[f * scale for f in parse_frequencies(sweep_section["frequencies"])],
            learners=[LearnerKind(v) for v in _split_list(sweep_section.get("learners", "lasso"))],
            variants=[
                Variant(v) for v in _split_list(sweep_section.get("variants", "baseline, autofits"))
            ],
        )

    resample = parser["resample"]
    if resample.get("frequency", "").strip():
        frequency = _float("frequency", resample["frequency"]) * scale
    elif grid is not None:
        frequency = grid.frequencies[0]
    else:
        raise ConfigurationError(
            "[resample] frequency is required without a [sweep] grid", config_key="frequency"
        )

    model = parser["model"]
    evaluation = parser["evaluation"]
    output = parser["output"]

    pipeline: Dict[str, Any] = {
        "resample": ResampleConfig(
            frequency=frequency,
            aggregator=Aggregator(resample.get("aggregator", Aggregator.SUM.value).strip()),
            imputer=Imputer(resample.get("imputer", Imputer.ZERO.value).strip()),
        ),
        "features": FeatureConfig(**_features(parser["features"])),
        "learner": LearnerConfig(**_learner(model)),
        "variant": model.get("variant", Variant.AUTOFITS.value).strip(),
        "holdout_fraction": evaluation.get("holdout_fraction", "0.10"),
    }
    if lag:
        pipeline["lag"] = lag
    if schedule:
        pipeline["lag_schedule"] = parse_lag_schedule(schedule, scale)

    return RunConfig(
        dataset=DatasetConfig(
            path=_resolve(base, dataset["path"]),
            columns=ColumnSpec(
                timestamp_column=dataset.get("timestamp_column", "").strip(),
                value_column=dataset.get("value_column", "").strip(),
                entity_column=dataset.get("entity_column", "").strip() or None,
                timestamp_format=TimestampFormat(
                    dataset.get("timestamp_format", TimestampFormat.NUMERIC.value).strip()
                ),
                date_columns=_split_list(dataset.get("date_columns", "")),
                drop_columns=_split_list(dataset.get("drop_columns", "")),
            ),
            missing=ImputeStrategy(dataset.get("missing", ImputeStrategy.DROP_ROW.value).strip()),
            split_date_columns=_split_list(dataset.get("split_date_columns", "")),
            time_unit=time_unit,
        ),
        pipeline=PipelineConfig(**pipeline),
        sweep=grid,
        positive_r2_only=evaluation.getboolean("positive_r2_only", fallback=False),
        external_features=_resolve(base, dataset.get("external_features")),
        output=OutputConfig(
            features=_resolve(base, output.get("features")),
            forecast=_resolve(base, output.get("forecast")),
            report=_resolve(base, output.get("report")),
            wins=_resolve(base, output.get("wins")),
            validation=_resolve(base, output.get("validation")),
        ),
    )


def load_run_config(path: Path | str) -> RunConfig:
    """Read and validate an INI run config; paths resolve against its directory.

    Raises ``ConfigurationError`` for every problem, including pydantic
    validation failures and referenced input files that do not exist.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")

    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
        config = build_run_config(parser, path.resolve().parent)
    except configparser.Error as e:
        raise ConfigurationError(f"{path}: {e}") from e
    except ValidationError as e:
        raise ConfigurationError(f"{path}: {describe_validation_error(e)}") from e
    except ValueError as e:
        raise ConfigurationError(f"{path}: {e}") from e

    config = config.model_copy(update={"source": path.resolve()})
    check_inputs(config)
    return config


def check_inputs(config: RunConfig) -> None:
    """Fail fast when referenced input files are missing."""
    if not config.dataset.path.is_file():
        raise ConfigurationError(
            f"Dataset file not found: {config.dataset.path}", config_key="path"
        )
    if config.external_features is not None and not config.external_features.is_file():
        raise ConfigurationError(
            f"External feature file not found: {config.external_features}",
            config_key="external_features",
        )

