"""Custom exceptions for the forecasting toolkit."""

from typing import Any, Dict, List, Optional


class IrregularForecastError(Exception):
    """Base exception for the forecasting toolkit."""

    def __init__(
        self,
        message: str,
        error_code: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.message = message
        self.error_code = error_code or "IRREGULAR_FORECAST_ERROR"
        self.details = details or {}


class ConfigurationError(IrregularForecastError):
    """Raised when configuration is invalid."""

    def __init__(
        self,
        message: str,
        config_key: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message, "CONFIGURATION_ERROR", details)
        self.config_key = config_key


class DataError(IrregularForecastError):
    """Raised when input data cannot be read or parsed."""

    def __init__(
        self,
        message: str,
        line_number: Optional[int] = None,
        column: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message, "DATA_ERROR", details)
        self.line_number = line_number
        self.column = column


class SchemaError(DataError):
    """Raised when a required column is missing from the input."""

    def __init__(self, column: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(f"Missing required column '{column}'", column=column, details=details)
        self.error_code = "SCHEMA_ERROR"


class TimestampOutOfRangeError(IrregularForecastError):
    """Raised when a timestamp falls before the origin of a regular series."""

    def __init__(self, timestamp: float, origin: float):
        super().__init__(
            f"Timestamp {timestamp!r} precedes series origin {origin!r}",
            "TIMESTAMP_OUT_OF_RANGE",
            {"timestamp": timestamp, "origin": origin},
        )
        self.timestamp = timestamp
        self.origin = origin


class InsufficientObservationsError(IrregularForecastError):
    """Raised when an entity has too few bins for one embedding row."""

    def __init__(self, entity_id: Optional[str], bins: int, lag: int):
        label = entity_id if entity_id is not None else "<anonymous>"
        super().__init__(
            f"Insufficient observations for entity {label}: {bins} bins for lag {lag}",
            "INSUFFICIENT_OBSERVATIONS",
            {"entity_id": entity_id, "bins": bins, "lag": lag},
        )
        self.entity_id = entity_id


class ModelError(IrregularForecastError):
    """Raised when a learner receives unusable input."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, "MODEL_ERROR", details)


class MetricError(IrregularForecastError):
    """Raised when a metric is requested on incompatible vectors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, "METRIC_ERROR", details)


class ExternalFeatureError(IrregularForecastError):
    """Raised when an external feature bundle does not cover the feature rows."""

    def __init__(self, missing_keys: List[tuple[Optional[str], float]]):
        preview = ", ".join(f"({e!r}, {t!r})" for e, t in missing_keys[:5])
        more = f" and {len(missing_keys) - 5} more" if len(missing_keys) > 5 else ""
        super().__init__(
            f"External features missing for {len(missing_keys)} rows: {preview}{more}",
            "EXTERNAL_FEATURE_ERROR",
            {"missing": len(missing_keys)},
        )
        self.missing_keys = missing_keys


class AllCellsFailedError(IrregularForecastError):
    """Raised when every cell of a sweep failed."""

    def __init__(self, cells: int, details: Optional[Dict[str, Any]] = None):
        super().__init__(f"All {cells} sweep cells failed", "ALL_CELLS_FAILED", details)
        self.cells = cells
