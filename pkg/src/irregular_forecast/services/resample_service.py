"""Temporal aggregation of irregular series into fixed-width bins."""

import math

import numpy as np

from irregular_forecast.models.pipeline import Aggregator, Imputer, ResampleConfig
from irregular_forecast.models.series import IrregularSeries, RegularSeries
from irregular_forecast.utils.exceptions import ConfigurationError, TimestampOutOfRangeError


def _bin_positions(timestamps: np.ndarray, origin: float, frequency: float) -> np.ndarray:
    """0-based bin of each timestamp, consistent with ``origin + i*f <= t < origin + (i+1)*f``.

    The floor estimate is corrected by one step where float rounding puts a
    timestamp on the wrong side of a computed edge.
    """
    positions = np.floor((timestamps - origin) / frequency).astype(np.int64)
    positions = np.maximum(positions, 0)
    starts = origin + positions * frequency
    positions = np.where(timestamps < starts, positions - 1, positions)
    ends = origin + (positions + 1) * frequency
    positions = np.where(timestamps >= ends, positions + 1, positions)
    return positions


def resample(series: IrregularSeries, cfg: ResampleConfig) -> RegularSeries:
    """Aggregate ``series`` into left-closed bins of width ``cfg.frequency``.

    Bins are anchored at the first timestamp and stop at the bin holding the
    last observation. Empty bins are zero-filled or carry the previous bin's
    value forward.
    """
    frequency = float(cfg.frequency)
    if not math.isfinite(frequency) or frequency <= 0:
        raise ConfigurationError(
            f"Resampling frequency must be finite and positive, got {frequency!r}",
            config_key="frequency",
        )
    if len(series) < 1:
        raise ValueError("Cannot resample an empty series")

    origin = float(series.timestamps[0])
    positions = _bin_positions(series.timestamps, origin, frequency)
    k = int(positions[-1]) + 1

    counts = np.bincount(positions, minlength=k)
    sums = np.bincount(positions, weights=series.values, minlength=k)
    imputed = counts == 0

    if cfg.aggregator is Aggregator.SUM:
        values = sums
    else:
        values = np.divide(sums, counts, out=np.zeros(k), where=~imputed)

    if cfg.imputer is Imputer.ZERO:
        values = np.where(imputed, 0.0, values)
    else:
        # Bin 0 always holds the first observation, so a filled bin always exists
        last_filled = np.maximum.accumulate(np.where(imputed, 0, np.arange(k)))
        values = values[last_filled]

    # positions are nondecreasing, so splitting the index range keeps members ordered
    boundaries = np.cumsum(counts)[:-1]
    members = tuple(np.split(np.arange(len(series), dtype=np.int64), boundaries))

    return RegularSeries(
        origin=origin,
        frequency=frequency,
        values=values,
        imputed=imputed,
        bin_members=members,
        entity_id=series.entity_id,
    )


def bin_index(reg: RegularSeries, t: float) -> int:
    """1-based index of the bin containing ``t``; bins extend past the last one."""
    if t < reg.origin:
        raise TimestampOutOfRangeError(t, reg.origin)
    position = _bin_positions(np.array([t], dtype=np.float64), reg.origin, reg.frequency)
    return int(position[0]) + 1
