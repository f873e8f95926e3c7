"""Time-delay embedding of regular series with per-row source windows."""

import math
from typing import List, Tuple

import numpy as np

from irregular_forecast.models.embedding import EmbeddingMatrix, EmbeddingRow
from irregular_forecast.models.series import IrregularSeries, Observation, RegularSeries


def _row(reg: RegularSeries, start: int, l: int, target: float) -> EmbeddingRow:  # noqa: E741
    stop = start + l
    members = reg.bin_members[start:stop]
    window_obs = np.concatenate(members) if members else np.empty(0, dtype=np.int64)
    return EmbeddingRow(
        index=start,
        lags=reg.values[start:stop].copy(),
        lag_timestamps=reg.origin + np.arange(start, stop, dtype=np.float64) * reg.frequency,
        lag_imputed=reg.imputed[start:stop].copy(),
        target=target,
        target_time=reg.bin_start(stop),
        window_start=reg.bin_start(start),
        window_end=reg.bin_start(stop),
        window_obs=window_obs.astype(np.int64),
        frequency=reg.frequency,
        entity_id=reg.entity_id,
    )


def build_embedding(reg: RegularSeries, l: int) -> EmbeddingMatrix:  # noqa: E741
    """Rows ``values[j:j+l] -> values[j+l]`` for ``j = 0 .. k-l-1``.

    A series with ``k <= l`` yields an empty matrix flagged ``insufficient``.
    """
    if l < 1:
        raise ValueError(f"Lag size must be at least 1, got {l}")

    rows: List[EmbeddingRow] = [
        _row(reg, start, l, float(reg.values[start + l])) for start in range(max(reg.k - l, 0))
    ]
    return EmbeddingMatrix(rows=tuple(rows), l=l, k=reg.k, entity_id=reg.entity_id)


def build_forecast_row(reg: RegularSeries, l: int) -> EmbeddingRow:  # noqa: E741
    """Row over the final ``l`` bins whose unknown target is the bin after the last."""
    if reg.k < l:
        raise ValueError(f"Need at least {l} bins for a forecast row, have {reg.k}")
    return _row(reg, reg.k - l, l, math.nan)


def window_arrays(row: EmbeddingRow, src: IrregularSeries) -> Tuple[np.ndarray, np.ndarray]:
    """Timestamps and values of the source observations inside ``row``'s window."""
    return src.timestamps[row.window_obs], src.values[row.window_obs]


def window_observations(row: EmbeddingRow, src: IrregularSeries) -> Tuple[Observation, ...]:
    """Source observations with timestamps in ``[window_start, window_end)``, time-ordered."""
    return tuple(src.observation(int(i)) for i in row.window_obs)
