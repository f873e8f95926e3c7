"""Time-delay embedding rows and matrices."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class EmbeddingRow:
    """One row of the delay embedding.

    ``window`` is the half-open interval ``[window_start, window_end)`` spanning
    the row's lag bins; ``window_obs`` indexes the source observations inside
    it, in time order. Forecast rows carry ``target = nan``.
    """

    index: int
    lags: np.ndarray
    lag_timestamps: np.ndarray
    lag_imputed: np.ndarray
    target: float
    target_time: float
    window_start: float
    window_end: float
    window_obs: np.ndarray
    frequency: float
    entity_id: Optional[str] = None

    @property
    def l(self) -> int:  # noqa: E743
        return int(self.lags.size)

    @property
    def window(self) -> Tuple[float, float]:
        return (self.window_start, self.window_end)


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """Delay-embedding rows of one regular series; empty when ``k <= l``."""

    rows: Tuple[EmbeddingRow, ...]
    l: int  # noqa: E741
    k: int
    entity_id: Optional[str] = None

    @property
    def insufficient(self) -> bool:
        """True when the series is too short to produce a single row."""
        return self.k <= self.l

    def __len__(self) -> int:
        return len(self.rows)

    def lag_matrix(self) -> np.ndarray:
        """Lag values stacked as a ``(rows, l)`` array."""
        if not self.rows:
            return np.empty((0, self.l))
        return np.vstack([row.lags for row in self.rows])
