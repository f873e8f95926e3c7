"""Feature catalog names, configuration and feature rows."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field


class FeatureName(str, Enum):
    """Catalog of irregularity and embedding features, in column order."""

    REL_DISP_T = "rel_disp_t"
    T_Y_AVG_MUL = "t_y_avg_mul"
    T_Y_AVG_DIF_MUL = "t_y_avg_dif_mul"
    SPACE_AREA_2D = "2d_space_area"
    MISSING_T_COUNT = "missing_t_count"
    T_DIF_STATS = "t_dif_stats"
    MIN_MAX_T_DIF = "min_max_t_dif"
    MIN_MAX_T_DIF_F = "min_max_t_dif_f"
    ENTROPY_T = "entropy_t"
    ENTROPY_Y = "entropy_y"
    REL_DISP_Y = "rel_disp_y"
    MOV_AVG = "mov_avg"
    REG_MOD = "reg_mod"


class DataSource(str, Enum):
    """Which data a feature is computed from."""

    ORIGINAL = "orig"
    RESAMPLED = "res"
    BOTH = "both"


FEATURE_SOURCES: Dict[FeatureName, DataSource] = {
    FeatureName.REL_DISP_T: DataSource.BOTH,
    FeatureName.T_Y_AVG_MUL: DataSource.BOTH,
    FeatureName.T_Y_AVG_DIF_MUL: DataSource.BOTH,
    FeatureName.SPACE_AREA_2D: DataSource.BOTH,
    FeatureName.MISSING_T_COUNT: DataSource.RESAMPLED,
    FeatureName.T_DIF_STATS: DataSource.ORIGINAL,
    FeatureName.MIN_MAX_T_DIF: DataSource.ORIGINAL,
    FeatureName.MIN_MAX_T_DIF_F: DataSource.ORIGINAL,
    FeatureName.ENTROPY_T: DataSource.ORIGINAL,
    FeatureName.ENTROPY_Y: DataSource.BOTH,
    FeatureName.REL_DISP_Y: DataSource.BOTH,
    FeatureName.MOV_AVG: DataSource.RESAMPLED,
    FeatureName.REG_MOD: DataSource.RESAMPLED,
}

T_DIF_STAT_NAMES: Tuple[str, ...] = (
    "mean",
    "std",
    "var",
    "sum",
    "median",
    "iqr",
    "min",
    "max",
    "rel_disp",
)

REG_MOD_STAT_NAMES: Tuple[str, ...] = (
    "ols_prediction",
    "ols_error",
    "ols_abs_error",
    "lasso_prediction",
    "lasso_error",
    "lasso_abs_error",
)

# Per-feature sub-statistics; features absent here yield a single column.
FEATURE_STATS: Dict[FeatureName, Tuple[str, ...]] = {
    FeatureName.T_DIF_STATS: T_DIF_STAT_NAMES,
    FeatureName.REG_MOD: REG_MOD_STAT_NAMES,
}


class FeatureConfig(BaseModel):
    """Which catalog features to compute and their tuning knobs."""

    mov_avg_window: int = Field(default=3, ge=1)
    entropy_bins: int = Field(default=10, ge=2)
    reg_mod_lambda: float = Field(default=0.1, ge=0)
    enabled: Set[FeatureName] = Field(default_factory=lambda: set(FeatureName))
    include_aux: bool = False

    @classmethod
    def disabled(cls) -> "FeatureConfig":
        """Configuration producing lags and target only."""
        return cls(enabled=set())


def feature_columns(cfg: FeatureConfig, aux_columns: Sequence[str] = ()) -> List[str]:
    """Ordered feature column names for a configuration.

    Names follow ``<feature><_orig|_res><_stat>``, e.g. ``t_dif_stats_orig_iqr``.
    """
    columns: List[str] = []
    for name in FeatureName:
        if name not in cfg.enabled:
            continue
        source = FEATURE_SOURCES[name]
        suffixes = ["orig", "res"] if source is DataSource.BOTH else [source.value]
        stats = FEATURE_STATS.get(name)
        for suffix in suffixes:
            base = f"{name.value}_{suffix}"
            if stats:
                columns.extend(f"{base}_{stat}" for stat in stats)
            else:
                columns.append(base)
    if cfg.include_aux:
        columns.extend(aux_feature_column(column) for column in aux_columns)
    return columns


def aux_feature_column(column: str) -> str:
    return f"aux_{column}_mean_orig"


def lag_columns(l: int) -> List[str]:  # noqa: E741
    return [f"lag_{i}" for i in range(1, l + 1)]


@dataclass(frozen=True, eq=False)
class FeatureRow:
    """Named features of one embedding row with its lags and target."""

    entity_id: Optional[str]
    window_start: float
    window_end: float
    target_time: float
    lags: np.ndarray
    features: Dict[str, float] = field(default_factory=dict)
    target: float = float("nan")

    @property
    def key(self) -> Tuple[Optional[str], float]:
        """Join key used by external feature bundles."""
        return (self.entity_id, self.target_time)

    def lag_values(self) -> Dict[str, float]:
        return {name: float(v) for name, v in zip(lag_columns(self.lags.size), self.lags)}
