"""Irregularity and embedding feature catalog.

``_orig`` features use the source observations inside a row's window;
``_res`` features use the row's lag values with their bin start times.
Features that are undefined on empty or single-point inputs evaluate to 0.
"""

import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from irregular_forecast.models.embedding import EmbeddingMatrix, EmbeddingRow
from irregular_forecast.models.features import (
    FEATURE_SOURCES,
    REG_MOD_STAT_NAMES,
    T_DIF_STAT_NAMES,
    DataSource,
    FeatureConfig,
    FeatureName,
    FeatureRow,
    aux_feature_column,
)
from irregular_forecast.models.series import IrregularSeries
from irregular_forecast.services.embedding_service import window_arrays
from irregular_forecast.services.learner_service import lasso_fit, ols_fit
from irregular_forecast.utils.exceptions import ConfigurationError

ZERO_MEAN_GUARD = 1e-12


def _array(x: Sequence[float] | np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _paired(ts: Sequence[float], ys: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    t, y = _array(ts), _array(ys)
    if t.shape != y.shape:
        raise ValueError(f"Timestamp and value sequences differ in length: {t.size} vs {y.size}")
    return t, y


def rel_disp(x: Sequence[float]) -> float:
    """Coefficient of variation: population std / mean."""
    values = _array(x)
    if values.size < 2:
        return 0.0
    mean = float(values.mean())
    if abs(mean) < ZERO_MEAN_GUARD:
        return 0.0
    return float(values.std()) / mean


def t_y_avg_mul(ts: Sequence[float], ys: Sequence[float]) -> float:
    """Mean of the elementwise products of timestamps and values."""
    t, y = _paired(ts, ys)
    if t.size == 0:
        return 0.0
    return float(np.mean(t * y))


def t_y_avg_dif_mul(ts: Sequence[float], ys: Sequence[float]) -> float:
    """Mean of (time difference x value difference) over consecutive pairs."""
    t, y = _paired(ts, ys)
    if t.size < 2:
        return 0.0
    return float(np.mean(np.diff(t) * np.diff(y)))


def space_area_2d(ts: Sequence[float], ys: Sequence[float]) -> float:
    """Time span multiplied by value range."""
    t, y = _paired(ts, ys)
    if t.size < 2:
        return 0.0
    return float(np.ptp(t) * np.ptp(y))


def missing_t_count(row: EmbeddingRow) -> float:
    """Number of lag bins without source observations."""
    return float(np.count_nonzero(row.lag_imputed))


def t_dif_stats(ts: Sequence[float]) -> Dict[str, float]:
    """Statistics of consecutive time differences.

    Population variance and std; median and IQR use linear interpolation
    between order statistics. All zero with fewer than two timestamps.
    """
    t = _array(ts)
    if t.size < 2:
        return {name: 0.0 for name in T_DIF_STAT_NAMES}

    diffs = np.diff(t)
    q1, median, q3 = np.percentile(diffs, [25, 50, 75])
    return {
        "mean": float(diffs.mean()),
        "std": float(diffs.std()),
        "var": float(diffs.var()),
        "sum": float(diffs.sum()),
        "median": float(median),
        "iqr": float(q3 - q1),
        "min": float(diffs.min()),
        "max": float(diffs.max()),
        "rel_disp": rel_disp(diffs),
    }


def min_max_t_dif(ts: Sequence[float], f: float) -> Tuple[float, float]:
    """Time span of ``ts`` and the same span in units of the frequency."""
    if not f > 0:
        raise ConfigurationError(f"Frequency must be positive, got {f!r}", config_key="frequency")
    t = _array(ts)
    if t.size < 2:
        return (0.0, 0.0)
    span = float(t.max() - t.min())
    return (span, span / f)


def entropy(x: Sequence[float], bins: int) -> float:
    """Shannon entropy (natural log) of an equal-width histogram over the value range."""
    if bins < 2:
        raise ValueError(f"Entropy needs at least 2 bins, got {bins}")
    values = _array(x)
    if values.size < 2:
        return 0.0
    low, high = float(values.min()), float(values.max())
    if high == low:
        return 0.0
    counts, _ = np.histogram(values, bins=bins, range=(low, high))
    probabilities = counts[counts > 0] / values.size
    return float(-np.sum(probabilities * np.log(probabilities)))


def mov_avg(lags: Sequence[float], w: int) -> float:
    """Mean of the last ``min(w, l)`` lag values."""
    if w < 1:
        raise ValueError(f"Moving-average window must be at least 1, got {w}")
    values = _array(lags)
    if values.size == 0:
        return 0.0
    return float(values[-min(w, values.size) :].mean())


def reg_mod_features(row: EmbeddingRow, lam: float) -> Dict[str, float]:
    """Fit OLS and LASSO on the first ``l-1`` lags against their bin times, predict the last.

    Emits prediction, signed error (actual - prediction) and absolute error
    per model. With fewer than two training lags both models predict the
    mean of the training lags.
    """
    lags = row.lags
    times = row.lag_timestamps
    actual = float(lags[-1])
    train_y = lags[:-1] if lags.size > 1 else lags
    train_t = times[:-1] if lags.size > 1 else times

    if train_y.size < 2 or np.ptp(train_t) == 0:
        fallback = float(train_y.mean())
        predictions = {"ols": fallback, "lasso": fallback}
    else:
        design = train_t.reshape(-1, 1)
        query = float(times[-1])
        ols = ols_fit(design, train_y)
        lasso = lasso_fit(design, train_y, lam)
        predictions = {
            "ols": float(ols.coefficients[0] * query + ols.intercept),
            "lasso": float(lasso.coefficients[0] * query + lasso.intercept),
        }

    stats: Dict[str, float] = {}
    for model in ("ols", "lasso"):
        prediction = predictions[model]
        stats[f"{model}_prediction"] = prediction
        stats[f"{model}_error"] = actual - prediction
        stats[f"{model}_abs_error"] = abs(actual - prediction)
    return {name: stats[name] for name in REG_MOD_STAT_NAMES}


def _by_source(
    name: FeatureName,
    row: EmbeddingRow,
    cfg: FeatureConfig,
    window_t: np.ndarray,
    window_y: np.ndarray,
    source: DataSource,
) -> Dict[str, float]:
    """Columns of one catalog feature for one data source (without the prefix)."""
    if source is DataSource.ORIGINAL:
        ts, ys = window_t, window_y
    else:
        ts, ys = row.lag_timestamps, row.lags

    if name is FeatureName.REL_DISP_T:
        return {"": rel_disp(ts)}
    if name is FeatureName.T_Y_AVG_MUL:
        return {"": t_y_avg_mul(ts, ys)}
    if name is FeatureName.T_Y_AVG_DIF_MUL:
        return {"": t_y_avg_dif_mul(ts, ys)}
    if name is FeatureName.SPACE_AREA_2D:
        return {"": space_area_2d(ts, ys)}
    if name is FeatureName.MISSING_T_COUNT:
        return {"": missing_t_count(row)}
    if name is FeatureName.T_DIF_STATS:
        return {f"_{stat}": value for stat, value in t_dif_stats(ts).items()}
    if name is FeatureName.MIN_MAX_T_DIF:
        return {"": min_max_t_dif(ts, row.frequency)[0]}
    if name is FeatureName.MIN_MAX_T_DIF_F:
        return {"": min_max_t_dif(ts, row.frequency)[1]}
    if name is FeatureName.ENTROPY_T:
        return {"": entropy(ts, cfg.entropy_bins)}
    if name is FeatureName.ENTROPY_Y:
        return {"": entropy(ys, cfg.entropy_bins)}
    if name is FeatureName.REL_DISP_Y:
        return {"": rel_disp(ys)}
    if name is FeatureName.MOV_AVG:
        return {"": mov_avg(ys, cfg.mov_avg_window)}
    if name is FeatureName.REG_MOD:
        return {f"_{stat}": value for stat, value in reg_mod_features(row, cfg.reg_mod_lambda).items()}
    raise ValueError(f"Unknown feature {name}")


def compute_feature_row(
    row: EmbeddingRow, src: IrregularSeries, cfg: FeatureConfig
) -> FeatureRow:
    """Every enabled catalog feature for one embedding row, in catalog column order."""
    window_t, window_y = window_arrays(row, src)
    features: Dict[str, float] = {}

    for name in FeatureName:
        if name not in cfg.enabled:
            continue
        source = FEATURE_SOURCES[name]
        sources = (
            [DataSource.ORIGINAL, DataSource.RESAMPLED] if source is DataSource.BOTH else [source]
        )
        for part in sources:
            prefix = f"{name.value}_{part.value}"
            for suffix, value in _by_source(name, row, cfg, window_t, window_y, part).items():
                features[prefix + suffix] = value

    if cfg.include_aux:
        for column in src.aux_columns:
            readings = src.aux[column][row.window_obs]
            features[aux_feature_column(column)] = float(readings.mean()) if readings.size else 0.0

    for column, value in features.items():
        # Overflow on extreme inputs is the only way to get here
        if not math.isfinite(value):
            features[column] = 0.0

    return FeatureRow(
        entity_id=row.entity_id,
        window_start=row.window_start,
        window_end=row.window_end,
        target_time=row.target_time,
        lags=row.lags,
        features=features,
        target=row.target,
    )


def compute_feature_matrix(
    emb: EmbeddingMatrix, src: IrregularSeries, cfg: FeatureConfig
) -> List[FeatureRow]:
    """One feature row per embedding row, order preserved."""
    return [compute_feature_row(row, src, cfg) for row in emb.rows]


def feature_vector(row: FeatureRow, columns: Sequence[str]) -> np.ndarray:
    """Feature values of ``row`` in ``columns`` order."""
    return np.array([row.features[column] for column in columns], dtype=np.float64)
