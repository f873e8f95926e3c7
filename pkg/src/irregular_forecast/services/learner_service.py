"""Regression learners: least squares, LASSO and a bagged regression-tree forest."""

import math
from typing import List, Optional, Protocol, Tuple, Union

import numpy as np

from irregular_forecast.models.learners import (
    ForestModel,
    LearnerConfig,
    LearnerKind,
    LinearModel,
    RegressionTree,
)
from irregular_forecast.utils.exceptions import ModelError

GRAM_JITTER = 1e-10

Model = Union[LinearModel, ForestModel]


def _as_design(X: np.ndarray, y: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ModelError(f"Design matrix must be 2-D, got shape {X.shape}")
    target = np.asarray(y if y is not None else np.empty(0), dtype=np.float64).ravel()
    if y is not None and X.shape[0] != target.size:
        raise ModelError(f"Design has {X.shape[0]} rows but target has {target.size} entries")
    return X, target


def _varying_columns(X: np.ndarray) -> np.ndarray:
    """Columns whose values are not all identical."""
    if X.shape[0] == 0:
        return np.zeros(X.shape[1], dtype=bool)
    return X.max(axis=0) > X.min(axis=0)


def soft_threshold(z: float, gamma: float) -> float:
    """S(z, gamma) = sign(z) * max(|z| - gamma, 0)."""
    return math.copysign(max(abs(z) - gamma, 0.0), z)


def ols_fit(X: np.ndarray, y: np.ndarray) -> LinearModel:
    """Least squares with intercept via jittered normal equations on centered data."""
    X, y = _as_design(X, y)
    if y.size < 1:
        raise ModelError("Least squares needs at least one row")

    means = X.mean(axis=0)
    y_mean = float(y.mean())
    centered = X - means
    gram = centered.T @ centered
    gram[np.diag_indices_from(gram)] += GRAM_JITTER
    if X.shape[1]:
        beta = np.linalg.solve(gram, centered.T @ (y - y_mean))
    else:
        beta = np.zeros(0)

    return LinearModel(
        coefficients=beta,
        intercept=y_mean - float(means @ beta),
        column_means=means,
        column_stds=X.std(axis=0),
    )


def lasso_objective(
    X: np.ndarray, y: np.ndarray, coefficients: np.ndarray, intercept: float, lam: float
) -> float:
    """(1/2n)||y - X b - c||^2 + lam * ||b||_1 on the scale of ``X``."""
    residual = y - X @ coefficients - intercept
    return float(residual @ residual / (2 * y.size) + lam * np.abs(coefficients).sum())


def lasso_fit(
    X: np.ndarray,
    y: np.ndarray,
    lam: float,
    max_sweeps: int = 1000,
    tolerance: float = 1e-6,
    record_objective: bool = False,
) -> LinearModel:
    """LASSO by cyclic coordinate descent on standardized columns.

    Uses covariance updates: with ``G = Z'Z/n`` and ``c = Z'(y - mean y)/n``
    each coordinate step is ``b_j = S(c_j - G_j b + G_jj b_j, lam) / G_jj``.
    Stops when the largest coefficient change in a sweep is below
    ``tolerance`` or after ``max_sweeps`` sweeps. Constant columns get a zero
    coefficient.
    """
    if lam < 0:
        raise ModelError(f"LASSO penalty must be non-negative, got {lam}")
    X, y = _as_design(X, y)
    if y.size < 1:
        raise ModelError("LASSO needs at least one row")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ModelError("LASSO inputs must be finite")

    n, p = X.shape
    means = X.mean(axis=0)
    varying = _varying_columns(X)
    stds = np.where(varying, X.std(axis=0), 0.0)
    active = np.flatnonzero(varying)
    scale = np.where(varying, stds, 1.0)
    Z = np.where(varying, (X - means) / scale, 0.0)
    y_mean = float(y.mean())
    centered_y = y - y_mean

    gram = Z.T @ Z / n
    corr = Z.T @ centered_y / n
    base = float(centered_y @ centered_y) / (2 * n)
    beta = np.zeros(p)

    def objective() -> float:
        return base - float(corr @ beta) + 0.5 * float(beta @ gram @ beta) + lam * float(
            np.abs(beta).sum()
        )

    history: List[float] = [objective()] if record_objective else []
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in active:
            previous = beta[j]
            rho = corr[j] - float(gram[j] @ beta) + gram[j, j] * previous
            updated = soft_threshold(rho, lam) / gram[j, j]
            if updated != previous:
                beta[j] = updated
                max_change = max(max_change, abs(updated - previous))
        if record_objective:
            history.append(objective())
        if max_change < tolerance:
            break

    coefficients = np.where(varying, beta / scale, 0.0)
    return LinearModel(
        coefficients=coefficients,
        intercept=y_mean - float(means @ coefficients),
        column_means=means,
        column_stds=stds,
        sweeps=sweeps,
        objective_history=tuple(history),
    )


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which every standardized LASSO coefficient is zero."""
    X, y = _as_design(X, y)
    varying = _varying_columns(X)
    stds = np.where(varying, X.std(axis=0), 1.0)
    Z = np.where(varying, (X - X.mean(axis=0)) / stds, 0.0)
    return float(np.max(np.abs(Z.T @ (y - y.mean())) / y.size, initial=0.0))


def _candidate_count(p: int, max_features: float) -> int:
    return max(1, math.ceil(p * max_features - 1e-9))


def _best_split(
    X: np.ndarray, y: np.ndarray, rows: np.ndarray, columns: np.ndarray
) -> Optional[Tuple[int, float, np.ndarray]]:
    """Variance-reduction split over ``columns``; returns (column, threshold, left mask)."""
    best: Optional[Tuple[float, int, float]] = None
    targets = y[rows] - y[rows].mean()
    n = rows.size

    for column in columns:
        values = X[rows, column]
        order = np.argsort(values, kind="mergesort")
        xs = values[order]
        ys = targets[order]
        valid = np.flatnonzero(xs[:-1] < xs[1:])
        if valid.size == 0:
            continue
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        n_left = valid + 1.0
        n_right = n - n_left
        left_sse = csq[valid] - csum[valid] ** 2 / n_left
        right_sse = (csq[-1] - csq[valid]) - (csum[-1] - csum[valid]) ** 2 / n_right
        scores = left_sse + right_sse
        pick = int(np.argmin(scores))
        score = float(scores[pick])
        if best is None or score < best[0]:
            position = valid[pick]
            low, high = float(xs[position]), float(xs[position + 1])
            threshold = (low + high) / 2.0
            if not low <= threshold < high:
                threshold = low
            best = (score, int(column), threshold)

    if best is None:
        return None
    _, column, threshold = best
    return column, threshold, X[rows, column] <= threshold


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    rng: np.random.Generator,
    max_features: float,
    max_depth: Optional[int],
    min_samples_split: int,
) -> RegressionTree:
    """Grow one CART regression tree depth-first with an explicit stack."""
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def new_node(node_rows: np.ndarray) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[node_rows].mean()))
        return len(value) - 1

    stack = [(new_node(rows), rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        if node_rows.size < min_samples_split or (max_depth is not None and depth >= max_depth):
            continue
        node_y = y[node_rows]
        if node_y.max() == node_y.min():
            continue

        node_X = X[node_rows]
        varying = np.flatnonzero(node_X.max(axis=0) > node_X.min(axis=0))
        if varying.size == 0:
            continue
        count = min(_candidate_count(X.shape[1], max_features), varying.size)
        columns = rng.choice(varying, size=count, replace=False)

        split = _best_split(X, y, node_rows, np.sort(columns))
        if split is None:
            continue
        column, cut, goes_left = split
        left_rows, right_rows = node_rows[goes_left], node_rows[~goes_left]

        feature[node] = column
        threshold[node] = cut
        left[node] = new_node(left_rows)
        right[node] = new_node(right_rows)
        stack.append((right[node], right_rows, depth + 1))
        stack.append((left[node], left_rows, depth + 1))

    return RegressionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
    )


def forest_fit(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 100,
    seed: int = 42,
    max_features: float = 1.0 / 3.0,
    bootstrap: bool = True,
    max_depth: Optional[int] = None,
    min_samples_split: int = 2,
) -> ForestModel:
    """Bagged CART forest, deterministic for a given seed.

    Each tree sees a same-size bootstrap sample (unless ``bootstrap`` is off)
    and draws ``max(1, ceil(p * max_features))`` candidate columns per split.
    """
    X, y = _as_design(X, y)
    if y.size < 2:
        raise ModelError("A forest needs at least two training rows")
    if n_trees < 1:
        raise ModelError("A forest needs at least one tree")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ModelError("Forest inputs must be finite")

    n = y.size
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(
            _grow_tree(X, y, rows, rng, max_features, max_depth, max(2, min_samples_split))
        )

    return ForestModel(
        trees=tuple(trees), seed=seed, max_features=max_features, n_features=X.shape[1]
    )


def _predict_tree(tree: RegressionTree, X: np.ndarray) -> np.ndarray:
    nodes = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        internal = tree.feature[nodes] >= 0
        if not internal.any():
            return tree.value[nodes]
        rows = np.flatnonzero(internal)
        current = nodes[rows]
        goes_left = X[rows, tree.feature[current]] <= tree.threshold[current]
        nodes[rows] = np.where(goes_left, tree.left[current], tree.right[current])


def predict(model: Model, X: np.ndarray) -> np.ndarray:
    """Linear: ``X b + c``; forest: mean over trees of the reached leaf means."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0 and X.shape[0] == 0:
        return np.empty(0)
    X, _ = _as_design(X)
    if X.shape[1] != model.n_features:
        raise ModelError(
            f"Model was trained on {model.n_features} columns, got {X.shape[1]}",
            {"expected": model.n_features, "received": X.shape[1]},
        )
    if isinstance(model, LinearModel):
        return X @ model.coefficients + model.intercept
    return np.mean([_predict_tree(tree, X) for tree in model.trees], axis=0)


class Regressor(Protocol):
    """Train/predict contract shared by built-in and external learners."""

    def fit(self, X: np.ndarray, y: np.ndarray) -> "Regressor": ...

    def predict(self, X: np.ndarray) -> np.ndarray: ...


class LassoRegressor:
    """LASSO forecaster backed by ``lasso_fit``."""

    def __init__(self, cfg: LearnerConfig):
        self.cfg = cfg
        self.model: Optional[LinearModel] = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LassoRegressor":
        self.model = lasso_fit(
            X,
            y,
            self.cfg.lasso_lambda,
            max_sweeps=self.cfg.lasso_max_sweeps,
            tolerance=self.cfg.lasso_tolerance,
        )
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.model is None:
            raise ModelError("LassoRegressor used before fit")
        return predict(self.model, X)


class ForestRegressor:
    """Random-forest forecaster backed by ``forest_fit``."""

    def __init__(self, cfg: LearnerConfig):
        self.cfg = cfg
        self.model: Optional[ForestModel] = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "ForestRegressor":
        self.model = forest_fit(
            X,
            y,
            n_trees=self.cfg.n_trees,
            seed=self.cfg.seed,
            max_features=self.cfg.max_features,
            bootstrap=self.cfg.bootstrap,
            max_depth=self.cfg.max_depth,
            min_samples_split=self.cfg.min_samples_split,
        )
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.model is None:
            raise ModelError("ForestRegressor used before fit")
        return predict(self.model, X)


def make_regressor(cfg: LearnerConfig) -> Regressor:
    """Instantiate the configured learner."""
    if cfg.kind is LearnerKind.LASSO:
        return LassoRegressor(cfg)
    return ForestRegressor(cfg)
