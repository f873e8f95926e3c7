"""Learner configuration and fitted model containers."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field


class LearnerKind(str, Enum):
    """Forecasting learners available to the pipeline."""

    LASSO = "lasso"
    RANDOM_FOREST = "random_forest"


class LearnerConfig(BaseModel):
    """Hyperparameters for both learners; each learner reads its own."""

    kind: LearnerKind = LearnerKind.LASSO
    lasso_lambda: float = Field(default=0.1, ge=0)
    lasso_max_sweeps: int = Field(default=1000, ge=1)
    lasso_tolerance: float = Field(default=1e-6, gt=0)
    n_trees: int = Field(default=100, ge=1)
    max_features: float = Field(default=1.0 / 3.0, gt=0, le=1)
    max_depth: Optional[int] = Field(default=None, ge=1)
    min_samples_split: int = Field(default=2, ge=2)
    bootstrap: bool = True
    seed: int = 42


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Fitted linear model on the original (de-standardized) feature scale."""

    coefficients: np.ndarray
    intercept: float
    column_means: np.ndarray
    column_stds: np.ndarray
    sweeps: int = 0
    objective_history: Tuple[float, ...] = ()

    @property
    def n_features(self) -> int:
        return int(self.coefficients.size)


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Binary regression tree stored as parallel node arrays.

    Leaves have ``feature == -1``; rows with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray


@dataclass(frozen=True, eq=False)
class ForestModel:
    """Bagged ensemble of regression trees."""

    trees: Tuple[RegressionTree, ...]
    seed: int
    max_features: float
    n_features: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)
