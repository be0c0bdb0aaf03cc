"""Complete-case, zero-imputation and mean-imputation kNN baselines."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .data import TrainingArrays, mask_matrix, training_arrays
from .estimator import floor_power
from .lattice import Pattern
from .neighbors import IndexedPoints


class NoCompleteCases(ValueError):
    """Complete-case analysis needs at least one fully observed row."""


def default_k_rule(n: int, d: int) -> int:
    """max(1, floor(n ** (2 / (3 + d))))."""
    return max(1, floor_power(n, Fraction(2, 3 + d)))


KRule = Callable[[int, int], int]


@dataclass
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int
    transform_tag: str
    nu_hat: np.ndarray | None = None
    backend: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if len(self.y) == 0:
            raise ValueError("empty kNN model")
        self._index = IndexedPoints(self.X, backend=self.backend)
        self._full = Pattern.ones(self.X.shape[1])

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def neighbour_mean(self, X0) -> np.ndarray:
        X0 = np.atleast_2d(np.asarray(X0, dtype=np.float64))
        nbrs = self._index.k_nearest_positions(self._full, X0, self.k, self._index.positions(None))
        return self.y[nbrs].sum(axis=1) / nbrs.shape[1]

    def predict(self, X0) -> np.ndarray:
        return (self.neighbour_mean(X0) >= 0.5).astype(np.int64)


def knn_classify(model: KnnModel, x0) -> int:
    return int(model.predict(np.asarray(x0, dtype=np.float64)[None, :])[0])


def fit_complete_case(train, k_rule: KRule = default_k_rule, backend=None) -> KnnModel:
    data: TrainingArrays = training_arrays(train)
    full = (1 << data.d) - 1
    keep = data.masks == full
    n_cc = int(keep.sum())
    if n_cc == 0:
        raise NoCompleteCases("no complete cases in the training data")
    return KnnModel(data.X[keep], data.y[keep], k_rule(n_cc, data.d), "complete_case", backend=backend)


def fit_zero_impute(train, k_rule: KRule = default_k_rule, backend=None) -> KnnModel:
    data = training_arrays(train)
    return KnnModel(data.X.copy(), data.y.copy(), k_rule(len(data), data.d), "zero_impute", backend=backend)


def fit_mean_impute(train, k_rule: KRule = default_k_rule, backend=None) -> KnnModel:
    data = training_arrays(train)
    seen = mask_matrix(data.masks, data.d)
    counts = seen.sum(axis=0)
    nu = np.zeros(data.d)
    for j in range(data.d):
        if counts[j] == 0:
            warnings.warn(f"feature x{j + 1} is never observed; imputing 0", RuntimeWarning, stacklevel=2)
        else:
            nu[j] = data.X[seen[:, j], j].sum() / counts[j]
    X = np.where(seen, data.X, nu[None, :])
    return KnnModel(X, data.y.copy(), k_rule(len(data), data.d), "mean_impute", nu_hat=nu, backend=backend)
