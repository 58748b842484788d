"""
Labeled feature matrices shared by PCA, feature selection and the classifiers
"""

from dataclasses import dataclass

import numpy as np

from utils.errors import DimensionError


@dataclass(frozen=True)
class LabeledDataset:
    """Dense samples x features matrix with one integer class label per row"""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        if X.ndim != 2:
            raise DimensionError(f"feature matrix must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise DimensionError(f"expected {X.shape[0]} labels, got shape {y.shape}")
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise DimensionError("labels must be integers")
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'y', y.astype(np.int64))

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.y)

    def rows(self, index) -> 'LabeledDataset':
        """Subset of samples (index array or boolean mask)"""
        return LabeledDataset(self.X[index], self.y[index])

    def columns(self, index) -> 'LabeledDataset':
        """Subset of features (index array or boolean mask)"""
        return LabeledDataset(self.X[:, index], self.y)
