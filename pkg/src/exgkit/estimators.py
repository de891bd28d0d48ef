"""scikit-learn-compatible front end for the CNN classifier.

X is a (n_windows, n_channels, n_samples) array rather than the usual 2-D
design matrix, so this estimator composes with sklearn model selection and
pipelines that pass arrays through untouched, but not with transformers
that require 2-D input.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .epidenet import forward, softmax
from .errors import ParameterError
from .training import TrainConfig, train

__all__ = ["EpiDeNetClassifier"]


class EpiDeNetClassifier(BaseEstimator, ClassifierMixin):
    """fit/predict wrapper around the CNN training loop.

    Parameters mirror TrainConfig plus the pool height that selects the
    EOG (1) or EEG (4) variant. Deterministic given seed.
    """

    def __init__(
        self,
        lr: float = 1e-3,
        batch_size: int = 64,
        epochs: int = 100,
        seed: int = 0,
        weight_decay: float = 0.0,
        val_fraction: float = 0.2,
        pool_height: int = 1,
    ):
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.weight_decay = weight_decay
        self.val_fraction = val_fraction
        self.pool_height = pool_height

    def _check_x(self, x):
        x = np.asarray(x)
        if x.ndim != 3:
            raise ParameterError(f"X must be (n_windows, channels, samples), got shape {x.shape}")
        return x

    def fit(self, X, y):
        x = self._check_x(X)
        y = np.asarray(y).ravel()
        self.classes_, encoded = np.unique(y, return_inverse=True)
        config = TrainConfig(
            lr=self.lr,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            weight_decay=self.weight_decay,
            val_fraction=self.val_fraction,
        )
        result = train(
            x, encoded, config,
            pool_height=self.pool_height,
            num_classes=len(self.classes_),
        )
        self.params_ = result.params
        self.history_ = result.history
        return self

    def decision_function(self, X):
        if not hasattr(self, "params_"):
            raise ParameterError("classifier is not fitted")
        x = self._check_x(X)
        out = []
        for lo in range(0, x.shape[0], 256):
            out.append(forward(self.params_, x[lo : lo + 256]))
        return np.concatenate(out, axis=0)

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
