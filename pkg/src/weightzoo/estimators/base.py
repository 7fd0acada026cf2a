"""Shared estimator plumbing: input validation and feature-table glue."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import ShapeError, ValidationError


def check_training_data(X, y, min_rows: int = 1):
    X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
    if len(y) < min_rows:
        raise ValidationError(f"need at least {min_rows} rows, got {len(y)}")
    if y.min() < 0 or y.max() > 1:
        raise ValidationError("targets must be accuracies in [0, 1]")
    return X, y


class AccuracyRegressor(RegressorMixin, BaseEstimator):
    """Base for the accuracy predictors.

    Subclasses implement ``_fit(X, y)`` and ``_predict_raw(X)``; ``predict``
    validates the input width and returns values in [0, 1].
    """

    kind = "base"
    min_rows = 1

    def fit(self, X, y):
        X, y = check_training_data(X, y, self.min_rows)
        self.n_features_in_ = X.shape[1]
        self._fit(X, y)
        return self

    def _check_predict(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"model expects {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def predict(self, X):
        X = self._check_predict(X)
        return np.clip(self._predict_raw(X), 0.0, 1.0)

    # feature-table helpers

    def fit_table(self, table):
        self.fit(table.X, table.y)
        self.feature_names_ = list(table.feature_names)
        self.feature_kind_ = table.kind
        return self

    def check_table(self, table) -> None:
        names = getattr(self, "feature_names_", None)
        if names is not None and list(table.feature_names) != names:
            raise ShapeError(
                f"feature mismatch: model trained on {len(names)} features of kind "
                f"{getattr(self, 'feature_kind_', '?')}, table has {table.n_features} of kind {table.kind}"
            )

    def predict_table(self, table) -> np.ndarray:
        self.check_table(table)
        return self.predict(table.X)

    # serialization hooks

    def _state(self) -> dict:
        raise NotImplementedError

    def _set_state(self, state: dict) -> None:
        raise NotImplementedError
