"""Gradient-boosted and bagged regression trees."""
from __future__ import annotations

from typing import Dict, List, Optional

import numpy as np

from ..exceptions import ValidationError
from ._tree import BinMapper, Tree, TreeGrower
from .base import AccuracyRegressor


def _n_of(fraction: float, total: int) -> int:
    return max(1, min(total, int(round(fraction * total))))


class _TreeEnsemble(AccuracyRegressor):
    def _binned(self, X):
        self.bin_mapper_ = BinMapper(self.max_bin).fit(X)
        return self.bin_mapper_.transform(X)

    def _grower(self, binned, **kwargs) -> TreeGrower:
        return TreeGrower(binned, self.bin_mapper_.n_bins_, self.bin_mapper_.thresholds_, **kwargs)

    def _tree_state(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees_]}

    def _set_tree_state(self, state: dict) -> None:
        self.trees_ = [Tree.from_dict(t) for t in state["trees"]]

    def split_counts(self) -> np.ndarray:
        """Number of internal nodes using each feature, over all trees."""
        counts = np.zeros(self.n_features_in_, dtype=np.int64)
        for tree in self.trees_:
            used = tree.feature[tree.feature >= 0]
            counts += np.bincount(used, minlength=self.n_features_in_)
        return counts


class GBMRegressor(_TreeEnsemble):
    """Squared-error gradient boosting on histogram-binned features.

    Each tree is fit to the current residuals with leaf-wise growth and
    leaf values ``lr * T(sum r) / (n + reg_lambda)``. Training starts from
    the target mean. Predictions are clamped to [0, 1].

    Parameters
    ----------
    num_trees : int
        Boosting iterations.
    num_leaves : int
        Leaf budget per tree.
    max_depth : int or None
        Depth cap (root is depth 0); ``None`` or negative for no cap.
    learning_rate : float
        Shrinkage applied to every leaf.
    max_bin : int
        Histogram bins per feature.
    min_child_weight : int
        Minimum rows in each child of a split.
    reg_lambda, reg_alpha : float
        l2 term added to the leaf row count, l1 soft-threshold on leaf sums.
    subsample : float
        Fraction of rows (without replacement) drawn for each tree.
    subsample_freq : int
        Re-draw the row sample every this many trees (0 disables bagging).
    colsample_bytree : float
        Fraction of features drawn for each tree.
    random_state : int
        Seed for row and feature sampling.
    """

    kind = "gbm"
    min_rows = 1

    def __init__(
        self,
        num_trees: int = 500,
        num_leaves: int = 31,
        max_depth: Optional[int] = 8,
        learning_rate: float = 0.05,
        max_bin: int = 255,
        min_child_weight: int = 1,
        reg_lambda: float = 1.0,
        reg_alpha: float = 0.0,
        subsample: float = 1.0,
        subsample_freq: int = 1,
        colsample_bytree: float = 1.0,
        random_state: int = 0,
    ):
        self.num_trees = num_trees
        self.num_leaves = num_leaves
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.max_bin = max_bin
        self.min_child_weight = min_child_weight
        self.reg_lambda = reg_lambda
        self.reg_alpha = reg_alpha
        self.subsample = subsample
        self.subsample_freq = subsample_freq
        self.colsample_bytree = colsample_bytree
        self.random_state = random_state

    def _validate_params(self):
        if self.num_trees < 0 or self.num_leaves < 2 or self.max_bin < 2:
            raise ValidationError("need num_trees >= 0, num_leaves >= 2 and max_bin >= 2")
        if not 0 < self.learning_rate <= 1:
            raise ValidationError("learning_rate must lie in (0, 1]")
        if self.min_child_weight < 1:
            raise ValidationError("min_child_weight must be >= 1")
        if self.reg_lambda < 0 or self.reg_alpha < 0:
            raise ValidationError("regularization terms must be non-negative")
        if not (0 < self.subsample <= 1 and 0 < self.colsample_bytree <= 1):
            raise ValidationError("subsample and colsample_bytree must lie in (0, 1]")

    def _fit(self, X, y):
        self._validate_params()
        n, d = X.shape
        binned = self._binned(X)
        grower = self._grower(
            binned,
            num_leaves=self.num_leaves,
            max_depth=self.max_depth,
            min_child_weight=self.min_child_weight,
            reg_lambda=self.reg_lambda,
            reg_alpha=self.reg_alpha,
        )
        rng = np.random.default_rng(self.random_state)
        # a constant target must come back exactly, which np.mean's rounding can miss
        self.init_score_ = float(y[0]) if np.all(y == y[0]) else float(y.mean())
        pred = np.full(n, self.init_score_)
        self.trees_: List[Tree] = []
        self.train_mse_history_ = [float(np.mean((y - pred) ** 2))]
        rows = np.arange(n)
        for i in range(self.num_trees):
            if self.subsample < 1 and self.subsample_freq > 0 and i % self.subsample_freq == 0:
                rows = np.sort(rng.choice(n, size=_n_of(self.subsample, n), replace=False))
            features = np.arange(d)
            if self.colsample_bytree < 1:
                features = np.sort(rng.choice(d, size=_n_of(self.colsample_bytree, d), replace=False))
            residual = y - pred
            tree = grower.grow(residual, rows, features).scaled(self.learning_rate)
            self.trees_.append(tree)
            pred = pred + tree.value[tree.apply(X)]
            self.train_mse_history_.append(float(np.mean((y - pred) ** 2)))
        return self

    def _predict_raw(self, X):
        out = np.full(len(X), self.init_score_)
        for tree in self.trees_:
            out += tree.predict(X)
        return out

    def _state(self) -> dict:
        state = self._tree_state()
        state["init_score"] = self.init_score_
        return state

    def _set_state(self, state: dict) -> None:
        self._set_tree_state(state)
        self.init_score_ = float(state["init_score"])


class RandomForestRegressor(_TreeEnsemble):
    """Bootstrap-averaged, fully grown variance-reduction trees."""

    kind = "random_forest"
    min_rows = 1

    def __init__(
        self,
        num_trees: int = 32,
        max_features: float = 1.0,
        min_child_weight: int = 1,
        max_bin: int = 255,
        bootstrap: bool = True,
        random_state: int = 0,
    ):
        self.num_trees = num_trees
        self.max_features = max_features
        self.min_child_weight = min_child_weight
        self.max_bin = max_bin
        self.bootstrap = bootstrap
        self.random_state = random_state

    def _fit(self, X, y):
        if self.num_trees < 1:
            raise ValidationError("num_trees must be >= 1")
        if not 0 < self.max_features <= 1:
            raise ValidationError("max_features must lie in (0, 1]")
        n, d = X.shape
        grower = self._grower(
            self._binned(X), num_leaves=None, max_depth=None, min_child_weight=self.min_child_weight
        )
        rng = np.random.default_rng(self.random_state)
        self.trees_ = []
        for _ in range(self.num_trees):
            rows = np.sort(rng.integers(0, n, size=n)) if self.bootstrap else np.arange(n)
            features = np.arange(d)
            if self.max_features < 1:
                features = np.sort(rng.choice(d, size=_n_of(self.max_features, d), replace=False))
            self.trees_.append(grower.grow(y, rows, features))
        return self

    def _predict_raw(self, X):
        return np.mean([tree.predict(X) for tree in self.trees_], axis=0)

    def _state(self) -> dict:
        return self._tree_state()

    def _set_state(self, state: dict) -> None:
        self._set_tree_state(state)


def feature_importance(model) -> Dict[str, int]:
    """Split counts per feature name, in feature order."""
    if not isinstance(model, _TreeEnsemble):
        raise ValidationError(f"feature importance needs a tree model, got {type(model).__name__}")
    counts = model.split_counts()
    names = getattr(model, "feature_names_", None) or [f"x{i}" for i in range(len(counts))]
    return {name: int(c) for name, c in zip(names, counts)}
