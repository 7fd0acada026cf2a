"""Histogram binning and best-first regression tree growth.

Shared by the gradient boosting and random forest estimators. Splits
maximize the regularized squared-error gain

    T(G_L)^2 / (N_L + lambda) + T(G_R)^2 / (N_R + lambda) - T(G)^2 / (N + lambda)

where G is the sum of targets (residuals) in a node, N its row count and
T the l1 soft-threshold with ``reg_alpha``. With lambda = alpha = 0 this is
exactly the variance reduction. Ties go to the lowest feature index, then
the lowest threshold.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

MIN_GAIN = 1e-12


def bin_thresholds(column: np.ndarray, max_bin: int) -> np.ndarray:
    """Upper bin edges for one feature (``len <= max_bin - 1``).

    With at most ``max_bin`` distinct values every value gets its own bin
    and the edges are midpoints between neighbours; otherwise edges sit at
    equal-frequency cut points.
    """
    values = np.sort(np.asarray(column, dtype=np.float64))
    distinct = np.unique(values)
    if len(distinct) <= max_bin:
        lo, hi = distinct[:-1], distinct[1:]
    else:
        n = len(values)
        pos = np.unique(np.round(np.arange(1, max_bin) * n / max_bin).astype(np.int64))
        pos = pos[(pos > 0) & (pos < n)]
        lo, hi = values[pos - 1], values[pos]
        keep = lo < hi
        lo, hi = lo[keep], hi[keep]
    mid = lo + (hi - lo) / 2
    # x <= edge goes left; the edge must stay strictly below the next value
    mid = np.where(mid < hi, mid, lo)
    return np.unique(mid)


class BinMapper:
    def __init__(self, max_bin: int = 255):
        self.max_bin = max_bin

    def fit(self, X: np.ndarray) -> "BinMapper":
        self.thresholds_ = [bin_thresholds(X[:, j], self.max_bin) for j in range(X.shape[1])]
        self.n_bins_ = np.array([len(t) + 1 for t in self.thresholds_], dtype=np.int64)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        dtype = np.uint8 if self.n_bins_.max(initial=1) <= 256 else np.uint16
        out = np.empty(X.shape, dtype=dtype)
        for j, t in enumerate(self.thresholds_):
            out[:, j] = np.searchsorted(t, X[:, j], side="left")
        return out


@dataclass
class Tree:
    """Flat array tree; leaves have ``feature == -1``.

    Rows go left when ``x[feature] <= threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    default_left: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            if self.feature[node] < 0:
                best = max(best, d)
            else:
                stack += [(self.left[node], d + 1), (self.right[node], d + 1)]
        return best

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while active.any():
            r, n = rows[active], node[active]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def scaled(self, factor: float) -> "Tree":
        return Tree(self.feature, self.threshold, self.left, self.right, self.value * factor, self.default_left)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "default_left": self.default_left.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
            np.asarray(d["default_left"], dtype=bool),
        )


def soft_threshold(g, alpha: float):
    if alpha <= 0:
        return g
    return np.sign(g) * np.maximum(np.abs(g) - alpha, 0.0)


@dataclass
class _Split:
    gain: float
    feature: int
    bin: int


class _Node:
    __slots__ = ("rows", "depth", "sum_g", "split", "index")

    def __init__(self, rows, depth, sum_g):
        self.rows = rows
        self.depth = depth
        self.sum_g = sum_g
        self.split: Optional[_Split] = None
        self.index = -1


class TreeGrower:
    """Grow one tree on binned data, best-first.

    ``rows`` may contain repeats (bootstrap samples); every occurrence
    counts as one unit of weight. Large nodes scan per-feature histograms;
    nodes with fewer rows than bins scan their rows sorted by bin, which
    visits the same non-empty bin boundaries without the empty ones.
    """

    def __init__(
        self,
        binned: np.ndarray,
        n_bins: np.ndarray,
        thresholds: List[np.ndarray],
        num_leaves: Optional[int] = 31,
        max_depth: Optional[int] = None,
        min_child_weight: int = 1,
        reg_lambda: float = 0.0,
        reg_alpha: float = 0.0,
    ):
        self.binned = binned
        self.n_bins = n_bins
        self.thresholds = thresholds
        self.num_leaves = num_leaves if num_leaves is not None else np.inf
        self.max_depth = max_depth if max_depth is not None and max_depth >= 0 else np.inf
        self.min_child_weight = min_child_weight
        self.reg_lambda = reg_lambda
        self.reg_alpha = reg_alpha

    def _score(self, g, n):
        t = soft_threshold(g, self.reg_alpha)
        return t * t / (n + self.reg_lambda)

    def _gain_histogram(self, rows, targets, sum_g):
        n_used = len(self.features)
        sub = self.binned[np.ix_(rows, self.features)].astype(np.int64) + self.offsets
        flat = sub.ravel()
        size = n_used * self.width
        hist_g = np.bincount(flat, weights=np.repeat(targets[rows], n_used), minlength=size)
        hist_n = np.bincount(flat, minlength=size).astype(np.float64)
        gl = np.cumsum(hist_g.reshape(n_used, self.width), axis=1)[:, :-1]
        nl = np.cumsum(hist_n.reshape(n_used, self.width), axis=1)[:, :-1]
        m = float(len(rows))
        nr = m - nl
        gain = self._score(gl, nl) + self._score(sum_g - gl, nr) - self._score(sum_g, m)
        valid = (nl >= self.min_child_weight) & (nr >= self.min_child_weight) & self.bin_mask
        return np.where(valid, gain, -np.inf), None

    def _gain_sorted(self, rows, targets, sum_g):
        b = self.binned[np.ix_(rows, self.features)].T
        order = np.argsort(b, axis=1, kind="stable")
        bs = np.take_along_axis(b, order, axis=1)
        gl = np.cumsum(targets[rows][order], axis=1)[:, :-1]
        m = len(rows)
        nl = np.arange(1, m, dtype=np.float64)
        nr = m - nl
        gain = self._score(gl, nl) + self._score(sum_g - gl, nr) - self._score(sum_g, float(m))
        valid = (bs[:, :-1] != bs[:, 1:]) & (nl >= self.min_child_weight) & (nr >= self.min_child_weight)
        return np.where(valid, gain, -np.inf), bs

    def _best_split(self, node: _Node, targets) -> Optional[_Split]:
        if node.depth >= self.max_depth or len(node.rows) < 2 * self.min_child_weight:
            return None
        if len(node.rows) < self.width:
            gain, bs = self._gain_sorted(node.rows, targets, node.sum_g)
        else:
            gain, bs = self._gain_histogram(node.rows, targets, node.sum_g)
        # row-major argmax: lowest feature first, then lowest bin
        flat_best = int(np.argmax(gain))
        best = gain.flat[flat_best]
        if not np.isfinite(best) or best <= MIN_GAIN:
            return None
        f_pos, col = divmod(flat_best, gain.shape[1])
        bin_ = int(bs[f_pos, col]) if bs is not None else col
        return _Split(float(best), f_pos, bin_)

    def grow(self, targets: np.ndarray, rows: np.ndarray, features: np.ndarray) -> Tree:
        """Fit leaves to T(G)/(N + lambda) of ``targets`` over ``rows``."""
        self.features = np.asarray(features, dtype=np.int64)
        n_bins = self.n_bins[self.features]
        self.width = int(n_bins.max())
        self.offsets = np.arange(len(self.features), dtype=np.int64) * self.width
        self.bin_mask = np.arange(self.width - 1)[None, :] < (n_bins - 1)[:, None]
        targets = np.asarray(targets, dtype=np.float64)
        rows = np.asarray(rows, dtype=np.int64)

        root = _Node(rows, 0, float(targets[rows].sum()))
        root.index = 0
        nodes = [root]
        heap = []
        children = {}
        with np.errstate(divide="ignore", invalid="ignore"):
            def push(node):
                node.split = self._best_split(node, targets)
                if node.split is not None:
                    heapq.heappush(heap, (-node.split.gain, node.index, node))

            push(root)
            n_leaves = 1
            while heap and n_leaves < self.num_leaves:
                _, _, node = heapq.heappop(heap)
                f = self.features[node.split.feature]
                go_left = self.binned[node.rows, f] <= node.split.bin
                for child_rows in (node.rows[go_left], node.rows[~go_left]):
                    child = _Node(child_rows, node.depth + 1, float(targets[child_rows].sum()))
                    child.index = len(nodes)
                    nodes.append(child)
                    push(child)
                children[node.index] = (len(nodes) - 2, len(nodes) - 1, f, node.split.bin)
                n_leaves += 1

        m = len(nodes)
        feature = np.full(m, -1, dtype=np.int64)
        threshold = np.zeros(m, dtype=np.float64)
        left_ix = np.full(m, -1, dtype=np.int64)
        right_ix = np.full(m, -1, dtype=np.int64)
        value = np.zeros(m, dtype=np.float64)
        for node in nodes:
            i = node.index
            if i in children:
                l, r, f, b = children[i]
                feature[i], threshold[i], left_ix[i], right_ix[i] = f, self.thresholds[f][b], l, r
            else:
                denom = len(node.rows) + self.reg_lambda
                value[i] = soft_threshold(np.float64(node.sum_g), self.reg_alpha) / denom if denom > 0 else 0.0
        return Tree(feature, threshold, left_ix, right_ix, value, np.ones(m, dtype=bool))
