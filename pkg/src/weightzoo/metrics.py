"""Regression and ranking metrics.

Undefined scores (constant targets for R², an all-tied side for Kendall's
tau) raise :class:`UndefinedScoreError` instead of returning NaN.
"""
from __future__ import annotations

import math
from typing import List, Sequence, Tuple

import numpy as np

from .exceptions import UndefinedScoreError, ValidationError


def _pair(y_true, y_pred, min_len: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y_true, dtype=np.float64).ravel()
    b = np.asarray(y_pred, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < min_len:
        raise ValidationError(f"need at least {min_len} values, got {len(a)}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValidationError("metrics need finite values")
    return a, b


def mse(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    return float(np.mean((a - b) ** 2))


def mad(y_true, y_pred) -> float:
    """Mean absolute deviation between two vectors."""
    a, b = _pair(y_true, y_pred)
    return float(np.mean(np.abs(a - b)))


def r2_score(y_true, y_pred) -> float:
    a, b = _pair(y_true, y_pred)
    baseline = float(np.mean((a - a.mean()) ** 2))
    if baseline == 0.0:
        raise UndefinedScoreError("R^2 is undefined for constant true values")
    return 1.0 - float(np.mean((a - b) ** 2)) / baseline


def _tied_pairs(sorted_values: Sequence) -> int:
    total, run = 0, 1
    for prev, cur in zip(sorted_values, sorted_values[1:]):
        if cur == prev:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    return total + run * (run - 1) // 2


def _count_inversions(values: List[float]) -> int:
    """Sort ``values`` in place and return the number of strict inversions."""
    n = len(values)
    buf = list(values)
    swaps = 0
    width = 1
    src, dst = values, buf
    while width < n:
        for lo in range(0, n, 2 * width):
            mid, hi = min(lo + width, n), min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    swaps += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            dst[k:hi] = src[i:mid] if i < mid else src[j:hi]
        src, dst = dst, src
        width *= 2
    if src is not values:
        values[:] = src
    return swaps


def _tau_b(s: int, n0: int, n1: int, n2: int) -> float:
    if n0 == n1 or n0 == n2:
        raise UndefinedScoreError("Kendall's tau is undefined when one side is all ties")
    return s / math.sqrt((n0 - n1) * (n0 - n2))


def kendall_tau(a, b) -> float:
    """Tie-corrected Kendall rank correlation (tau-b) in O(n log n).

    Rows are sorted by ``(a, b)``; a bottom-up merge sort on the ``b``
    column then counts discordant pairs as inversions.
    """
    x, y = _pair(a, b, min_len=2)
    n = len(x)
    order = np.lexsort((y, x))
    xs, ys = x[order].tolist(), y[order].tolist()
    n0 = n * (n - 1) // 2
    n1 = _tied_pairs(xs)
    joint = _tied_pairs(list(zip(xs, ys)))
    discordant = _count_inversions(ys)
    n2 = _tied_pairs(ys)
    # concordant - discordant, with pairs tied in either variable excluded
    s = n0 - n1 - n2 + joint - 2 * discordant
    return _tau_b(s, n0, n1, n2)


def kendall_tau_pairs(a, b) -> float:
    """Reference O(n^2) tau-b by direct pair counting."""
    x, y = _pair(a, b, min_len=2)
    n = len(x)
    conc = disc = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = x[i] - x[j], y[i] - y[j]
            if dx == 0:
                ties_x += 1
            if dy == 0:
                ties_y += 1
            if dx * dy > 0:
                conc += 1
            elif dx * dy < 0:
                disc += 1
    return _tau_b(conc - disc, n * (n - 1) // 2, ties_x, ties_y)
