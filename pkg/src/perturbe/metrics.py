"""Statistics for judging detector output: significance, trend, correlation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UndefinedCorrelationError

DEFAULT_SIGNIFICANCE = 1e-3
MIN_TREND_LENGTH = 8


def classify_significant(err_rel: float, threshold: float = DEFAULT_SIGNIFICANCE) -> bool:
    """True when ``err_rel >= threshold`` (the boundary counts as significant)."""
    if err_rel < 0:
        raise ValueError(f"negative relative error {err_rel!r}")
    return err_rel >= threshold


class Trend(enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    NO_TREND = "no-trend"


@dataclass(frozen=True)
class TrendResult:
    s: int
    z: float
    p_value: float
    direction: Trend
    n: int
    small_sample: bool = False


def _as_series(series: Sequence[float]) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("series needs at least two values")
    return x


def mann_kendall_s(series: Sequence[float]) -> int:
    """``S = sum_{i<j} sign(x_j - x_i)``.

    Comparisons rather than subtraction, so equal infinities count as ties.
    """
    x = _as_series(series)
    s = 0
    for i in range(x.size - 1):
        later = x[i + 1 :]
        s += int(np.count_nonzero(later > x[i])) - int(np.count_nonzero(later < x[i]))
    return s


def _tie_counts(x: np.ndarray) -> np.ndarray:
    _, counts = np.unique(x, return_counts=True)
    return counts[counts > 1]


def mann_kendall_test(series: Sequence[float], alpha: float = 0.05) -> TrendResult:
    x = _as_series(series)
    n = x.size
    s = mann_kendall_s(x)
    if n < MIN_TREND_LENGTH:
        return TrendResult(s, 0.0, 1.0, Trend.NO_TREND, n, small_sample=True)
    t = _tie_counts(x).astype(np.float64)
    var = (n * (n - 1) * (2 * n + 5) - float(np.sum(t * (t - 1) * (2 * t + 5)))) / 18.0
    if s == 0 or var <= 0:
        z = 0.0
    elif s > 0:
        z = (s - 1) / math.sqrt(var)
    else:
        z = (s + 1) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    if p < alpha and s != 0:
        direction = Trend.INCREASING if s > 0 else Trend.DECREASING
    else:
        direction = Trend.NO_TREND
    return TrendResult(s, z, p, direction, n)


def _paired(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson/spearman need two equal-length 1-d sequences")
    if x.size < 2:
        raise ValueError("need at least two pairs")
    return x, y


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    x, y = _paired(xs, ys)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    sorted_x = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    x, y = _paired(xs, ys)
    return pearson(average_ranks(x), average_ranks(y))
