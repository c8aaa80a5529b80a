from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import assume, given
from hypothesis import strategies as st

from perturbe.errors import UndefinedCorrelationError
from perturbe.metrics import (
    Trend,
    average_ranks,
    classify_significant,
    mann_kendall_s,
    mann_kendall_test,
    pearson,
    spearman,
)

series = st.lists(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=2, max_size=60)
distinct_ints = st.lists(st.integers(-1000, 1000), min_size=3, max_size=40, unique=True)


def brute_force_s(xs):
    return sum((xs[j] > xs[i]) - (xs[j] < xs[i]) for i in range(len(xs)) for j in range(i + 1, len(xs)))


def test_mann_kendall_s_examples():
    assert mann_kendall_s([1, 2, 3, 4, 5]) == 10
    assert mann_kendall_s([3, 1, 2]) == -1
    assert mann_kendall_s([7, 7, 7]) == 0


def test_mann_kendall_s_needs_two_values():
    with pytest.raises(ValueError):
        mann_kendall_s([1.0])
    with pytest.raises(ValueError):
        mann_kendall_test([])


def test_strictly_increasing_series():
    r = mann_kendall_test(list(range(100)))
    assert r.direction is Trend.INCREASING
    assert r.p_value < 1e-10
    assert r.s == 4950


def test_alternating_series_has_no_trend():
    r = mann_kendall_test([i % 2 for i in range(100)])
    assert r.direction is Trend.NO_TREND
    assert r.p_value > 0.05
    assert abs(r.z) < 1


def test_short_series_flagged():
    r = mann_kendall_test([1, 2, 3, 4, 5, 6, 7])
    assert r.small_sample and r.direction is Trend.NO_TREND and r.p_value == 1.0


def test_no_tie_statistic_matches_normal_approximation():
    rng = np.random.default_rng(3)
    xs = rng.standard_normal(50) + np.arange(50) * 0.05
    assert len(set(xs)) == 50
    r = mann_kendall_test(xs)
    n = len(xs)
    var = n * (n - 1) * (2 * n + 5) / 18
    z = (r.s - np.sign(r.s)) / math.sqrt(var)
    assert r.z == pytest.approx(z)
    assert r.p_value == pytest.approx(2 * scipy.stats.norm.sf(abs(z)))


def test_tie_corrected_variance():
    xs = [1, 1, 2, 2, 2, 3, 4, 4, 5, 6]
    r = mann_kendall_test(xs)
    n = len(xs)
    ties = [2, 3, 2]
    var = (n * (n - 1) * (2 * n + 5) - sum(t * (t - 1) * (2 * t + 5) for t in ties)) / 18
    assert r.z == pytest.approx((r.s - 1) / math.sqrt(var))


def test_pearson_examples():
    x = [1.0, 2.0, 5.0, 9.0]
    assert pearson(x, x) == pytest.approx(1.0)
    assert pearson(x, [-v for v in x]) == pytest.approx(-1.0)
    assert pearson([1, 2, 3], [2, 4, 7]) == pytest.approx(0.9934, abs=1e-4)


def test_spearman_examples():
    assert spearman([1, 2, 3], [1, 4, 9]) == pytest.approx(1.0)
    assert spearman([2, 1, 3], [1, 2, 3]) == pytest.approx(0.5)
    with pytest.raises(UndefinedCorrelationError):
        spearman([1, 2, 3], [4, 4, 4])
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 1], [2, 3])


def test_correlation_length_mismatch():
    with pytest.raises(ValueError):
        pearson([1, 2, 3], [1, 2])


def test_average_ranks_ties():
    assert average_ranks([10, 20, 20, 30]).tolist() == [1.0, 2.5, 2.5, 4.0]


def test_classify_examples():
    assert classify_significant(7.47e-04) is False
    assert classify_significant(1.07e05) is True
    assert classify_significant(0.0) is False
    assert classify_significant(1e-3) is True
    with pytest.raises(ValueError):
        classify_significant(-1.0)


@pytest.mark.property
@given(series)
def test_mann_kendall_s_matches_brute_force(xs):
    assert mann_kendall_s(xs) == brute_force_s(xs)


@pytest.mark.property
@given(series)
def test_mann_kendall_antisymmetry(xs):
    assert mann_kendall_s(xs[::-1]) == -mann_kendall_s(xs)
    n = len(xs)
    assert abs(mann_kendall_s(xs)) <= n * (n - 1) // 2


@pytest.mark.property
@given(series)
def test_trend_direction_matches_sign(xs):
    r = mann_kendall_test(xs)
    assert 0.0 <= r.p_value <= 1.0
    if r.direction is Trend.INCREASING:
        assert r.s > 0 and r.p_value < 0.05
    elif r.direction is Trend.DECREASING:
        assert r.s < 0 and r.p_value < 0.05


@pytest.mark.property
@given(distinct_ints, st.randoms(use_true_random=False))
def test_spearman_monotone_invariance(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    base = spearman(xs, ys)
    assert spearman([x**3 + x for x in xs], ys) == pytest.approx(base, abs=1e-12)
    assert spearman(xs, [math.exp(y / 1000) for y in ys]) == pytest.approx(base, abs=1e-12)
    assert spearman([-x for x in xs], ys) == pytest.approx(-base, abs=1e-12)


@pytest.mark.property
@given(distinct_ints, st.randoms(use_true_random=False))
def test_spearman_matches_scipy(xs, rnd):
    ys = [rnd.randint(-5, 5) for _ in xs]
    assume(len(set(ys)) > 1)
    assert spearman(xs, ys) == pytest.approx(scipy.stats.spearmanr(xs, ys).statistic, abs=1e-9)


@pytest.mark.property
@given(distinct_ints, distinct_ints, st.floats(0.01, 100), st.floats(-100, 100))
def test_pearson_affine_invariance_and_scipy(xs, ys, a, b):
    m = min(len(xs), len(ys))
    xs, ys = xs[:m], ys[:m]
    base = pearson(xs, ys)
    assert -1.0 <= base <= 1.0
    assert base == pytest.approx(scipy.stats.pearsonr(xs, ys).statistic, abs=1e-9)
    assert pearson([a * x + b for x in xs], ys) == pytest.approx(base, abs=1e-9)


@pytest.mark.property
@given(st.floats(0, 1e300), st.floats(0, 1e300))
def test_classify_monotone(a, b):
    lo, hi = sorted((a, b))
    assert classify_significant(lo) <= classify_significant(hi)
