from __future__ import annotations

import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from perturbe.errors import DomainError
from perturbe.ulp import (
    BINARY32,
    BINARY64,
    TINY,
    shift_ulps,
    shift_ulps_array,
    sub_one_ulp,
    ulp_array,
    ulp_distance,
    ulp_in_format,
    ulp_of,
)
from strategies import finite, normal

pytestmark = pytest.mark.property


def ulp_from_bits(x: float) -> float:
    """Independent ULP: read the biased exponent straight from the encoding."""
    bits = struct.unpack("<Q", struct.pack("<d", x))[0]
    biased = (bits >> 52) & 0x7FF
    if biased == 0:
        return 2.0**-1074
    return 2.0 ** (biased - 1023 - 52)


def test_ulp_of_one():
    assert ulp_of(1.0) == 2.0**-52 == 2.220446049250313e-16


def test_ulp_of_zero_is_smallest_subnormal():
    assert ulp_of(0.0) == 2.0**-1074 == TINY
    assert ulp_of(-0.0) == TINY


def test_ulp_of_three():
    assert ulp_of(3.0) == 2.0**-51 == ulp_from_bits(3.0)


@pytest.mark.parametrize("bad", [math.inf, -math.inf, math.nan])
def test_non_finite_rejected(bad):
    for fn in (ulp_of, sub_one_ulp):
        with pytest.raises(DomainError):
            fn(bad)
    with pytest.raises(DomainError):
        ulp_distance(bad, 1.0, 1.0)


def test_sub_one_ulp_of_one():
    assert sub_one_ulp(1.0) == 0.9999999999999998 == 1 - 2.0**-52


def test_sub_one_ulp_differs_from_nextafter_at_power_of_two():
    assert sub_one_ulp(1.0) < math.nextafter(1.0, 0.0)


def test_sub_one_ulp_of_zero():
    assert sub_one_ulp(0.0) == -(2.0**-1074)


def test_sub_one_ulp_reproduces_illustrative_intermediate():
    assert sub_one_ulp(0.19999999999999993) - 0.2 == -1.1102230246251565e-16


def test_ulp_distance_examples():
    assert ulp_distance(0.3, 0.3, 0.3) == 0.0
    d = ulp_distance(-8.326672684688674e-17, -1.1102230246251565e-16, -8.326672684688674e-17)
    assert d == pytest.approx(2.2518e15, rel=1e-4)
    assert ulp_distance(1.0 + 2.0**-52, 1.0, 1.0) == 1.0


def test_float_formats():
    assert BINARY64.machine_epsilon == 2.0**-52
    assert BINARY32.machine_epsilon == 2.0**-23
    assert ulp_in_format(1.0, BINARY32) == 2.0**-23
    assert ulp_in_format(1.0, BINARY64) == ulp_of(1.0)


def test_shift_ulps():
    assert shift_ulps(1.0, -1) == sub_one_ulp(1.0)
    assert shift_ulps(1.0, 2) == 1.0 + 2 * 2.0**-52


@given(finite)
def test_ulp_matches_bit_extraction(x):
    assert ulp_of(x) == ulp_from_bits(x)


@given(normal)
def test_ulp_sign_symmetric_and_positive(x):
    assert ulp_of(x) == ulp_of(-x) > 0


@given(finite)
def test_sub_one_ulp_strictly_decreases(x):
    assert sub_one_ulp(x) < x


# the top ULP of the largest finite value overflows to -inf
@given(normal.filter(lambda x: x != 0 and abs(x) < 1.7976931348623157e308 and math.frexp(abs(x))[0] != 0.5))
def test_sub_one_ulp_is_exact_off_powers_of_two(x):
    assert x - sub_one_ulp(x) == ulp_of(x)


@given(finite, finite, finite)
def test_ulp_distance_symmetric(a, b, r):
    assert ulp_distance(a, b, r) == ulp_distance(b, a, r)
    assert ulp_distance(a, a, r) == 0.0


@given(st.lists(finite, min_size=1, max_size=20))
def test_vectorised_ulp_matches_scalar(xs):
    arr = np.array(xs)
    assert ulp_array(arr).tolist() == [ulp_of(x) for x in xs]
    k = np.arange(len(xs)) % 3 - 1
    with np.errstate(over="ignore"):
        shifted = shift_ulps_array(arr, k)
    expected = [shift_ulps(x, int(j)) if math.isfinite(x + int(j) * ulp_of(x)) else x + int(j) * ulp_of(x)
                for x, j in zip(xs, k)]
    assert shifted.tolist() == expected
