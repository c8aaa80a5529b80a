"""ULP arithmetic on binary64 values.

The ULP of ``x`` is ``eps * 2**E`` with ``E`` the unbiased exponent of ``x``.
Zero and subnormals get the smallest positive subnormal so every function
here is total on finite inputs.

Note that :func:`sub_one_ulp` subtracts ``ulp_of(x)``; it is not
``nextafter(x, -inf)``.  The two disagree at positive powers of two, where
``1.0 - ulp_of(1.0)`` skips the representable value ``1 - 2**-53``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError

__all__ = [
    "FloatFormat",
    "BINARY64",
    "BINARY32",
    "TINY",
    "ulp_of",
    "ulp_in_format",
    "sub_one_ulp",
    "shift_ulps",
    "ulp_distance",
    "ulp_array",
    "shift_ulps_array",
]


@dataclass(frozen=True)
class FloatFormat:
    name: str
    significand_bits: int
    min_exponent: int

    @property
    def machine_epsilon(self) -> float:
        return math.ldexp(1.0, 1 - self.significand_bits)


BINARY64 = FloatFormat("binary64", 53, -1022)
BINARY32 = FloatFormat("binary32", 24, -126)

TINY = math.ldexp(1.0, -1074)


def _check_finite(x):
    if not math.isfinite(x):
        raise DomainError(f"non-finite value {x!r}")


def ulp_in_format(x: float, fmt: FloatFormat = BINARY64) -> float:
    """ULP of ``x`` measured in ``fmt`` (``x`` itself is a binary64 value)."""
    _check_finite(x)
    if x == 0.0:
        exponent = fmt.min_exponent
    else:
        # frexp gives x = m * 2**e with 0.5 <= |m| < 1, so E = e - 1
        exponent = max(math.frexp(x)[1] - 1, fmt.min_exponent)
    return math.ldexp(fmt.machine_epsilon, exponent)


def ulp_of(x: float) -> float:
    """``eps * 2**E`` for binary64; ``2**-1074`` for zero and subnormals."""
    _check_finite(x)
    if x == 0.0:
        return TINY
    return max(math.ldexp(1.0, math.frexp(x)[1] - 53), TINY)


def sub_one_ulp(x: float) -> float:
    return x - ulp_of(x)


def shift_ulps(x: float, k: int) -> float:
    """``x + k * ulp_of(x)`` in binary64; ``k = -1`` is :func:`sub_one_ulp`."""
    return x + k * ulp_of(x)


def ulp_distance(a: float, b: float, reference: float) -> float:
    """``|a - b|`` in units of ``ulp_of(reference)``."""
    for v in (a, b, reference):
        _check_finite(v)
    # exact difference; a - b in binary64 can round when magnitudes differ
    q = abs(Fraction(a) - Fraction(b)) / Fraction(ulp_of(reference))
    try:
        return float(q)
    except OverflowError:
        return math.inf


def ulp_array(x: np.ndarray) -> np.ndarray:
    """Vectorised :func:`ulp_of` for finite float64 arrays."""
    x = np.asarray(x, dtype=np.float64)
    _, e = np.frexp(x)
    u = np.ldexp(1.0, e - 53)
    u = np.where(x == 0.0, TINY, u)
    return np.maximum(u, TINY)


def shift_ulps_array(x: np.ndarray, k) -> np.ndarray:
    return x + np.asarray(k, dtype=np.float64) * ulp_array(x)
