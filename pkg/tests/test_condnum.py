from __future__ import annotations

import math

import gmpy2
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from perturbe.condnum import DEFAULT_THRESHOLD, AtomicOp, condition_of, evaluate, in_dangerous_region
from perturbe.errors import DomainError
from perturbe.ulp import ulp_of
from strategies import finite


def test_sub_illustrative_condition():
    c = condition_of(AtomicOp.SUB, 0.19999999999999993, 0.2)
    assert c.c_left == pytest.approx(2.4019e15, rel=1e-4)


def test_exp_condition():
    assert condition_of(AtomicOp.EXP, 3.0).c_left == 3.0


def test_sub_exact_power_of_two_gap():
    assert condition_of(AtomicOp.SUB, 1.0, 1.0 - 2.0**-20).c_left == 2.0**20


def test_cos_illustrative_condition():
    assert condition_of(AtomicOp.COS, 1.3694384060045659).c_left == pytest.approx(6.7089, rel=1e-4)


def test_add_in_illustrative_final_step():
    c = condition_of(AtomicOp.ADD, -1.1102230246251565e-16, 10.0)
    assert c.c_left == pytest.approx(1.1102e-17, rel=1e-4)


def test_dangerous_region_examples():
    assert in_dangerous_region(AtomicOp.SUB, 0.19999999999999993, 0.2, 1e5)
    assert not in_dangerous_region(AtomicOp.ADD, 1.0, 1.0, 1e5)
    assert in_dangerous_region(AtomicOp.SIN, 3.1415926535897931, threshold=1e5)


def test_sin_near_pi_against_extended_precision():
    x = 3.1415926535897931
    with gmpy2.context(precision=200):
        expected = float(abs(gmpy2.mpfr(x) * gmpy2.cot(gmpy2.mpfr(x))))
    assert condition_of(AtomicOp.SIN, x).c_left == pytest.approx(expected, rel=1e-6)


def test_mul_div_neg_sqrt_are_benign():
    assert condition_of(AtomicOp.MUL, 1e300, 1e-300).components() == (1.0, 1.0)
    assert condition_of(AtomicOp.DIV, 3.0, 7.0).components() == (1.0, 1.0)
    assert condition_of(AtomicOp.NEG, 5.0).c_left == 1.0
    assert condition_of(AtomicOp.SQRT, 5.0).c_left == 0.5


def test_pow_and_log_formulas():
    c = condition_of(AtomicOp.POW, 1.0000000000000002, 1e15)
    assert c.c_left == 1e15
    assert c.c_right == pytest.approx(1e15 * math.log(1.0000000000000002))
    assert condition_of(AtomicOp.LOG, math.e).c_left == pytest.approx(1.0)
    assert condition_of(AtomicOp.LOG10, 1.0).c_left == math.inf


def test_removable_singularities_take_limit():
    for op in (AtomicOp.SIN, AtomicOp.TAN, AtomicOp.ASIN, AtomicOp.SINH):
        assert condition_of(op, 0.0).c_left == 1.0
    assert condition_of(AtomicOp.COS, 0.0).c_left == 0.0


@pytest.mark.parametrize(
    "op,args",
    [
        (AtomicOp.LOG, (0.0,)),
        (AtomicOp.LOG10, (-1.0,)),
        (AtomicOp.ASIN, (1.5,)),
        (AtomicOp.ACOS, (-1.0000000000000002,)),
        (AtomicOp.SQRT, (-1.0,)),
        (AtomicOp.DIV, (1.0, 0.0)),
        (AtomicOp.POW, (0.0, -1.0)),
        (AtomicOp.POW, (-2.0, 0.5)),
        (AtomicOp.ADD, (math.inf, 1.0)),
    ],
)
def test_domain_errors(op, args):
    with pytest.raises(DomainError):
        condition_of(op, *args)
    with pytest.raises(DomainError):
        evaluate(op, *args)


def test_arity_checked():
    with pytest.raises(TypeError):
        condition_of(AtomicOp.SUB, 1.0)
    with pytest.raises(TypeError):
        condition_of(AtomicOp.COS, 1.0, 2.0)


def test_evaluate_overflow_is_inf():
    assert evaluate(AtomicOp.EXP, 1000.0) == math.inf


def test_default_threshold():
    assert DEFAULT_THRESHOLD == 1e5


@pytest.mark.property
@given(finite, finite)
def test_add_identities(x, y):
    s = x + y
    assume(s != 0 and math.isfinite(s))
    c = condition_of(AtomicOp.ADD, x, y)
    for comp, operand in ((c.c_left, x), (c.c_right, y)):
        # a subnormal quotient carries absolute, not relative, rounding
        assume(comp >= 2.2250738585072014e-308 and math.isfinite(comp * abs(s)))
        assert abs(comp * abs(s) - abs(operand)) <= 2 * ulp_of(abs(operand))


@pytest.mark.property
@given(finite, finite)
def test_add_symmetry(x, y):
    assert condition_of(AtomicOp.ADD, x, y).c_left == condition_of(AtomicOp.ADD, y, x).c_right


@pytest.mark.property
@given(finite)
def test_exp_condition_is_abs(x):
    assert condition_of(AtomicOp.EXP, x).c_left == abs(x)


@pytest.mark.property
@given(finite)
def test_sub_equal_operands_infinite(x):
    assert condition_of(AtomicOp.SUB, x, x).components() == (math.inf, math.inf)


@pytest.mark.property
@given(st.sampled_from(list(AtomicOp)), finite, finite)
def test_conditions_nonnegative(op, x, y):
    try:
        c = condition_of(op, x, y if op.arity == 2 else None)
    except DomainError:
        return
    assert all(v >= 0 for v in c.components())
