"""Atomic operations, their binary64 semantics, and atomic condition numbers.

Condition numbers follow the usual table for error-amplifying operations::

    x + y    |x/(x+y)|, |y/(x+y)|        x - y   |x/(x-y)|, |y/(x-y)|
    sin x    |x cot x|                   cos x   |x tan x|
    tan x    |x / (sin x cos x)|         asin x  |x / (sqrt(1-x^2) asin x)|
    acos x   |x / (sqrt(1-x^2) acos x)|  sinh x  |x coth x|
    cosh x   |x tanh x|                  exp x   |x|
    log x    |1 / ln x|                  log10 x |1 / ln x|
    x ^ y    |y|, |y ln x|

``*`` and ``/`` preserve relative error and get condition 1; ``neg`` gets 1
and ``sqrt`` gets 1/2.  None of these can cross a threshold above 1.

Everything is evaluated in binary64 with :mod:`math`, the same libm the
engine uses for the operations themselves.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError

DEFAULT_THRESHOLD = 1e5

__all__ = [
    "AtomicOp",
    "ConditionResult",
    "DEFAULT_THRESHOLD",
    "condition_of",
    "in_dangerous_region",
    "evaluate",
]


class AtomicOp(enum.Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    POW = "pow"
    SIN = "sin"
    COS = "cos"
    TAN = "tan"
    ASIN = "asin"
    ACOS = "acos"
    SINH = "sinh"
    COSH = "cosh"
    EXP = "exp"
    LOG = "log"
    LOG10 = "log10"
    SQRT = "sqrt"
    NEG = "neg"

    @property
    def arity(self) -> int:
        return 2 if self in _BINARY else 1

    @property
    def symbol(self) -> str:
        return _SYMBOLS.get(self, self.value)


_BINARY = frozenset({AtomicOp.ADD, AtomicOp.SUB, AtomicOp.MUL, AtomicOp.DIV, AtomicOp.POW})
_SYMBOLS = {
    AtomicOp.ADD: "+",
    AtomicOp.SUB: "-",
    AtomicOp.MUL: "*",
    AtomicOp.DIV: "/",
    AtomicOp.POW: "^",
}


@dataclass(frozen=True)
class ConditionResult:
    c_left: float
    c_right: float | None = None

    def components(self) -> tuple[float, ...]:
        if self.c_right is None:
            return (self.c_left,)
        return (self.c_left, self.c_right)

    def max(self) -> float:
        return max(self.components())


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return math.inf
    return abs(num / den)


def _check_domain(op: AtomicOp, x: float, y: float | None) -> None:
    if op.arity == 2 and y is None:
        raise TypeError(f"{op.value} needs two operands")
    if op.arity == 1 and y is not None:
        raise TypeError(f"{op.value} takes one operand")
    for v in (x, y):
        if v is not None and not math.isfinite(v):
            raise DomainError(f"{op.value}: non-finite operand {v!r}")
    if op in (AtomicOp.LOG, AtomicOp.LOG10) and not x > 0.0:
        raise DomainError(f"{op.value} of non-positive {x!r}")
    if op in (AtomicOp.ASIN, AtomicOp.ACOS) and abs(x) > 1.0:
        raise DomainError(f"{op.value} of {x!r} outside [-1, 1]")
    if op is AtomicOp.SQRT and x < 0.0:
        raise DomainError(f"sqrt of negative {x!r}")
    if op is AtomicOp.DIV and y == 0.0:
        raise DomainError("division by zero")
    if op is AtomicOp.POW:
        if x == 0.0 and y < 0.0:
            raise DomainError("zero to a negative power")
        if x < 0.0 and not float(y).is_integer():
            raise DomainError(f"negative base {x!r} to non-integer power {y!r}")


def condition_of(op: AtomicOp, x: float, y: float | None = None) -> ConditionResult:
    """Atomic condition number(s) of ``op`` at the given operands.

    An exact-zero denominator yields ``inf``.  The removable singularities at
    ``x = 0`` of sin, tan, asin and sinh take their limit value 1.
    """
    _check_domain(op, x, y)
    if op is AtomicOp.ADD:
        s = x + y
        return ConditionResult(_ratio(x, s), _ratio(y, s))
    if op is AtomicOp.SUB:
        d = x - y
        return ConditionResult(_ratio(x, d), _ratio(y, d))
    if op in (AtomicOp.MUL, AtomicOp.DIV):
        return ConditionResult(1.0, 1.0)
    if op is AtomicOp.POW:
        if x > 0.0:
            log_x = math.log(x)
        elif x == 0.0:
            return ConditionResult(abs(y), 0.0 if y == 0.0 else math.inf)
        else:
            # integer powers of negative bases: magnitude sensitivity only
            log_x = math.log(-x)
        return ConditionResult(abs(y), abs(y * log_x))
    if op is AtomicOp.NEG:
        return ConditionResult(1.0)
    if op is AtomicOp.SQRT:
        return ConditionResult(0.5)
    if op is AtomicOp.EXP:
        return ConditionResult(abs(x))
    if op in (AtomicOp.LOG, AtomicOp.LOG10):
        return ConditionResult(_ratio(1.0, math.log(x)))
    if op is AtomicOp.COS:
        return ConditionResult(abs(x * math.tan(x)))
    if op is AtomicOp.COSH:
        return ConditionResult(abs(x * math.tanh(x)))
    if x == 0.0 and op in (AtomicOp.SIN, AtomicOp.TAN, AtomicOp.ASIN, AtomicOp.SINH):
        return ConditionResult(1.0)
    if op is AtomicOp.SIN:
        return ConditionResult(_ratio(x, math.tan(x)))
    if op is AtomicOp.TAN:
        return ConditionResult(_ratio(x, math.sin(x) * math.cos(x)))
    if op is AtomicOp.SINH:
        return ConditionResult(_ratio(x, math.tanh(x)))
    if op is AtomicOp.ASIN:
        return ConditionResult(_ratio(x, math.sqrt(1.0 - x * x) * math.asin(x)))
    if op is AtomicOp.ACOS:
        return ConditionResult(_ratio(x, math.sqrt(1.0 - x * x) * math.acos(x)))
    raise ValueError(f"unknown operation {op!r}")


def in_dangerous_region(
    op: AtomicOp, x: float, y: float | None = None, threshold: float = DEFAULT_THRESHOLD
) -> bool:
    return any(c > threshold for c in condition_of(op, x, y).components())


_UNARY_FUNCS = {
    AtomicOp.SIN: math.sin,
    AtomicOp.COS: math.cos,
    AtomicOp.TAN: math.tan,
    AtomicOp.ASIN: math.asin,
    AtomicOp.ACOS: math.acos,
    AtomicOp.SINH: math.sinh,
    AtomicOp.COSH: math.cosh,
    AtomicOp.EXP: math.exp,
    AtomicOp.LOG: math.log,
    AtomicOp.LOG10: math.log10,
    AtomicOp.SQRT: math.sqrt,
    AtomicOp.NEG: lambda v: -v,
}


def evaluate(op: AtomicOp, x: float, y: float | None = None) -> float:
    """Evaluate ``op`` in binary64.

    Domain violations raise :class:`DomainError`; overflow returns ``inf``
    instead of raising, so callers can treat it as a non-finite result.
    """
    _check_domain(op, x, y)
    try:
        if op is AtomicOp.ADD:
            return x + y
        if op is AtomicOp.SUB:
            return x - y
        if op is AtomicOp.MUL:
            return x * y
        if op is AtomicOp.DIV:
            return x / y
        if op is AtomicOp.POW:
            return math.pow(x, y)
        return _UNARY_FUNCS[op](x)
    except OverflowError:
        return math.inf
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"{op.value}: {exc}") from None
