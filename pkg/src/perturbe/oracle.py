"""Extended-precision re-evaluation for ground truth.

The oracle walks the same operation sequence as the binary64 program, with
every intermediate held in an MPFR value of ``significand_bits`` bits
(round-to-nearest-even).  MPFR's elementary functions are correctly rounded,
which is well inside the 1 ULP contract.

How inputs enter the oracle is a modelling choice.  ``"decimal"`` (default)
treats program text, meaning literals and string bindings, as the real
number written, so ``0.2`` is one fifth; the binary64 program then carries
input representation error, which is the error the detector estimates.
Bindings passed as floats are already binary64 values and enter exactly.
``"binary"`` feeds exact binary64 values everywhere, measuring only rounding
inside the program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2

from .condnum import AtomicOp
from .dsl import eval_plain, parse_number, run
from .errors import EvaluationError, NonFiniteError
from .metrics import DEFAULT_SIGNIFICANCE, classify_significant
from .ulp import ulp_of

__all__ = ["OracleConfig", "OracleBackend", "GroundTruth", "oracle_eval", "ground_truth", "ground_truth_error"]

_SEMANTICS = ("decimal", "binary")


@dataclass(frozen=True)
class OracleConfig:
    significand_bits: int = 128
    input_semantics: str = "decimal"

    def __post_init__(self):
        if self.significand_bits <= 53:
            raise ValueError("oracle precision must exceed binary64's 53 bits")
        if self.input_semantics not in _SEMANTICS:
            raise ValueError(f"input_semantics must be one of {_SEMANTICS}")

    def context(self):
        return gmpy2.context(precision=self.significand_bits, round=gmpy2.RoundToNearest)

    def lift(self, value: float, text: str | None = None):
        """Convert an input to the oracle format.  Call inside :meth:`context`."""
        if self.input_semantics == "decimal" and text is not None:
            t = text.strip().lstrip("+-")
            if t[:2].lower() != "0x":
                return gmpy2.mpfr(text.strip())
        return gmpy2.mpfr(float(value))


def _neg(x):
    return -x


_OPS = {
    AtomicOp.ADD: gmpy2.add,
    AtomicOp.SUB: gmpy2.sub,
    AtomicOp.MUL: gmpy2.mul,
    AtomicOp.DIV: gmpy2.div,
    AtomicOp.POW: lambda x, y: x**y,
    AtomicOp.SIN: gmpy2.sin,
    AtomicOp.COS: gmpy2.cos,
    AtomicOp.TAN: gmpy2.tan,
    AtomicOp.ASIN: gmpy2.asin,
    AtomicOp.ACOS: gmpy2.acos,
    AtomicOp.SINH: gmpy2.sinh,
    AtomicOp.COSH: gmpy2.cosh,
    AtomicOp.EXP: gmpy2.exp,
    AtomicOp.LOG: gmpy2.log,
    AtomicOp.LOG10: gmpy2.log10,
    AtomicOp.SQRT: gmpy2.sqrt,
    AtomicOp.NEG: _neg,
}


class OracleBackend:
    """DSL backend; must be used inside ``config.context()``."""

    def __init__(self, config: OracleConfig):
        self.config = config
        self.count = 0

    def literal(self, node):
        return self.config.lift(node.value, node.text)

    def variable(self, name, value):
        if isinstance(value, str):
            return self.config.lift(parse_number(value), value)
        return self.config.lift(value)

    def op(self, op: AtomicOp, args):
        idx = self.count
        self.count += 1
        if op is AtomicOp.DIV and args[1] == 0:
            raise EvaluationError("division by zero", lane="oracle", op_index=idx)
        r = _OPS[op](*args)
        if gmpy2.is_nan(r):
            raise EvaluationError(f"{op.value} outside its domain", lane="oracle", op_index=idx)
        if gmpy2.is_infinite(r):
            raise NonFiniteError(f"{op.value} produced {r}", lane="oracle", op_index=idx)
        return r


def oracle_eval(program, bindings, config: OracleConfig | None = None):
    config = config or OracleConfig()
    with config.context():
        return run(program, bindings, OracleBackend(config))


@dataclass(frozen=True)
class GroundTruth:
    value: object  # gmpy2.mpfr
    err_abs: float
    err_rel: float
    err_ulp: float
    rel_undefined: bool = False

    def significant(self, threshold: float = DEFAULT_SIGNIFICANCE) -> bool:
        return classify_significant(self.err_rel, threshold)


def ground_truth(value, low_precision_result: float, config: OracleConfig | None = None) -> GroundTruth:
    """Absolute, relative and ULP error of a binary64 result against ``value``.

    The ULP is taken at the oracle value rounded to binary64.
    """
    config = config or OracleConfig()
    with config.context():
        value = gmpy2.mpfr(value)
        diff = abs(value - gmpy2.mpfr(low_precision_result))
        ref = float(value)
        err_abs = float(diff)
        err_ulp = float(diff / gmpy2.mpfr(ulp_of(ref))) if math.isfinite(ref) else math.nan
        if value != 0:
            return GroundTruth(value, err_abs, float(diff / abs(value)), err_ulp)
        if diff == 0:
            return GroundTruth(value, 0.0, 0.0, 0.0)
        return GroundTruth(value, err_abs, math.inf, err_ulp, rel_undefined=True)


def ground_truth_error(program, bindings, config: OracleConfig | None = None,
                       low_precision_result: float | None = None) -> GroundTruth:
    """Oracle value of ``program`` and the error of ``low_precision_result`` against it.

    When ``low_precision_result`` is omitted the plain binary64 evaluation is used.
    """
    config = config or OracleConfig()
    if low_precision_result is None:
        low_precision_result = eval_plain(program, bindings)
    return ground_truth(oracle_eval(program, bindings, config), low_precision_result, config)
