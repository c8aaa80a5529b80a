"""Paired shadow execution.

Every value is a :class:`TrackedPair` carried in two lanes.  The original
lane is plain binary64 evaluation and is never touched.  In the perturbed
lane each atomic operation first checks its condition number on the
perturbed operands; when a component exceeds the policy threshold, the
operand responsible is shifted by one ULP (``x - ulp(x)`` by default) before
the operation runs.  The lane difference at the end is the error estimate.

A large condition number alone does not make a result wrong: if the
amplified difference is later absorbed (``tiny + 10``), the lanes re-converge
and the final report shows no error.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator

from .condnum import DEFAULT_THRESHOLD, AtomicOp, ConditionResult, condition_of, evaluate
from .errors import DomainError, EvaluationError, NonFiniteError
from .metrics import DEFAULT_SIGNIFICANCE, classify_significant
from .ulp import shift_ulps, sub_one_ulp, ulp_of

__all__ = [
    "PerturbationMode",
    "OperandRule",
    "PerturbationPolicy",
    "DEFAULT_POLICY",
    "DISABLED",
    "TrackedPair",
    "TraceEvent",
    "TraceLog",
    "ErrorReport",
    "track",
    "apply",
    "finish",
    "lane_errors",
]


class PerturbationMode(enum.Enum):
    ONE_ULP_SUB = "one-ulp"
    CYCLIC = "cyclic"


class OperandRule(enum.Enum):
    LARGEST_CONDITION = "largest"
    ALL_EXCEEDING = "all"


@dataclass(frozen=True)
class PerturbationPolicy:
    threshold: float = DEFAULT_THRESHOLD
    mode: PerturbationMode = PerturbationMode.ONE_ULP_SUB
    cyclic_offsets: tuple[int, ...] = (-1, 1, -2, 2, -3, 3)
    operand_rule: OperandRule = OperandRule.LARGEST_CONDITION
    perturb_constants: bool = False

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold!r}")
        object.__setattr__(self, "mode", PerturbationMode(self.mode))
        object.__setattr__(self, "operand_rule", OperandRule(self.operand_rule))
        object.__setattr__(self, "cyclic_offsets", tuple(int(k) for k in self.cyclic_offsets))
        if self.mode is PerturbationMode.CYCLIC and not self.cyclic_offsets:
            raise ValueError("cyclic mode needs at least one offset")

    def select(
        self, condition: ConditionResult, eligible: tuple[bool, ...] | None = None
    ) -> tuple[int, ...]:
        """Indices of the operands to perturb (empty when nothing exceeds).

        Operands marked ineligible (program constants, unless
        ``perturb_constants``) are never chosen.
        """
        comps = condition.components()
        if eligible is None or self.perturb_constants:
            eligible = (True,) * len(comps)
        over = [i for i, c in enumerate(comps) if eligible[i] and c > self.threshold]
        if not over or self.operand_rule is OperandRule.ALL_EXCEEDING:
            return tuple(over)
        # largest condition wins; ties go to the left operand
        return (max(over, key=lambda i: (comps[i], -i)),)


DEFAULT_POLICY = PerturbationPolicy()
DISABLED = PerturbationPolicy(threshold=math.inf)


@dataclass(frozen=True, slots=True)
class TrackedPair:
    original: float
    perturbed: float
    # literal program constants are exact by construction and never perturbed
    constant: bool = field(default=False, compare=False)


def track(x: float, constant: bool = False) -> TrackedPair:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"cannot track non-finite value {x!r}")
    return TrackedPair(x, x, constant)


_SIDES = {(): None, (0,): "left", (1,): "right", (0, 1): "both"}


@dataclass(frozen=True)
class TraceEvent:
    op_index: int
    op: AtomicOp
    operands: tuple[float, ...]
    condition: ConditionResult
    perturbed_operand: str | None
    offset: int

    @property
    def injected(self) -> bool:
        return self.perturbed_operand is not None

    def to_record(self) -> dict:
        return {
            "op_index": self.op_index,
            "op": self.op.value,
            "operands": list(self.operands),
            "condition": list(self.condition.components()),
            "perturbed_operand": self.perturbed_operand,
            "offset": self.offset,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TraceEvent":
        return cls(
            op_index=int(rec["op_index"]),
            op=AtomicOp(rec["op"]),
            operands=tuple(float(v) for v in rec["operands"]),
            condition=ConditionResult(*(float(c) for c in rec["condition"])),
            perturbed_operand=rec["perturbed_operand"],
            offset=int(rec["offset"]),
        )


@dataclass
class TraceLog:
    """Per-evaluation event record; also owns the cyclic-offset cursor."""

    events: list[TraceEvent] = field(default_factory=list)
    cursor: int = 0

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    @property
    def injections(self) -> int:
        return sum(1 for e in self.events if e.injected)

    def next_offset(self, policy: PerturbationPolicy) -> int:
        k = policy.cyclic_offsets[self.cursor % len(policy.cyclic_offsets)]
        self.cursor += 1
        return k

    def to_lines(self) -> Iterator[str]:
        for e in self.events:
            yield json.dumps(e.to_record())

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "TraceLog":
        log = cls()
        for line in lines:
            if line.strip():
                log.events.append(TraceEvent.from_record(json.loads(line)))
        log.cursor = log.injections
        return log


def apply(
    op: AtomicOp,
    a: TrackedPair,
    b: TrackedPair | None = None,
    *,
    policy: PerturbationPolicy = DEFAULT_POLICY,
    log: TraceLog | None = None,
) -> TrackedPair:
    """Run one atomic operation in both lanes, perturbing the second if needed."""
    if log is None:
        log = TraceLog()
    idx = len(log.events)
    orig_args = (a.original,) if b is None else (a.original, b.original)
    pert_args = (a.perturbed,) if b is None else (a.perturbed, b.perturbed)

    try:
        original = evaluate(op, *orig_args)
    except DomainError as exc:
        raise EvaluationError(str(exc), lane="original", op_index=idx) from None
    try:
        cond = condition_of(op, *pert_args)
    except DomainError as exc:
        raise EvaluationError(str(exc), lane="perturbed", op_index=idx) from None

    operands = (a,) if b is None else (a, b)
    chosen = policy.select(cond, tuple(not p.constant for p in operands))
    offset = 0
    args = pert_args
    if chosen:
        if policy.mode is PerturbationMode.ONE_ULP_SUB:
            offset = -1
            move = sub_one_ulp
        else:
            offset = log.next_offset(policy)
            move = lambda v: shift_ulps(v, offset)  # noqa: E731
        args = tuple(move(v) if i in chosen else v for i, v in enumerate(pert_args))
    log.events.append(TraceEvent(idx, op, pert_args, cond, _SIDES[chosen], offset))

    try:
        perturbed = evaluate(op, *args)
    except DomainError as exc:
        raise EvaluationError(str(exc), lane="perturbed", op_index=idx) from None
    if not math.isfinite(original):
        raise NonFiniteError(f"{op.value} produced {original!r}", lane="original", op_index=idx)
    if not math.isfinite(perturbed):
        raise NonFiniteError(f"{op.value} produced {perturbed!r}", lane="perturbed", op_index=idx)
    return TrackedPair(original, perturbed)


@dataclass
class ErrorReport:
    res_original: float
    res_perturbed: float
    err_abs: float
    err_rel: float
    err_ulp: float
    significant: bool
    events: TraceLog = field(default_factory=TraceLog)
    exceptional: bool = False
    rel_undefined: bool = False
    message: str | None = None

    @property
    def injections(self) -> int:
        return self.events.injections

    def to_dict(self, with_events: bool = True) -> dict:
        d = {
            "res_original": self.res_original,
            "res_perturbed": self.res_perturbed,
            "err_abs": self.err_abs,
            "err_rel": self.err_rel,
            "err_ulp": self.err_ulp,
            "significant": self.significant,
            "injections": self.injections,
            "exceptional": self.exceptional,
            "rel_undefined": self.rel_undefined,
            "message": self.message,
        }
        if with_events:
            d["events"] = [e.to_record() for e in self.events]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorReport":
        log = TraceLog([TraceEvent.from_record(r) for r in d.get("events", [])])
        return cls(
            res_original=d["res_original"],
            res_perturbed=d["res_perturbed"],
            err_abs=d["err_abs"],
            err_rel=d["err_rel"],
            err_ulp=d["err_ulp"],
            significant=d["significant"],
            events=log,
            exceptional=d.get("exceptional", False),
            rel_undefined=d.get("rel_undefined", False),
            message=d.get("message"),
        )


def _to_float(q: Fraction) -> float:
    try:
        return float(q)
    except OverflowError:
        return math.inf


def lane_errors(res_original: float, res_perturbed: float) -> tuple[float, float, float, bool]:
    """``(err_abs, err_rel, err_ulp, rel_undefined)`` between two finite lanes."""
    diff = abs(Fraction(res_original) - Fraction(res_perturbed))
    err_abs = float(diff)
    err_ulp = _to_float(diff / Fraction(ulp_of(res_original)))
    if res_original != 0.0:
        return err_abs, _to_float(diff / abs(Fraction(res_original))), err_ulp, False
    if diff == 0:
        return 0.0, 0.0, 0.0, False
    return err_abs, math.inf, err_ulp, True


def finish(
    result: TrackedPair,
    log: TraceLog | None = None,
    significance: float = DEFAULT_SIGNIFICANCE,
) -> ErrorReport:
    log = log if log is not None else TraceLog()
    ori, per = result.original, result.perturbed
    if not (math.isfinite(ori) and math.isfinite(per)):
        nan = math.nan
        return ErrorReport(ori, per, nan, nan, nan, False, log, exceptional=True,
                           message="non-finite lane result")
    err_abs, err_rel, err_ulp, undefined = lane_errors(ori, per)
    return ErrorReport(
        ori, per, err_abs, err_rel, err_ulp,
        classify_significant(err_rel, significance),
        log,
        rel_undefined=undefined,
    )
