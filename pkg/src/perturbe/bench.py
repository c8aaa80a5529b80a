"""Built-in corpus, input sweeps and the near-singular linear-system experiment.

Every corpus case carries the 128-bit oracle relative error of its plain
binary64 result, which backs the expected classification; the corpus test
recomputes it.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import gmpy2
import numpy as np

from .dsl import eval_tracked, parse
from .errors import EvaluationError, SingularMatrixError, UndefinedCorrelationError
from .linalg import OracleArith, TrackedArith, gen_near_singular, lu_decompose, lu_solve, make_rng, matrix_condition_number, solve
from .metrics import DEFAULT_SIGNIFICANCE, Trend, TrendResult, classify_significant, mann_kendall_test, pearson, spearman
from .oracle import OracleConfig
from .shadow import DEFAULT_POLICY, ErrorReport, PerturbationPolicy
from .ulp import BINARY32, BINARY64, FloatFormat, ulp_array, ulp_in_format

__all__ = [
    "Expectation",
    "BenchCase",
    "SweepSpec",
    "SweepPoint",
    "SweepResult",
    "run_sweep",
    "corpus",
    "LinearCase",
    "LinearExperiment",
    "run_linear_experiment",
    "CSV_HEADER",
    "format_float",
]

INPUT_LIMIT = 1e9
LOG_FLOOR = 1e-18
CSV_HEADER = ("case", "input_or_seed", "res_ori", "res_per", "err_abs", "err_rel", "err_ulp",
              "significant", "injections", "kappa", "oracle_err_rel")


def format_float(x) -> str:
    """Shortest round-trip decimal; ``repr`` of a Python float is exactly that."""
    if x is None:
        return ""
    return repr(float(x))


def _pool_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# --- corpus ------------------------------------------------------------------

class Expectation(enum.Enum):
    SIGNIFICANT = "Significant"
    NON_SIGNIFICANT = "NonSignificant"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class BenchCase:
    name: str
    region: str
    program: str
    bindings: dict[str, str]
    expected: Expectation = Expectation.UNKNOWN
    oracle_err_rel: float | None = None

    def __post_init__(self):
        if self.expected is not Expectation.UNKNOWN and self.oracle_err_rel is None:
            raise ValueError(f"{self.name}: a known classification needs its oracle error")

    @property
    def center(self) -> float:
        (name,) = parse(self.program).parameters
        return float(self.bindings[name])


def _case(name, region, program, bindings, oracle_err_rel):
    expected = Expectation.SIGNIFICANT if classify_significant(oracle_err_rel) else Expectation.NON_SIGNIFICANT
    return BenchCase(name, region, program, bindings, expected, oracle_err_rel)


# Oracle errors: 128-bit MPFR, decimal input semantics, 4 significant digits.
_CORPUS = (
    ("sub-cancel", "x~y subtraction", "x - y", {"x": "0.19999999999999993", "y": "0.2"}, 1.895e-01),
    ("sub-benign", "x~y subtraction", "x - y", {"x": "1.0", "y": "0.5"}, 0.0),
    ("add-cancel", "x~-y addition", "x + y", {"x": "0.30000000000000004", "y": "-0.3"}, 3.878e-01),
    ("add-benign", "x~-y addition", "x + y", {"x": "1.0", "y": "0.5"}, 0.0),
    ("sin-near-pi", "sin near n*pi", "sin(x)", {"x": "3.141592653589793"}, 4.864e-01),
    ("sin-benign", "sin near n*pi", "sin(x)", {"x": "1.0"}, 2.112e-18),
    ("cos-near-half-pi", "cos near n*pi+pi/2", "cos(x)", {"x": "1.5707963267948966"}, 2.184e00),
    ("cos-benign", "cos near n*pi+pi/2", "cos(x)", {"x": "1.0"}, 8.812e-17),
    ("tan-near-half-pi", "tan near n*pi/2", "tan(x)", {"x": "1.5707963267948966"}, 6.859e-01),
    ("tan-benign", "tan near n*pi/2", "tan(x)", {"x": "1.0"}, 3.972e-17),
    ("acos-near-one", "asin/acos near +-1", "acos(x)", {"x": "0.9999999999999999"}, 5.367e-02),
    ("acos-benign", "asin/acos near +-1", "acos(x)", {"x": "0.5"}, 1.024e-16),
    ("asin-near-one", "asin/acos near +-1", "asin(x)", {"x": "0.9999999999999999"}, 4.832e-10),
    ("asin-benign", "asin/acos near +-1", "asin(x)", {"x": "0.5"}, 1.024e-16),
    ("exp-large", "exp large |x|", "exp(x)", {"x": "700"}, 1.643e-17),
    ("exp-benign", "exp large |x|", "exp(x)", {"x": "1.0"}, 5.318e-17),
    ("sinh-large", "exp large |x|", "sinh(x)", {"x": "700"}, 1.643e-17),
    ("cosh-large", "exp large |x|", "cosh(x)", {"x": "700"}, 1.643e-17),
    ("log-near-one", "log near 1", "log(x)", {"x": "1.0000000000000002"}, 1.102e-01),
    ("log-near-one-2^-30", "log near 1", "log(x)", {"x": "1.0000000009313226"}, 2.726e-08),
    ("log-benign", "log near 1", "log(x)", {"x": "2.0"}, 3.346e-17),
    ("log10-near-one", "log near 1", "log10(x)", {"x": "1.0000000000000002"}, 1.102e-01),
    ("log10-benign", "log near 1", "log10(x)", {"x": "10.0"}, 0.0),
    ("pow-large-y", "pow large |y|", "x ^ y", {"x": "1.0000000000000002", "y": "1e15"}, 2.229e-02),
    ("pow-benign", "pow large |y|", "x ^ y", {"x": "2", "y": "3"}, 0.0),
    ("illustrative", "composite", "cos(x) - 0.2 + 10", {"x": "1.3694384060045659"}, 7.076e-18),
    ("illustrative-intermediate", "composite", "cos(x) - 0.2", {"x": "1.3694384060045659"}, 1.767e-01),
    ("one-minus-cos", "composite", "(1 - cos(x)) / (x*x)", {"x": "1e-8"}, 1.0),
    ("one-minus-cos-benign", "composite", "(1 - cos(x)) / (x*x)", {"x": "0.5"}, 3.482e-16),
    ("quadratic-root", "composite", "(-b + sqrt(b*b - 4*a*c)) / (2*a)", {"a": "1", "b": "1e8", "c": "1"}, 2.549e-01),
    ("quadratic-root-benign", "composite", "(-b + sqrt(b*b - 4*a*c)) / (2*a)", {"a": "1", "b": "3", "c": "1"}, 1.422e-16),
)


def corpus() -> list[BenchCase]:
    return [_case(*row) for row in _CORPUS]


# --- sweeps ------------------------------------------------------------------

_FORMATS = {"binary64": BINARY64, "bits64": BINARY64, "binary32": BINARY32, "bits32": BINARY32}


@dataclass(frozen=True)
class SweepSpec:
    center: float
    points_per_side: int = 1000
    stride_ulps: int = 10
    ulp_format: FloatFormat | str = BINARY64

    def __post_init__(self):
        if self.points_per_side < 1:
            raise ValueError("points_per_side must be at least 1")
        if self.stride_ulps < 1:
            raise ValueError("stride_ulps must be at least 1")
        if isinstance(self.ulp_format, str):
            try:
                object.__setattr__(self, "ulp_format", _FORMATS[self.ulp_format.lower()])
            except KeyError:
                raise ValueError(f"unknown ulp format {self.ulp_format!r}") from None

    def inputs(self) -> list[tuple[int, float]]:
        """``(k, center + k*stride*ulp(center))`` for ``k = -N..N`` in ascending order."""
        step = self.stride_ulps * ulp_in_format(self.center, self.ulp_format)
        n = self.points_per_side
        return [(k, self.center + k * step) for k in range(-n, n + 1)]


@dataclass
class SweepPoint:
    k: int
    input: float
    report: ErrorReport | None = None
    skipped: bool = False
    error: str | None = None

    def metric(self, name: str) -> float:
        if self.report is None or self.report.exceptional:
            return math.nan
        return getattr(self.report, name)


@dataclass
class SweepResult:
    program: str
    spec: SweepSpec
    points: list[SweepPoint]

    def side(self, which: str, metric: str = "err_rel") -> list[float]:
        """Finite metric values on one side of the center, in ascending input order."""
        sel = (lambda k: k < 0) if which == "left" else (lambda k: k > 0)
        vals = [p.metric(metric) for p in self.points if sel(p.k)]
        return [v for v in vals if math.isfinite(v)]

    def trends(self, metric: str = "err_rel", alpha: float = 0.05) -> tuple[TrendResult, TrendResult]:
        return tuple(_trend(self.side(which, metric), alpha) for which in ("left", "right"))


def _trend(series: list[float], alpha: float) -> TrendResult:
    # one-point sides are legal sweeps; the statistic itself needs two values
    if len(series) < 2:
        return TrendResult(0, 0.0, 1.0, Trend.NO_TREND, len(series), small_sample=True)
    return mann_kendall_test(series, alpha)


def _sweep_point(args) -> SweepPoint:
    source, name, k, x, policy, significance = args
    if abs(x) > INPUT_LIMIT:
        return SweepPoint(k, x, skipped=True)
    try:
        report = eval_tracked(source, {name: x}, policy, significance)
    except (EvaluationError, ArithmeticError, ValueError) as exc:
        return SweepPoint(k, x, error=str(exc))
    return SweepPoint(k, x, report)


def run_sweep(
    program: str | BenchCase,
    spec: SweepSpec,
    policy: PerturbationPolicy = DEFAULT_POLICY,
    significance: float = DEFAULT_SIGNIFICANCE,
    jobs: int = 1,
) -> SweepResult:
    """Detector reports at ``center + k*stride*ulp(center)``, ``|k| <= points_per_side``.

    Inputs beyond 1e9 in magnitude are skipped; evaluation errors are recorded per point.
    """
    source = program.program if isinstance(program, BenchCase) else program
    params = parse(source).parameters
    if len(params) != 1:
        raise ValueError(f"sweep needs a univariate program, got parameters {params}")
    tasks = [(source, params[0], k, x, policy, significance) for k, x in spec.inputs()]
    return SweepResult(source, spec, _pool_map(_sweep_point, tasks, jobs))


# --- linear experiment ---------------------------------------------------------

DEFAULT_SEVERITIES = (1.0, 1e-1, 1e-2, 1e-3)


@dataclass
class LinearCase:
    index: int
    seed: int
    severity: float
    singular: bool = False
    res_ori: float = math.nan
    res_per: float = math.nan
    err_abs: float = math.nan
    err_rel: float = math.nan
    err_ulp: float = math.nan
    significant: bool = False
    injections: int = 0
    kappa: float = math.nan
    oracle_err_rel: float | None = None
    time_plain: float = 0.0
    time_detector: float = 0.0
    time_oracle: float = 0.0

    def row(self) -> list[str]:
        return [
            f"lu-{self.index}", str(self.seed),
            format_float(self.res_ori), format_float(self.res_per),
            format_float(self.err_abs), format_float(self.err_rel), format_float(self.err_ulp),
            str(self.significant).lower(), str(self.injections),
            format_float(self.kappa), format_float(self.oracle_err_rel),
        ]


def _inf_norm(v) -> float:
    return float(np.max(np.abs(v)))


def _ulp_error(x0: np.ndarray, x1: np.ndarray) -> float:
    """Largest componentwise lane difference in ULPs of the original lane."""
    return float(np.max(np.abs(x0 - x1) / ulp_array(x0)))


def _oracle_rel_error(x_oracle, x_plain: np.ndarray, config: OracleConfig) -> float:
    with config.context():
        num = max(abs(o - gmpy2.mpfr(float(p))) for o, p in zip(x_oracle, x_plain))
        den = max(abs(o) for o in x_oracle)
        return float(num / den) if den != 0 else math.inf


def _linear_case(args) -> LinearCase:
    index, seed, n, severity, probability, policy, oracle_config, significance, generator = args
    case = LinearCase(index, seed, severity)
    a = generator(n, [seed, index], severity, probability)
    b = make_rng([seed, index, 1]).uniform(-1.0, 1.0, n)
    try:
        t = time.perf_counter()
        solve(a, b)
        case.time_plain = time.perf_counter() - t

        arith = TrackedArith(policy)
        t = time.perf_counter()
        lanes = lu_solve(lu_decompose(a, arith), b)
        case.time_detector = time.perf_counter() - t
        case.kappa = matrix_condition_number(a)
    except SingularMatrixError:
        case.singular = True
        return case
    x0, x1 = lanes[0], lanes[1]
    case.res_ori, case.res_per = _inf_norm(x0), _inf_norm(x1)
    case.err_abs = _inf_norm(x0 - x1)
    case.err_rel = case.err_abs / case.res_ori if case.res_ori else math.inf
    case.err_ulp = _ulp_error(x0, x1)
    case.significant = classify_significant(case.err_rel, significance)
    case.injections = arith.injections
    if oracle_config is not None:
        t = time.perf_counter()
        try:
            x_oracle = solve(a, b, OracleArith(oracle_config))
        except SingularMatrixError:
            case.singular = True
            return case
        case.time_oracle = time.perf_counter() - t
        case.oracle_err_rel = _oracle_rel_error(x_oracle, x0, oracle_config)
    return case


def _log_errors(values) -> np.ndarray:
    return np.log10(np.maximum(np.asarray(values, dtype=np.float64), LOG_FLOOR))


@dataclass
class LinearExperiment:
    cases: list[LinearCase]
    spearman: float | None = None
    pearson: float | None = None
    kappa_spearman: float | None = None
    agreement: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def usable(self) -> list[LinearCase]:
        return [c for c in self.cases if not c.singular and math.isfinite(c.err_rel)]

    def total(self, which: str) -> float:
        return sum(getattr(c, f"time_{which}") for c in self.cases)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for c in self.cases:
            w.writerow(c.row())
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "cases": len(self.cases),
            "singular": sum(c.singular for c in self.cases),
            "significant": sum(c.significant for c in self.cases),
            "spearman": self.spearman,
            "pearson": self.pearson,
            "kappa_spearman": self.kappa_spearman,
            "agreement_within_100x": self.agreement,
            "time_plain": self.total("plain"),
            "time_detector": self.total("detector"),
            "time_oracle": self.total("oracle"),
            "notes": list(self.notes),
        }


def _correlate(fn, xs, ys, label, notes):
    try:
        return fn(xs, ys)
    except UndefinedCorrelationError as exc:
        notes.append(f"{label} undefined: {exc}")
        return None


def run_linear_experiment(
    count: int,
    n: int = 200,
    seed: int = 0,
    severities=DEFAULT_SEVERITIES,
    policy: PerturbationPolicy = DEFAULT_POLICY,
    oracle_config: OracleConfig | None = None,
    probability: float = 1.0,
    significance: float = DEFAULT_SIGNIFICANCE,
    jobs: int = 1,
    generator=gen_near_singular,
) -> LinearExperiment:
    """Solve ``count`` generated systems under the detector (and the oracle if configured).

    Case ``i`` uses ``severities[i % len(severities)]`` and seed ``[seed, i]``.
    Correlations use log10 errors floored at 1e-18; singular cases are excluded.
    ``generator(n, seed, severity, probability)`` builds each matrix; it must be
    picklable when ``jobs > 1``.
    """
    if count < 2 or n < 2:
        raise ValueError("count and n must both be at least 2")
    severities = tuple(severities)
    tasks = [(i, seed, n, severities[i % len(severities)], probability, policy, oracle_config, significance, generator)
             for i in range(count)]
    exp = LinearExperiment(_pool_map(_linear_case, tasks, jobs))
    usable = exp.usable
    if oracle_config is None or not usable:
        return exp
    det = _log_errors([c.err_rel for c in usable])
    ora = _log_errors([c.oracle_err_rel for c in usable])
    exp.spearman = _correlate(spearman, det, ora, "spearman", exp.notes)
    exp.pearson = _correlate(pearson, det, ora, "pearson", exp.notes)
    exp.kappa_spearman = _correlate(spearman, [c.kappa for c in usable], ora, "kappa spearman", exp.notes)
    exp.agreement = float(np.mean(np.abs(det - ora) <= 2.0))
    return exp
