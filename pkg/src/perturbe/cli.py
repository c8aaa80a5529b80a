"""Command-line front end.

Exit status: 0 when nothing significant was found, 10 when something was,
64 for usage errors, 65 for unparsable programs or data, 66 for unreadable
files and 70 when evaluation fails.  Every flag can also be set through an
environment variable ``PERTURBE_<FLAG>`` (dashes become underscores).
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import bench
from .bench import CSV_HEADER, SweepSpec, corpus, format_float, run_linear_experiment, run_sweep
from .dsl import eval_tracked, parse
from .errors import BindingError, EvaluationError, ParseError, SingularMatrixError
from .linalg import TrackedArith, lu_decompose, lu_solve, parse_matrix, read_vector
from .metrics import DEFAULT_SIGNIFICANCE
from .oracle import OracleConfig, ground_truth_error
from .shadow import DEFAULT_THRESHOLD, PerturbationPolicy

EXIT_OK = 0
EXIT_SIGNIFICANT = 10
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_NOINPUT = 66
EXIT_EVAL = 70

ENV_PREFIX = "PERTURBE_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    threshold: float = DEFAULT_THRESHOLD
    significance: float = DEFAULT_SIGNIFICANCE
    mode: str = "one-ulp"
    cyclic_offsets: tuple[int, ...] = (-1, 1, -2, 2, -3, 3)
    oracle_bits: int = 128
    output: str = "text"
    jobs: int = 1
    seed: int = 0
    verbose: bool = False

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        return cls(args.threshold, args.significance, args.mode, tuple(args.cyclic_offsets),
                   args.oracle_bits, args.output, args.jobs, args.seed, args.verbose)

    def policy(self) -> PerturbationPolicy:
        return PerturbationPolicy(threshold=self.threshold, mode=self.mode, cyclic_offsets=self.cyclic_offsets)

    def oracle(self) -> OracleConfig:
        return OracleConfig(significand_bits=self.oracle_bits)


# --- argument types ------------------------------------------------------------

def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_bindings(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise UsageError(f"binding {item!r} is not of the form name=value")
        out[name.strip()] = value.strip()
    return out


def _load_program(args) -> str:
    if args.file:
        if args.program:
            # with --file the first positional is really a binding
            if "=" not in args.program or not hasattr(args, "bindings"):
                raise UsageError("give either an inline program or --file, not both")
            args.bindings.insert(0, args.program)
            args.program = None
        with open(args.file, encoding="utf-8") as fh:
            return fh.read()
    if not args.program:
        raise UsageError("no program given")
    return args.program


def _load_matrix(spec: str) -> np.ndarray:
    if spec.startswith("@"):
        with open(spec[1:], encoding="utf-8") as fh:
            return parse_matrix(fh.read())
    try:
        rows = ast.literal_eval(spec)
    except (ValueError, SyntaxError):
        raise UsageError(f"cannot read matrix {spec!r}") from None
    a = np.array(rows, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise UsageError(f"matrix must be square, got shape {a.shape}")
    return a


def _load_vector(spec: str) -> np.ndarray:
    if spec.startswith("@"):
        return read_vector(spec[1:])
    return np.array(_float_list(spec.strip("[]() ")), dtype=np.float64)


# --- rendering -----------------------------------------------------------------

def _dumps(obj) -> str:
    # json writes floats with repr, the shortest round-trip form
    return json.dumps(obj, sort_keys=False)


def _text_value(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def _print_kv(pairs, out) -> None:
    width = max(len(k) for k, _ in pairs)
    for k, v in pairs:
        print(f"{k.ljust(width)}  {_text_value(v)}", file=out)


def _print_events(report, out) -> None:
    for e in report.events:
        cond = ", ".join(format_float(c) for c in e.condition.components())
        ops = ", ".join(format_float(x) for x in e.operands)
        mark = f"perturbed {e.perturbed_operand} by {e.offset} ulp" if e.injected else "no injection"
        print(f"  #{e.op_index} {e.op.value}({ops}) condition [{cond}] {mark}", file=out)


def _csv_row(case: str, inputs: str, r, kappa=None, oracle_err_rel=None) -> list[str]:
    return [case, inputs, format_float(r.res_original), format_float(r.res_perturbed),
            format_float(r.err_abs), format_float(r.err_rel), format_float(r.err_ulp),
            str(r.significant).lower(), str(r.injections), format_float(kappa), format_float(oracle_err_rel)]


def _write_csv(rows, out, header=CSV_HEADER) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


# --- commands ------------------------------------------------------------------

def cmd_eval(args, cfg: RunConfig, out) -> int:
    source = _load_program(args)
    bindings = _parse_bindings(args.bindings)
    report = eval_tracked(source, bindings, cfg.policy(), cfg.significance)
    if cfg.output == "json":
        print(_dumps(report.to_dict()), file=out)
    elif cfg.output == "csv":
        inputs = " ".join(f"{k}={v}" for k, v in bindings.items())
        _write_csv([_csv_row("eval", inputs, report)], out)
    else:
        d = report.to_dict(with_events=False)
        _print_kv([(k, v) for k, v in d.items() if v is not None], out)
        if cfg.verbose:
            print("trace:", file=out)
            _print_events(report, out)
    return EXIT_SIGNIFICANT if report.significant else EXIT_OK


def _trend_record(t) -> dict:
    return {"direction": t.direction.value, "s": t.s, "z": t.z, "p_value": t.p_value, "n": t.n}


def cmd_sweep(args, cfg: RunConfig, out) -> int:
    source = _load_program(args)
    params = parse(source).parameters
    if len(params) != 1:
        raise UsageError(f"sweep needs a univariate program, got parameters {params}")
    spec = SweepSpec(args.center, args.points, args.stride_ulps, args.ulp_format)
    result = run_sweep(source, spec, cfg.policy(), cfg.significance, jobs=cfg.jobs)
    left, right = result.trends(args.metric)
    any_sig = any(p.report is not None and p.report.significant for p in result.points)
    if cfg.output == "json":
        points = [{"k": p.k, "input": p.input, "skipped": p.skipped, "error": p.error,
                   "report": p.report.to_dict(with_events=cfg.verbose) if p.report else None}
                  for p in result.points]
        print(_dumps({"program": source, "metric": args.metric, "points": points,
                      "trend": {"left": _trend_record(left), "right": _trend_record(right)}}), file=out)
    else:
        rows = []
        for p in result.points:
            if p.report is not None:
                rows.append(_csv_row(f"k={p.k}", format_float(p.input), p.report))
            else:
                reason = "skipped" if p.skipped else f"error: {p.error}"
                rows.append([f"k={p.k}", format_float(p.input), reason] + [""] * (len(CSV_HEADER) - 3))
        _write_csv(rows, out)
        for side, t in (("left", left), ("right", right)):
            print(f"# trend {side} {args.metric}: {t.direction.value} S={t.s} z={format_float(t.z)} "
                  f"p={format_float(t.p_value)} n={t.n}", file=out)
    return EXIT_SIGNIFICANT if any_sig else EXIT_OK


def _solve_single(args, cfg: RunConfig, out) -> int:
    a = _load_matrix(args.matrix)
    if args.b is None:
        raise UsageError("--matrix needs --b")
    b = _load_vector(args.b)
    if b.shape != (a.shape[0],):
        raise UsageError(f"--b has {b.size} values, matrix has {a.shape[0]} rows")
    arith = TrackedArith(cfg.policy())
    lanes = lu_solve(lu_decompose(a, arith), b)
    x0, x1 = lanes[0], lanes[1]
    norm0 = float(np.max(np.abs(x0)))
    diff = float(np.max(np.abs(x0 - x1)))
    err_rel = diff / norm0 if norm0 else (0.0 if diff == 0 else math.inf)
    significant = err_rel >= cfg.significance
    record = {"x": x0.tolist(), "x_perturbed": x1.tolist(), "err_abs": diff, "err_rel": err_rel,
              "significant": significant, "injections": arith.injections}
    if cfg.output == "json":
        print(_dumps(record), file=out)
    elif cfg.output == "csv":
        _write_csv([["x"] + [format_float(v) for v in x0]], out, header=["field"] + [f"x{i}" for i in range(x0.size)])
    else:
        print("x " + " ".join(format_float(v) for v in x0), file=out)
        _print_kv([(k, record[k]) for k in ("err_abs", "err_rel", "significant", "injections")], out)
    return EXIT_SIGNIFICANT if significant else EXIT_OK


def cmd_solve(args, cfg: RunConfig, out) -> int:
    if args.matrix is not None:
        return _solve_single(args, cfg, out)
    severities = args.severity or list(bench.DEFAULT_SEVERITIES)
    exp = run_linear_experiment(
        args.count, args.n, cfg.seed, severities, cfg.policy(),
        cfg.oracle() if args.validate else None, args.probability, cfg.significance, jobs=cfg.jobs,
    )
    summary = exp.summary()
    if not args.timing:
        for key in ("time_plain", "time_detector", "time_oracle"):
            summary.pop(key)
    if cfg.output == "json":
        print(_dumps({"cases": [c.__dict__ for c in exp.cases], "summary": summary}), file=out)
    else:
        out.write(exp.to_csv())
        for k, v in summary.items():
            if k != "notes":
                print(f"# {k}: {_text_value(v)}", file=out)
        for note in summary["notes"]:
            print(f"# note: {note}", file=out)
    return EXIT_SIGNIFICANT if summary["significant"] else EXIT_OK


def cmd_validate(args, cfg: RunConfig, out) -> int:
    source = _load_program(args)
    bindings = _parse_bindings(args.bindings)
    report = eval_tracked(source, bindings, cfg.policy(), cfg.significance)
    truth = ground_truth_error(source, bindings, cfg.oracle(), report.res_original)
    oracle_sig = truth.significant(cfg.significance)
    record = {
        "detector": {"err_abs": report.err_abs, "err_rel": report.err_rel, "err_ulp": report.err_ulp,
                     "significant": report.significant, "injections": report.injections},
        "oracle": {"value": str(truth.value), "err_abs": truth.err_abs, "err_rel": truth.err_rel,
                   "err_ulp": truth.err_ulp, "significant": oracle_sig},
        "agree": report.significant == oracle_sig,
    }
    if cfg.output == "json":
        print(_dumps(record), file=out)
    elif cfg.output == "csv":
        header = ("source", "err_abs", "err_rel", "err_ulp", "significant")
        rows = [[src] + [_text_value(record[src][k]) for k in header[1:]] for src in ("detector", "oracle")]
        _write_csv(rows, out, header=header)
    else:
        pairs = [(f"{src}.{k}", v) for src in ("detector", "oracle") for k, v in record[src].items()]
        _print_kv(pairs + [("agree", record["agree"])], out)
        if cfg.verbose:
            print("trace:", file=out)
            _print_events(report, out)
    return EXIT_SIGNIFICANT if report.significant else EXIT_OK


def cmd_corpus(args, cfg: RunConfig, out) -> int:
    """Run every corpus case; exit 65 if any detector verdict disagrees with its expectation."""
    policy, oracle = cfg.policy(), cfg.oracle()
    rows, records, mismatches = [], [], 0
    for case in corpus():
        report = eval_tracked(case.program, case.bindings, policy, cfg.significance)
        oracle_err = ground_truth_error(case.program, case.bindings, oracle).err_rel if args.validate else case.oracle_err_rel
        verdict = "Significant" if report.significant else "NonSignificant"
        match = verdict == case.expected.value
        mismatches += not match
        inputs = " ".join(f"{k}={v}" for k, v in case.bindings.items())
        rows.append(_csv_row(case.name, inputs, report, oracle_err_rel=oracle_err))
        records.append({"name": case.name, "region": case.region, "program": case.program,
                        "bindings": case.bindings, "expected": case.expected.value, "detector": verdict,
                        "match": match, "oracle_err_rel": oracle_err, "report": report.to_dict(cfg.verbose)})
    if cfg.output == "json":
        print(_dumps(records), file=out)
    elif cfg.output == "csv":
        _write_csv(rows, out)
    else:
        width = max(len(r["name"]) for r in records)
        for r in records:
            flag = "ok" if r["match"] else "MISMATCH"
            print(f"{r['name'].ljust(width)}  {r['detector']:<14}  expected {r['expected']:<14}  {flag}", file=out)
    return EXIT_DATA if mismatches else EXIT_OK


# --- parser --------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("detector")
    g.add_argument("--threshold", type=_positive_float, default=DEFAULT_THRESHOLD,
                   help="condition number above which an operand is perturbed (default 1e5)")
    g.add_argument("--significance", type=_positive_float, default=DEFAULT_SIGNIFICANCE,
                   help="relative error at or above which a result is significant (default 0.001)")
    g.add_argument("--mode", choices=("one-ulp", "cyclic"), default="one-ulp")
    g.add_argument("--cyclic-offsets", type=_int_list, default=[-1, 1, -2, 2, -3, 3],
                   help="ULP offsets used in cyclic mode, comma-separated")
    g.add_argument("--oracle-bits", type=int, default=128, help="oracle significand bits")
    g.add_argument("--output", choices=("json", "csv", "text"), default="text")
    g.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-v", "--verbose", action="store_true", help="include the trace log")


def _program_args(p: argparse.ArgumentParser, bindings: bool = True) -> None:
    p.add_argument("program", nargs="?", help="inline program text")
    p.add_argument("-f", "--file", help="read the program from a file")
    if bindings:
        p.add_argument("bindings", nargs="*", metavar="name=value")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="perturbe", description="Perturbation-based floating-point error detection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="run a program under the detector")
    _program_args(p)
    _common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="sweep a univariate program around an input")
    _program_args(p, bindings=False)
    p.add_argument("--center", type=float, required=True)
    p.add_argument("--points", type=_positive_int, default=1000, help="points per side")
    p.add_argument("--stride-ulps", type=_positive_int, default=10)
    p.add_argument("--ulp-format", choices=("binary64", "binary32"), default="binary64")
    p.add_argument("--metric", choices=("err_rel", "err_ulp", "err_abs"), default="err_rel",
                   help="error column used for the trend test")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("solve", help="solve one system, or run the near-singular experiment")
    p.add_argument("--matrix", help="inline matrix such as [[1.0001,1],[1,1]], or @file")
    p.add_argument("--b", help="right-hand side such as 2.0001,2, or @file")
    p.add_argument("--n", type=_positive_int, default=200, help="dimension for generated systems")
    p.add_argument("--count", type=_positive_int, default=100)
    p.add_argument("--severity", type=_positive_float, action="append",
                   help="noise severity in (0, 1]; repeat for a mix")
    p.add_argument("--probability", type=float, default=1.0, help="chance a generated matrix is damaged")
    p.add_argument("--validate", action="store_true", help="add the oracle column and correlations")
    p.add_argument("--timing", action="store_true", help="report wall-clock totals")
    _common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="compare detector and oracle on one evaluation")
    _program_args(p)
    _common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("corpus", help="classify every built-in case")
    p.add_argument("--validate", action="store_true", help="recompute oracle errors instead of the stored ones")
    _common(p)
    p.set_defaults(func=cmd_corpus)
    return parser


def _env_value(action: argparse.Action, text: str):
    if isinstance(action, argparse._StoreTrueAction):
        return text.strip().lower() in ("1", "true", "yes", "on")
    value = action.type(text) if action.type else text
    if isinstance(action, argparse._AppendAction):
        return [value]
    if action.choices is not None and value not in action.choices:
        raise UsageError(f"{ENV_PREFIX}{action.dest.upper()}={text!r} is not one of {list(action.choices)}")
    return value


def apply_env(parser: argparse.ArgumentParser, environ=None) -> None:
    """Replace flag defaults with ``PERTURBE_*`` environment values."""
    environ = os.environ if environ is None else environ
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                apply_env(sub, environ)
            continue
        if not action.option_strings or action.dest in ("help",):
            continue
        key = ENV_PREFIX + action.dest.upper()
        if key in environ:
            try:
                action.default = _env_value(action, environ[key])
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"bad value for {key}: {exc}") from None


def main(argv=None, out=None, environ=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        apply_env(parser, environ)
        args = parser.parse_args(argv)
        if getattr(args, "severity", None) and not all(0 < s <= 1 for s in args.severity):
            raise UsageError("--severity must lie in (0, 1]")
        cfg = RunConfig.from_args(args)
        return args.func(args, cfg, out)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"perturbe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, BindingError) as exc:
        print(f"perturbe: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"perturbe: error: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    except (EvaluationError, SingularMatrixError) as exc:
        print(f"perturbe: evaluation failed: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except ValueError as exc:
        print(f"perturbe: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
