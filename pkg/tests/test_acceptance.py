"""Acceptance gate: one PASS/FAIL line per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines print even
when output capture is on.
"""

from __future__ import annotations

import os
import subprocess
import sys
import time
import timeit
from pathlib import Path

import numpy as np
import pytest

from perturbe.bench import SweepSpec, corpus, run_linear_experiment, run_sweep
from perturbe.dsl import eval_tracked
from perturbe.linalg import solve
from perturbe.metrics import Trend, classify_significant
from perturbe.oracle import OracleConfig, ground_truth_error
from perturbe.ulp import ulp_distance

X = "1.3694384060045659"
PROGRAM = "cos(x) - 0.2 + 10"
ROOT = Path(__file__).resolve().parent.parent


def verdict(capsys, number: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def experiment():
    """100 near-singular systems at n = 200, mixed severities, oracle column on, one process."""
    start = time.perf_counter()
    exp = run_linear_experiment(100, 200, seed=2024, oracle_config=OracleConfig(128), jobs=1)
    return exp, time.perf_counter() - start


def test_criterion_1_illustrative_example(capsys):
    report = eval_tracked(PROGRAM, {"x": X})
    _, sub_ev, _ = report.events
    cos_val = eval_tracked("cos(x)", {"x": X}).res_original
    checks = {
        "cos within 1 ulp": ulp_distance(cos_val, 1.9999999999999993e-01, 1.9999999999999993e-01) <= 1,
        "sub condition within 0.1%": abs(sub_ev.condition.c_left / 2.4019e15 - 1) <= 1e-3,
        "sub injected on left": sub_ev.perturbed_operand == "left",
        "final err_ulp exactly 0": report.err_ulp == 0.0,
        "exactly one injection": report.injections == 1,
    }
    intermediate = eval_tracked("cos(x) - 0.2", {"x": X})
    checks["perturbed intermediate within 1 ulp"] = (
        ulp_distance(intermediate.res_perturbed, -1.1102230246251565e-16, -1.1102230246251565e-16) <= 1
    )
    checks["intermediate err_ulp within 1%"] = abs(intermediate.err_ulp / 2.2518e15 - 1) <= 1e-2
    runtime = min(timeit.repeat(lambda: eval_tracked(PROGRAM, {"x": X}), number=50, repeat=5)) / 50
    checks["runtime < 1 ms"] = runtime < 1e-3
    failed = [k for k, v in checks.items() if not v]
    detail = (f"cond={sub_ev.condition.c_left:.5g} per={intermediate.res_perturbed!r} "
              f"mid_err_ulp={intermediate.err_ulp:.5g} final_err_ulp={report.err_ulp} "
              f"injections={report.injections} runtime={runtime * 1e3:.3f}ms"
              + (f" failed={failed}" if failed else ""))
    verdict(capsys, 1, not failed, detail)


def test_criterion_2_oracle_reproduction(capsys):
    config = OracleConfig(128)
    mid = ground_truth_error("cos(x) - 0.2", {"x": X}, config, -8.326672684688674e-17)
    final = ground_truth_error(PROGRAM, {"x": X}, config, 10.0)
    ok = abs(mid.err_ulp / 1.0143e15 - 1) <= 1e-2 and abs(final.err_ulp / 3.9837e-02 - 1) <= 1e-2
    verdict(capsys, 2, ok, f"intermediate err_ulp={mid.err_ulp:.5g} final err_ulp={final.err_ulp:.5g}")


def test_criterion_3_two_by_two_system(capsys):
    a = [[1.0001, 1.0], [1.0, 1.0]]
    x1 = solve(a, [2.0001, 2.0])
    x2 = solve(a, [2.0, 2.0])
    ok = bool(np.all(np.abs(x1 - 1.0) < 1e-10) and abs(x2[0]) < 1e-10 and abs(x2[1] - 2.0) < 1e-10)
    verdict(capsys, 3, ok, f"b=(2.0001,2) -> {x1.tolist()}; b=(2,2) -> {x2.tolist()}")


def test_criterion_4_monotonicity(capsys):
    # the subtraction stage carries the significant error; the +10 absorbs it in the full program
    result = run_sweep("cos(x) - 0.2", SweepSpec(float(X), points_per_side=1000, stride_ulps=10))
    left, right = result.trends("err_rel", alpha=0.05)
    full_left, full_right = run_sweep(PROGRAM, SweepSpec(float(X))).trends("err_rel")
    ok = (left.direction is Trend.INCREASING and left.p_value < 0.05
          and right.direction is Trend.DECREASING and right.p_value < 0.05)
    verdict(capsys, 4, ok,
            f"cos(x)-0.2: left {left.direction.value} S={left.s} p={left.p_value:.3g}, "
            f"right {right.direction.value} S={right.s} p={right.p_value:.3g}; "
            f"full program (informational): left {full_left.direction.value}, right {full_right.direction.value}")


def test_criterion_5_correlation(capsys, experiment):
    exp, elapsed = experiment
    usable = len(exp.usable)
    ok = exp.spearman is not None and exp.spearman >= 0.7 and elapsed < 600
    verdict(capsys, 5, ok,
            f"spearman={exp.spearman:.4f} pearson={exp.pearson:.4f} kappa_spearman={exp.kappa_spearman:.4f} "
            f"usable={usable}/100 agreement_100x={exp.agreement:.2f} wall={elapsed:.1f}s")


def test_criterion_6_runtime_ordering(capsys, experiment):
    exp, _ = experiment
    plain, det, ora = exp.total("plain"), exp.total("detector"), exp.total("oracle")
    ok = ora >= 10 * det and det <= 5 * plain
    verdict(capsys, 6, ok,
            f"plain={plain:.2f}s detector={det:.2f}s oracle={ora:.2f}s "
            f"oracle/detector={ora / det:.1f}x detector/plain={det / plain:.2f}x")


def test_criterion_7_classification_suite(capsys):
    mismatches = []
    for case in corpus():
        detector = eval_tracked(case.program, case.bindings).significant
        oracle = ground_truth_error(case.program, case.bindings, OracleConfig(128)).significant()
        expected = case.expected.value == "Significant"
        if not (detector == oracle == expected):
            mismatches.append(case.name)
    boundary = classify_significant(7.47e-04, 0.001)
    ok = not mismatches and boundary is False
    verdict(capsys, 7, ok, f"cases={len(corpus())} mismatches={mismatches} boundary 7.47e-04 -> {boundary}")


def test_criterion_8_property_suites(capsys):
    env = dict(os.environ, HYPOTHESIS_PROFILE="ci")
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-m", "property", "-p", "no:cacheprovider",
         "--ignore", str(Path(__file__)), str(ROOT / "tests")],
        capture_output=True, text=True, cwd=ROOT, env=env,
    )
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
    verdict(capsys, 8, proc.returncode == 0, f"property suites at 1000 examples each: {summary}")
