"""Trace the cancellation in cos(x) - 0.2 + 10 and compare with the 128-bit oracle."""

from __future__ import annotations

import argparse

from perturbe.dsl import eval_tracked
from perturbe.oracle import OracleConfig, ground_truth_error

PROGRAM = "cos(x) - 0.2 + 10"
X = "1.3694384060045659"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--x", default=X, help="input, read as decimal text")
    parser.add_argument("--bits", type=int, default=128, help="oracle precision")
    args = parser.parse_args(argv)

    config = OracleConfig(args.bits)
    for stage in ("cos(x)", "cos(x) - 0.2", PROGRAM):
        report = eval_tracked(stage, {"x": args.x})
        truth = ground_truth_error(stage, {"x": args.x}, config, report.res_original)
        print(f"{stage:<20} ori={report.res_original!r:<24} per={report.res_perturbed!r:<24} "
              f"det_err_ulp={report.err_ulp:<12.5g} oracle_err_ulp={truth.err_ulp:.5g}")
    for event in eval_tracked(PROGRAM, {"x": args.x}).events:
        print(f"  op {event.op_index} {event.op.value:<4} cond={event.condition.components()} "
              f"perturbed={event.perturbed_operand}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
