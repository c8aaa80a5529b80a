"""Sweep a univariate program around a center and report Mann-Kendall trends per side."""

from __future__ import annotations

import argparse
import sys

from perturbe.bench import SweepSpec, format_float, run_sweep


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("program", nargs="?", default="cos(x) - 0.2")
    parser.add_argument("--center", type=float, default=1.3694384060045659)
    parser.add_argument("--points", type=int, default=1000, help="points per side")
    parser.add_argument("--stride-ulps", type=int, default=10)
    parser.add_argument("--metric", choices=("err_rel", "err_ulp", "err_abs"), default="err_rel")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--csv", action="store_true", help="also print every point")
    args = parser.parse_args(argv)

    result = run_sweep(args.program, SweepSpec(args.center, args.points, args.stride_ulps), jobs=args.jobs)
    if args.csv:
        print("k,input,metric")
        for p in result.points:
            print(f"{p.k},{format_float(p.input)},{format_float(p.metric(args.metric))}")
    for side, trend in zip(("left", "right"), result.trends(args.metric)):
        print(f"{side}: {trend.direction.value} S={trend.s} z={trend.z:.3f} p={trend.p_value:.3g} n={trend.n}",
              file=sys.stderr if args.csv else sys.stdout)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
