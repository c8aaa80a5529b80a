"""Detector versus oracle on generated near-singular systems; writes per-case CSV and a JSON summary."""

from __future__ import annotations

import argparse
import json
import time
from pathlib import Path

from perturbe.bench import DEFAULT_SEVERITIES, run_linear_experiment
from perturbe.oracle import OracleConfig


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=100)
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--severity", type=float, action="append", help="repeatable; default cycles 1..1e-3")
    parser.add_argument("--probability", type=float, default=1.0)
    parser.add_argument("--oracle-bits", type=int, default=128)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", type=Path, default=Path("results"))
    args = parser.parse_args(argv)

    start = time.perf_counter()
    exp = run_linear_experiment(
        args.count, args.n, seed=args.seed,
        severities=tuple(args.severity or DEFAULT_SEVERITIES),
        oracle_config=OracleConfig(args.oracle_bits),
        probability=args.probability, jobs=args.jobs,
    )
    summary = exp.summary() | {"wall_seconds": time.perf_counter() - start}
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "linear_cases.csv").write_text(exp.to_csv())
    (args.out / "linear_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
