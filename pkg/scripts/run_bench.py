#!/usr/bin/env python3
"""Time the benchmark corpus on both backends and write a CSV report.

Equivalent to ``nml bench`` with a default output path; progress goes to
stderr so the table on stdout can be redirected.
"""
from __future__ import annotations

import argparse
import sys

from nml.toplevel.bench import BENCHMARKS, BenchmarkFailure, run_benchmarks


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", metavar="NAME",
                    help="benchmarks to run (default: all of " + ", ".join(BENCHMARKS) + ")")
    ap.add_argument("--iterations", type=int, default=2)
    ap.add_argument("--csv", default="bench_results.csv")
    args = ap.parse_args(argv)
    unknown = sorted(set(args.names) - set(BENCHMARKS))
    if unknown:
        ap.error(f"unknown benchmark {unknown[0]!r}")
    try:
        report = run_benchmarks(args.names or None, args.iterations, args.csv,
                                progress=lambda line: print(line, file=sys.stderr, flush=True))
    except (ValueError, BenchmarkFailure) as e:
        print(f"run_bench: {e}", file=sys.stderr)
        return 1
    print(report.table())
    print(f"wrote {args.csv}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
