#!/usr/bin/env python3
"""Temperature sweep on the radial-sine grid problem.

Runs single-stage solves over a list of temperatures and reports the
iteration counts, which scale roughly like 1/eta.  Writes traces and
plans as CSV next to the chosen output directory.
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from balanced_transport import GridSpec, generate_grid, run_single_stage
from balanced_transport.fileio import write_matrix_csv, write_trace_csv


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=64, help="grid size N (even); 256 reproduces the full-scale study")
    parser.add_argument("--etas", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4])
    parser.add_argument("--tol", type=float, default=1e-2)
    parser.add_argument("--max-iters", type=int, default=200_000)
    parser.add_argument("--out-dir", default="results/grid")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = generate_grid(GridSpec(args.size))
    print(f"grid {args.size} x {args.size}, tol {args.tol}")
    print(f"{'eta':>10} {'iterations':>12} {'criterion':>12} {'seconds':>9}")
    baseline = None
    for eta in args.etas:
        t0 = time.perf_counter()
        result = run_single_stage(problem, eta, args.tol, args.max_iters)
        wall = time.perf_counter() - t0
        tag = f"eta{eta:g}".replace("-", "m")
        write_trace_csv(result.trace, out_dir / f"trace_{tag}.csv")
        write_matrix_csv(result.plan.values, out_dir / f"plan_{tag}.csv")
        note = "" if result.converged else "  (budget exhausted)"
        print(f"{eta:>10g} {result.iterations:>12} {result.final_criterion:>12.4g} {wall:>9.2f}{note}")
        if baseline is None:
            baseline = result.iterations
        else:
            print(f"{'':>10} ratio vs first eta: {result.iterations / baseline:.2f}")
    print(f"outputs in {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
