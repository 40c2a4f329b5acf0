#!/usr/bin/env python3
"""Stagnation study on the 3x3 example.

Tracks how closely a single-stage run passes by the three row-balanced
matrices on which plain IPFP would cycle, and confirms the cycling by
starting IPFP from each of them.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from balanced_transport import (
    ipfp_matrix,
    small_example,
    small_example_solution,
    small_example_stagnation_matrices,
    trajectory_study,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eta", type=float, default=1e-3)
    parser.add_argument("--tol", type=float, default=1e-2)
    args = parser.parse_args()

    problem = small_example()
    targets = small_example_stagnation_matrices()
    visits, result = trajectory_study(problem, targets, args.eta, args.tol)

    print(f"single-stage run at eta={args.eta:g}: {result.iterations} iterations")
    print(f"{'waypoint':>9} {'min distance':>14} {'at iteration':>13}")
    for v in visits:
        print(f"{v.target_index + 1:>9} {v.min_distance:>14.4g} {v.at_iteration:>13}")
    final_err = float(np.max(np.abs(result.plan.values - small_example_solution())))
    print(f"final plan max deviation from the known optimum: {final_err:.4g}")

    print("\nIPFP started from each waypoint:")
    for k, target in enumerate(targets):
        out = ipfp_matrix(target, problem.row_marginals, problem.col_marginals, max_iters=10_000)
        print(f"  waypoint {k + 1}: {out.status} after {out.iterations} iterations")
    feasible = ipfp_matrix(
        small_example_solution(), problem.row_marginals, problem.col_marginals, max_iters=10_000
    )
    print(f"  known optimum: {feasible.status} after {feasible.iterations} iterations")
    return 0


if __name__ == "__main__":
    sys.exit(main())
