#!/usr/bin/env python3
"""Compare one-step (U only) and two-step (U then L) refinement on manifold and fiber rates."""

import sys

from cspkit.harness import Experiment, check_table, run_sweep
from cspkit.manifold import GridSpec

GRID = GridSpec.uniform(0.5, 2.0, 33)


def main():
    print(f"{'experiment':<16} {'q':>2} {'two_step':>9} {'one_step':>9}")
    for name in ("manifold_error", "fiber_angle"):
        for q in (0, 1, 2):
            slopes = []
            for mode in ("two_step", "one_step"):
                table = run_sweep(Experiment(name, q=q, mode=mode, grid=GRID))
                flag = "" if check_table(table)[0] else "*"
                slopes.append(f"{table.slope:.3f}{flag}")
            print(f"{name:<16} {q:>2} {slopes[0]:>9} {slopes[1]:>9}")
    print("* outside the accepted band")
    return 0


if __name__ == "__main__":
    sys.exit(main())
