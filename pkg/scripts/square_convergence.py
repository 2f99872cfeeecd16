#!/usr/bin/env python3
"""Eigenvalue convergence study on the unit square.

Solves the uniform-density problem at a sequence of spacings and prints
the error against 2 pi^2 with the observed convergence order.
"""

import argparse
import math

import numpy as np

import membrane_opt as mo


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--levels", type=int, default=4,
                        help="number of refinements starting at h = 1/8")
    args = parser.parse_args()

    target = 2.0 * math.pi**2
    print(f"target 2 pi^2 = {target:.10f}")
    print(f"{'h':>8} {'mu':>14} {'error':>12} {'order':>7}")
    prev_err = None
    for level in range(args.levels):
        k = 8 * 2**level
        grid = mo.build_grid(mo.square_spec(1.0 / k))
        stiffness = mo.assemble_stiffness(grid)
        pair = mo.first_eigenpair(stiffness, np.ones(grid.node_count))
        err = abs(pair.eigenvalue - target)
        order = f"{math.log2(prev_err / err):.3f}" if prev_err else "-"
        print(f"   1/{k:<4} {pair.eigenvalue:14.8f} {err:12.3e} {order:>7}")
        prev_err = err


if __name__ == "__main__":
    main()
