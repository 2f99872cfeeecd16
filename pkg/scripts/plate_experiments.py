#!/usr/bin/env python3
"""Clamped-plate (order 4) experiments.

Three parts: eigenvalue self-convergence of the uniform plate on the unit
square, a composite plate run with its free-boundary partition, and an
optional coarse four-dimensional run.
"""

import argparse
import time
import warnings

import numpy as np

import membrane_opt as mo


def self_convergence() -> None:
    print("uniform clamped plate, unit square (continuum value ~1294.934)")
    mus = {}
    settings = {8: (1e-12, 1e-10), 16: (1e-12, 2e-10), 32: (3e-11, 1e-8)}
    for k, (cg, eig) in settings.items():
        grid = mo.build_grid(mo.square_spec(1.0 / k))
        stiffness = mo.assemble_stiffness(grid, mo.OperatorSpec(order=4))
        pair = mo.first_eigenpair(
            stiffness, np.ones(grid.node_count),
            mo.SolverOptions(cg_rel_tol=cg, eig_rel_tol=eig, max_iterations=4000))
        mus[k] = pair.eigenvalue
        print(f"  h = 1/{k:<3} mu = {pair.eigenvalue:.6f}")
    d1 = abs(mus[16] - mus[8])
    d2 = abs(mus[32] - mus[16])
    print(f"  successive changes {d1:.3f}, {d2:.3f}; ratio {d1 / d2:.2f}")


def composite_plate() -> None:
    grid = mo.build_grid(mo.square_spec(1.0 / 16))
    spec = mo.ProblemSpec(grid=grid, rho_min=0.25, rho_max=4.0,
                          mass=mo.domain_volume(grid), order=4, exponent=4)
    density, pair, partition, trace = mo.minimize(
        spec, opts=mo.SolverOptions(cg_rel_tol=1e-12, eig_rel_tol=1e-9,
                                    max_iterations=4000))
    signs = int(np.count_nonzero(pair.vector < 0.0))
    print(f"composite plate 1/16: status {trace.status}, mu = "
          f"{pair.eigenvalue:.6f}, monotone = {trace.is_monotone()}, "
          f"low region = {partition.low_count} nodes, "
          f"eigenfunction sign changes at {signs} nodes")


def four_dimensional() -> None:
    start = time.time()
    grid = mo.build_grid(mo.square_spec(1.0 / 10, dimension=4))
    spec = mo.ProblemSpec(grid=grid, rho_min=0.5, rho_max=2.0,
                          mass=mo.domain_volume(grid), order=4, exponent=4)
    density, pair, partition, trace = mo.minimize(
        spec, opts=mo.SolverOptions(cg_rel_tol=1e-12, eig_rel_tol=1e-8,
                                    max_iterations=4000))
    print(f"4d plate ({grid.node_count} nodes): status {trace.status}, "
          f"mu = {pair.eigenvalue:.4f}, {time.time() - start:.1f}s")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--with-4d", action="store_true",
                        help="also run the coarse four-dimensional case")
    args = parser.parse_args()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        self_convergence()
        composite_plate()
        if args.with_4d:
            four_dimensional()


if __name__ == "__main__":
    main()
