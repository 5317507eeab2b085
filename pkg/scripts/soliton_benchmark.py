#!/usr/bin/env python3
"""Benchmark the constrained solver against the closed-form sech family.

For the 1D energy (1/2) int u'^2 - (1/4) int u^4 on |u|_2^2 = c the minimizer
is A sech(kx) with k = c/4, A^2 = 2k^2, multiplier -k^2 and energy -(2/3)k^3.
Prints one row per mass level with the solver's relative errors.

Usage: python scripts/soliton_benchmark.py [--nodes 4096] [--levels 1,2,4,8]
"""

import argparse
import math
import time

import numpy as np

from massmin import (
    Field,
    SolveConfig,
    line_grid,
    make_constraint,
    make_lagrangian,
    make_nonlinearity,
    make_problem,
    minimize_constrained,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=4096)
    ap.add_argument("--extent", type=float, default=40.0)
    ap.add_argument("--levels", default="1,2,4,8")
    args = ap.parse_args()

    grid = line_grid(args.extent, args.nodes)
    problem = make_problem(
        "stuart",
        grid,
        make_lagrangian("j_quadratic"),
        make_constraint("G_square"),
        make_nonlinearity("F_power", A=0.25, d=0.0, alpha=2.0),
    )
    cfg = SolveConfig(max_iters=300000, grad_tol=1e-4, stall_tol=1e-15, symmetrize_every=200, seed=1)

    print(f"{'c':>6} {'m (solver)':>14} {'m (exact)':>14} {'rel err':>9} "
          f"{'beta err':>9} {'L2 dist':>9} {'iters':>7} {'secs':>6}")
    for c in (float(v) for v in args.levels.split(",")):
        k = c / 4.0
        m_exact = -(2.0 / 3.0) * k**3
        beta_exact = -(k**2)
        t0 = time.time()
        res = minimize_constrained(problem, c, cfg)
        dt = time.time() - t0
        x = grid.axis(0)
        exact = math.sqrt(2.0) * k / np.cosh(k * x)
        dist = math.sqrt(float(np.dot(grid.weights(), (res.minimizer.component(0) - exact) ** 2)))
        print(
            f"{c:6.2f} {res.m_value:14.8f} {m_exact:14.8f} "
            f"{abs(res.m_value - m_exact) / abs(m_exact):9.2e} "
            f"{abs(res.beta - beta_exact) / abs(beta_exact):9.2e} "
            f"{dist:9.2e} {res.iterations:7d} {dt:6.1f}"
        )


if __name__ == "__main__":
    main()
