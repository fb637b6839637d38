#!/usr/bin/env python3
"""Benchmark the implicit flow-step kernels: compiled extension vs pure numpy.

Runs the same batch of backward-Euler Newton steps through every available
backend and reports wall time per step plus the max deviation between
backends.  Usage: python benchmarks/bench_flow.py [--n 2000] [--steps 200]
"""

import argparse
import time

import numpy as np

import fdrates._kernels as K
import fdrates.numerics as N


def make_problem(n, d=5, R=15.0, m=0.9, D=1.0):
    grid = N.build_grid(R, n, d)
    r = grid.nodes
    Vm1 = D + r**2
    V = Vm1 ** (1.0 / (m - 1.0))
    w = N.cell_volumes(grid)
    g, h = N.face_geometry(grid)
    x = 0.08 * np.exp(-(r**2)) + 0.01 * np.exp(-((r - 2.0) ** 2))
    return x, V, Vm1, w, g, h, m


def run(step, x, V, Vm1, w, g, h, m, dt, steps):
    t0 = time.perf_counter()
    for _ in range(steps):
        x, _ = step(x, V, Vm1, w, g, h, m, dt)
        if x is None:
            raise RuntimeError("Newton failure in benchmark")
    return time.perf_counter() - t0, x


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000, help="grid cells")
    ap.add_argument("--steps", type=int, default=200, help="implicit steps")
    ap.add_argument("--dt", type=float, default=2e-4)
    args = ap.parse_args()

    prob = make_problem(args.n)
    backends = K.available_backends()
    print(f"grid cells: {args.n}, steps: {args.steps}, dt: {args.dt}")
    print(f"available backends: {', '.join(backends)} (active: {K.BACKEND})")

    finals = {}
    for name in backends:
        step = K.get_kernel(name)
        # warm up once, then time
        run(step, *prob, args.dt, 3)
        elapsed, xf = run(step, *prob, args.dt, args.steps)
        finals[name] = xf
        print(f"{name:>9}: {elapsed:8.3f} s total, "
              f"{1e3 * elapsed / args.steps:8.4f} ms/step")

    if len(finals) == 2:
        dev = float(np.max(np.abs(finals["pure"] - finals["compiled"])))
        print(f"max |pure - compiled| after {args.steps} steps: {dev:.3e}")


if __name__ == "__main__":
    main()
