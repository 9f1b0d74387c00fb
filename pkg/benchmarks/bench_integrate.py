"""Compare the compiled and pure-Python DOPRI5 kernels.

Usage::

    python3 benchmarks/bench_integrate.py [--t-end 2000] [--repeat 3]

Reports wall time per trajectory, accepted steps per second and the speed-up,
and checks that both kernels produce the same trajectory bit for bit.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from latchvdp.integrate import BACKEND, SolverOptions, integrate
from latchvdp.model import TABLE1, symmetric_equilibrium


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t-end", type=float, default=2000.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if BACKEND != "compiled":
        print("compiled kernel not available; rebuild with `pip install -e . --no-build-isolation`")
        return 1
    s0 = symmetric_equilibrium(TABLE1) + np.array([0.0, 0.0, 1.5, 0.0])
    opts = SolverOptions(t_end=args.t_end, events=("max_x1", "max_x2"))
    rows = {}
    for backend in ("compiled", "python"):
        dt, traj = best_of(lambda b=backend: integrate(s0, TABLE1, opts, backend=b), args.repeat)
        rows[backend] = (dt, traj)
        steps = traj.times.size - 1
        print(f"{backend:9s} {dt * 1e3:9.2f} ms  {steps:6d} steps  {steps / dt:12.0f} steps/s")
    (tc, a), (tp, b) = rows["compiled"], rows["python"]
    same = np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)
    print(f"speed-up  {tp / tc:9.1f}x   identical output: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())
