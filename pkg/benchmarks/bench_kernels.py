"""Time the hot kernels with numba and with the plain numpy fallback.

Each backend runs in its own interpreter because the switch is read at import
time (``MCFLAB_DISABLE_NUMBA``).  Usage::

    python benchmarks/bench_kernels.py [--repeat 3] [--steps 2000]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
import mcflab
from mcflab.evolver import BoundarySpec, EvolutionState, RadialGrid, RadialOperator, SchemeConfig, evolve, step_implicit
from mcflab.profiles import integrate_phi

repeat, steps = int(sys.argv[1]), int(sys.argv[2])

def best(fn):
    fn()  # warm-up (includes compilation)
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)

grid = RadialGrid(60.0, 600)
r = grid.r
u0 = r * r / 2 - np.log1p(r)
bc = BoundarySpec.constant(float(u0[-1]))
sc = SchemeConfig(cfl=0.25)
T = steps * sc.cfl * grid.h ** 2

def explicit():
    evolve(EvolutionState(grid, u0), bc, T, sc, 2)

def implicit():
    st = EvolutionState(grid, u0)
    op = RadialOperator(grid, 2)
    for _ in range(20):
        st = step_implicit(st, bc, 0.01, 2, op=op)

def ode():
    integrate_phi(2, 1.0, 0.0, 50.0, 1e-10)

res = {"backend": mcflab.backend(), "explicit": best(explicit), "implicit": best(implicit), "ode": best(ode)}
print(json.dumps(res))
"""


def run_backend(disable: bool, repeat: int, steps: int) -> dict:
    env = dict(os.environ)
    if disable:
        env["MCFLAB_DISABLE_NUMBA"] = "1"
    else:
        env.pop("MCFLAB_DISABLE_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeat), str(steps)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=2000, help="explicit steps on a 601-node grid")
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    fast = run_backend(False, args.repeat, args.steps)
    slow = run_backend(True, args.repeat, args.steps)
    print(f"{'kernel':<10}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for key in ("explicit", "implicit", "ode"):
        a, b = fast[key], slow[key]
        print(f"{key:<10}{a:12.4f}{b:12.4f}{b / a:10.1f}")
    print(f"backends: {fast['backend']} / {slow['backend']}  (wall {time.perf_counter() - t0:.1f} s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
