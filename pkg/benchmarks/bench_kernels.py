"""Compare the numba and numpy prox backends.

Times the elementwise lp prox on vectors of several lengths with both
implementations, then one full ADMM solve per backend (each in a fresh
interpreter, since the backend is fixed at import time).

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from schatten_recovery import _kernels

SOLVE_SNIPPET = """
import json, time
from schatten_recovery import _kernels
from schatten_recovery.sensing import make_instance
from schatten_recovery.solver import SolverConfig, solve
inst = make_instance(30, 30, 6, 660, epsilon_A=0.05, seed=0)
solve(inst, SolverConfig(max_iters=5))  # warm up (JIT compile / cache load)
t0 = time.perf_counter()
res = solve(inst, SolverConfig())
print(json.dumps({"backend": _kernels.BACKEND, "seconds": time.perf_counter() - t0,
                  "iterations": res.iterations}))
"""


def time_kernels(repeat: int) -> list[dict]:
    rng = np.random.default_rng(0)
    rows = []
    _kernels.gst_numba(np.ones(4), 0.1, 0.5)  # compile outside the timing
    for size in (30, 1_000, 100_000):
        v = rng.standard_normal(size) * 3
        for p in (0.5, 1.0):
            number = max(1, 20_000 // size)
            t_jit = min(timeit.repeat(lambda: _kernels.gst_numba(v, 0.7, p), number=number,
                                      repeat=repeat)) / number
            t_np = min(timeit.repeat(lambda: _kernels.gst_numpy(v, 0.7, p), number=number,
                                     repeat=repeat)) / number
            diff = float(np.max(np.abs(_kernels.gst_numba(v, 0.7, p) - _kernels.gst_numpy(v, 0.7, p))))
            rows.append({"size": size, "p": p, "numba_s": t_jit, "numpy_s": t_np,
                         "speedup": t_np / t_jit, "max_abs_diff": diff})
    return rows


def time_solves() -> list[dict]:
    out = []
    for backend in ("numba", "numpy"):
        env = dict(os.environ, SCHATTEN_RECOVERY_BACKEND=backend)
        proc = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET], env=env, capture_output=True,
                              text=True, check=True)
        out.append(json.loads(proc.stdout.strip().splitlines()[-1]))
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    print(f"{'size':>7} {'p':>4} {'numba [s]':>11} {'numpy [s]':>11} {'speedup':>8} {'max diff':>9}")
    for row in time_kernels(args.repeat):
        print(f"{row['size']:>7} {row['p']:>4} {row['numba_s']:>11.3e} {row['numpy_s']:>11.3e} "
              f"{row['speedup']:>8.1f} {row['max_abs_diff']:>9.1e}")
    print()
    for row in time_solves():
        print(f"full solve, {row['backend']:<6}: {row['seconds']:.2f} s, {row['iterations']} iterations")
    return 0


if __name__ == "__main__":
    sys.exit(main())
