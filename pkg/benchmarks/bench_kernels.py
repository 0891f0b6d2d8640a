"""Compare the numba and pure-numpy kernel backends.

The backend is fixed when facetqp is imported, so each backend runs in its
own subprocess with FACETQP_KERNELS set accordingly.

    python3 benchmarks/bench_kernels.py --nx 400 --ny 25 --repeat 5
"""

import argparse
from dataclasses import replace
import json
import os
import subprocess
import sys
import time

import numpy as np

BACKENDS = ("numba", "numpy")


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def worker(nx, ny, repeat):
    from facetqp import _kernels
    from facetqp.problems import journal_bearing
    from facetqp.solvers import SolverConfig, solve

    prob, box = journal_bearing(nx, ny)
    A = prob.A
    x = np.cos(np.arange(A.n, dtype=float))
    indptr, indices, data = A.lower_with_diagonal()
    L, _ = _kernels.ic0_factor(indptr, indices, data)
    cfg = SolverConfig.for_method("mppcg", face_mode="approx", inner_kind="ic0")

    # first calls compile the numba kernels; keep them out of the timings
    _kernels.csr_matvec(A.indptr, A.indices, A.data, x)
    _kernels.lower_transpose_solve(indptr, indices, L, _kernels.lower_solve(indptr, indices, L, x))
    solve(prob, box, cfg=SolverConfig(max_iter=3))
    solve(prob, box, cfg=replace(cfg, max_iter=3))

    timings = {
        "spmv": _best(lambda: _kernels.csr_matvec(A.indptr, A.indices, A.data, x), repeat),
        "ic0_factor": _best(lambda: _kernels.ic0_factor(indptr, indices, data), repeat),
        "tri_solves": _best(lambda: _kernels.lower_transpose_solve(
            indptr, indices, L, _kernels.lower_solve(indptr, indices, L, x)), repeat),
        "solve_mppcg_approx_ic0": _best(lambda: solve(prob, box, cfg=cfg), max(1, repeat // 5)),
    }
    return {"backend": _kernels.BACKEND, "n": A.n, "timings": timings}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nx", type=int, default=400)
    p.add_argument("--ny", type=int, default=25)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)

    if args.worker:
        print(json.dumps(worker(args.nx, args.ny, args.repeat)))
        return 0

    results = {}
    for backend in BACKENDS:
        env = dict(os.environ, FACETQP_KERNELS=backend)
        cmd = [sys.executable, __file__, "--worker", "--nx", str(args.nx), "--ny", str(args.ny),
               "--repeat", str(args.repeat)]
        out = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        res = json.loads(out.stdout.strip().splitlines()[-1])
        results[res["backend"]] = res

    n = results["numba"]["n"]
    print(f"journal bearing {args.nx}x{args.ny} (n = {n}), best of {args.repeat}")
    print(f"{'kernel':<26}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, t_numba in results["numba"]["timings"].items():
        t_numpy = results["numpy"]["timings"][name]
        print(f"{name:<26}{t_numba:>12.5f}{t_numpy:>12.5f}{t_numpy / t_numba:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
