"""Benchmark the hot kernels under both backends.

Runs the same workload twice in subprocesses, once with COREG_BACKEND=numba
and once with COREG_BACKEND=numpy, and prints a timing table.  The numba
timings exclude compilation (each kernel is warmed first).

    python3 benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys
import time


def workload():
    import numpy as np

    import coreg
    from coreg import _kernels
    from coreg.scenarios import MicrogridParams, run_microgrid

    rng = np.random.default_rng(0)
    a8 = rng.standard_normal((8, 8))
    b8 = rng.standard_normal((8, 3))
    sylv_a = rng.standard_normal((4, 4)) - 3.0 * np.eye(4)
    sylv_s = np.array([[0.0, -1.3], [1.3, 0.0]])
    sylv_p = rng.standard_normal((4, 2))
    params = MicrogridParams.table1()
    sc = coreg.example_4_1()
    design = coreg.assemble_zoh(sc.plants, sc.exo, sc.graph, sc.h,
                                mu=sc.mu, k1=list(sc.k1))
    cert = coreg.certify_zoh(design, sc.plants, sc.exo, sc.graph)
    x0, eta0, w0 = coreg.random_initial_conditions(sc, 0)

    def bench(fn, repeat):
        fn()  # warm (includes jit compile on the numba backend)
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn()
        return (time.perf_counter() - t0) / repeat

    results = {
        "expm 8x8": bench(lambda: _kernels.expm(a8), 2000),
        "eigenvalues 8x8": bench(
            lambda: _kernels.eig_qr(a8, 800, 1e-15), 2000),
        "lu_solve 8x8": bench(lambda: _kernels.lu_solve(a8, b8), 2000),
        "sylvester 4x4/2x2": bench(
            lambda: coreg.solve_sylvester(sylv_a, sylv_s, sylv_p), 300),
        "certify example41": bench(
            lambda: coreg.certify_zoh(design, sc.plants, sc.exo, sc.graph),
            20),
        "simulate example41 T=30": bench(
            lambda: coreg.simulate(sc.plants, sc.exo, design, sc.graph,
                                   x0, eta0, w0, T=30.0, substeps=1,
                                   certificate=cert), 5),
        "microgrid 200k steps": bench(
            lambda: run_microgrid(params, T=2000.0), 3),
    }
    print(json.dumps({"backend": coreg.ACTIVE_BACKEND, "results": results}))


def main():
    here = os.path.abspath(__file__)
    rows = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, COREG_BACKEND=backend)
        proc = subprocess.run([sys.executable, here, "--worker"],
                              env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            raise SystemExit(f"worker failed for backend {backend}")
        payload = json.loads(proc.stdout.strip().splitlines()[-1])
        rows[backend] = payload["results"]

    names = list(rows["numba"])
    width = max(len(n) for n in names)
    print(f"{'kernel workload'.ljust(width)}   numba (s)    numpy (s)   speedup")
    for name in names:
        tb = rows["numba"][name]
        tp = rows["numpy"][name]
        print(f"{name.ljust(width)}  {tb:10.3e}  {tp:10.3e}  {tp / tb:7.1f}x")


if __name__ == "__main__":
    if "--worker" in sys.argv:
        workload()
    else:
        main()
