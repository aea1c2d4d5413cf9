"""Benchmark the numba kernels against the pure-numpy fallback.

Times the hot oracle kernels in isolation and a full desk-scale run under
each backend.

Usage:
    python benchmarks/bench_backends.py [--m 2000] [--d 50] [--batch 100]
"""

import argparse
import time

import numpy as np

from inertialprox import (DelayModel, RunConfig, Schedule, backends,
                          generate_phase_retrieval, run_sequential)


def timeit(fn, repeat):
    fn()  # warm (JIT compile / cache load)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_kernels(m, d, batch, repeat=2000):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((m, d))
    x = rng.standard_normal(d)
    bsq = (A @ (0.7 * x)) ** 2
    idx = rng.choice(m, size=batch, replace=False).astype(np.int64)
    cases = [
        ("pr_batch_subgrad", lambda: backends.pr_batch_subgrad_numpy(A, bsq, x, idx),
         lambda: backends.pr_batch_subgrad_numba(A, bsq, x, idx)),
        ("smooth_batch_grad", lambda: backends.smooth_batch_grad_numpy(A, bsq, x, idx),
         lambda: backends.smooth_batch_grad_numba(A, bsq, x, idx)),
        ("pr_objective", lambda: backends.pr_objective_numpy(A, bsq, x),
         lambda: backends.pr_objective_numba(A, bsq, x)),
        ("measure", lambda: backends.measure_numpy(A, x),
         lambda: backends.measure_numba(A, x)),
    ]
    print(f"kernels on m={m}, d={d}, batch={batch} ({repeat} reps)")
    print(f"{'kernel':<20} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    for name, f_np, f_nb in cases:
        t_np = timeit(f_np, repeat) * 1e6
        t_nb = timeit(f_nb, repeat) * 1e6
        print(f"{name:<20} {t_np:>10.2f} {t_nb:>10.2f} {t_np / t_nb:>8.2f}x")


def bench_run(m, d, batch, epochs=20):
    K = epochs * (m // batch)
    cfg = RunConfig(
        schedule=Schedule("diminishing_sqrt", alpha=1e-3, beta=2.0,
                          beta_cap=0.9, epoch_based=True),
        delay=DelayModel.none(), batch_size=batch, total_iters=K, seed=0)
    print(f"\nfull sequential run: K={K} iterations")
    original = backends.get_backend()
    try:
        for choice in ("numpy", "numba"):
            backends.set_backend(choice)
            inst = generate_phase_retrieval(m, d, seed=7)
            run_sequential(cfg, inst)  # warm
            t0 = time.perf_counter()
            trace = run_sequential(cfg, inst)
            dt = time.perf_counter() - t0
            print(f"  {choice:<6} {dt * 1e3:8.1f} ms  "
                  f"({dt / K * 1e6:.1f} us/iter, final objective {trace.final_objective():.4g})")
    finally:
        backends.set_backend(original)


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--m", type=int, default=2000)
    p.add_argument("--d", type=int, default=50)
    p.add_argument("--batch", type=int, default=100)
    args = p.parse_args()
    if not backends.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    bench_kernels(args.m, args.d, args.batch)
    bench_run(args.m, args.d, args.batch)
