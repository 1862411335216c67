"""Timing comparison of the compiled kernels against the interpreted
fallback (TWINSYNC_DISABLE_NUMBA=1).

Run from the repository root:

    python benchmarks/bench_kernels.py [--reps N]
"""
import argparse
import os
import statistics
import time

import numpy as np


def _fresh_modules():
    # the kernel cache is process-global; flipping the env var between
    # sections is enough because selection happens per call
    from twinsync._kernels import get_kernels
    from twinsync.config import load_config
    from twinsync.twin import Scenario, run_arch1, run_arch2, run_arch3
    return get_kernels, load_config, Scenario, (run_arch1, run_arch2, run_arch3)


def bench_pipeline(reps):
    get_kernels, load_config, Scenario, archs = _fresh_modules()

    def once(seed):
        sc = Scenario.from_config(load_config(), seed=seed)
        sc.identify()
        for fn in archs:
            fn(sc)

    once(0)  # warm-up: JIT compilation and config caches
    times = []
    for i in range(reps):
        t0 = time.perf_counter()
        once(i + 1)
        times.append(time.perf_counter() - t0)
    return times


def bench_physical_loop(reps):
    get_kernels, load_config, Scenario, _ = _fresh_modules()
    from twinsync.plant import BallBeamParams
    from twinsync.control import DEFAULT_LOCAL_GAINS as g

    K = get_kernels()
    p = BallBeamParams()
    n = 5000
    r_ref = np.ones(n)
    zeros = np.zeros(n)

    def once():
        K.physical_loop(r_ref, zeros, zeros, 0.01, 10,
                        p.m, p.R_ball, p.J, p.g, p.d, p.L, p.tau_servo,
                        g.kp, g.ki, g.kd, g.deriv_filter_n, g.u_min, g.u_max,
                        0.0, 0.0, 0.0, 1000.0)

    once()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        once()
        times.append(time.perf_counter() - t0)
    return times


def report(label, times):
    print(f"  {label:<28} best {min(times) * 1e3:8.1f} ms   "
          f"mean {statistics.mean(times) * 1e3:8.1f} ms")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()

    results = {}
    for flag, label in (("0", "numba"), ("1", "pure python")):
        os.environ["TWINSYNC_DISABLE_NUMBA"] = flag
        print(f"[{label}]")
        pl = bench_physical_loop(args.reps)
        report("physical loop, 50 s run", pl)
        pipe = bench_pipeline(args.reps)
        report("full pipeline, one seed", pipe)
        results[label] = (min(pl), min(pipe))

    loop_ratio = results["pure python"][0] / results["numba"][0]
    pipe_ratio = results["pure python"][1] / results["numba"][1]
    print(f"\nspeedup (best-of-{args.reps}): "
          f"physical loop x{loop_ratio:.1f}, pipeline x{pipe_ratio:.1f}")


if __name__ == "__main__":
    main()
