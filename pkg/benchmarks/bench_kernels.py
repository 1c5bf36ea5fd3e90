"""Benchmark: compiled kernels versus the pure-Python fallback.

Run as `python benchmarks/bench_kernels.py [--reps N]`.  Each row times one
hot kernel on a representative workload and reports the speedup; it also
re-asserts that both backends return bit-identical results on the workload
it just timed.
"""

import argparse
import time

import numpy as np

from returnstats.kernels import available_backends, get_backend
from returnstats.kernels.mapspec import (doubling_spec, logistic_spec,
                                         lsv_spec)

UA = np.array([0.5])
UB = np.array([1.0])
BALL_A = np.array([0.706])
BALL_B = np.array([0.708])


WORKLOADS = [
    ("orbit doubling 1e6 (lattice)",
     lambda k: k.sampling_orbit(doubling_spec(), 0.3111, 1_000_000)),
    ("orbit lsv(0.5) 1e6 (pow)",
     lambda k: k.sampling_orbit(lsv_spec(0.5), 0.3111, 1_000_000)),
    ("orbit logistic(4) 1e6",
     lambda k: k.sampling_orbit(logistic_spec(4.0), 0.3111, 1_000_000)),
    ("return gaps doubling ball, 2e4 samples",
     lambda k: k.collect_return_gaps(doubling_spec(), BALL_A, BALL_B,
                                     0.3111, 10_000, 20_000, 10 ** 9)),
    ("kac gaps doubling half-domain, 1e6 entries",
     lambda k: k.collect_return_gaps(doubling_spec(), UA, UB, 0.3111,
                                     10_000, 1_000_000, 10 ** 9)),
    ("birkhoff lsv(0.5) 2e6 points, 256 bins",
     lambda k: k.birkhoff_counts(lsv_spec(0.5), 0.3111, 2_000_000,
                                 10_000, 256)),
    ("visit windows doubling, 1e4 x 1024",
     lambda k: k.visit_window_counts(doubling_spec(), BALL_A, BALL_B,
                                     0.3111, 10_000, 1024, 10_000)),
]


def _as_tuple(result):
    if isinstance(result, tuple):
        return result
    return (result,)


def run(reps):
    names = available_backends()
    if "compiled" not in names:
        print("compiled backend not available; nothing to compare")
        return
    pure = get_backend("pure")
    comp = get_backend("compiled")
    width = max(len(n) for n, _ in WORKLOADS)
    print(f"{'workload':<{width}}  {'pure':>9}  {'compiled':>9}  "
          f"{'speedup':>8}  identical")
    for name, fn in WORKLOADS:
        t_pure = min(_timed(fn, pure) for _ in range(reps))
        t_comp = min(_timed(fn, comp) for _ in range(reps))
        rp = _as_tuple(fn(pure))
        rc = _as_tuple(fn(comp))
        same = all(np.array_equal(a, b) for a, b in zip(rp, rc))
        print(f"{name:<{width}}  {t_pure:>8.3f}s  {t_comp:>8.3f}s  "
              f"{t_pure / t_comp:>7.1f}x  {same}")


def _timed(fn, backend):
    t0 = time.perf_counter()
    fn(backend)
    return time.perf_counter() - t0


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=1,
                    help="timing repetitions (min is reported)")
    run(ap.parse_args().reps)
