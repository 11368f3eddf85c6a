"""Compare the numba-compiled kernels with their numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py``.  The per-kernel table
times both implementations in this process; the end-to-end row runs a short
search twice in subprocesses, once with ``GINARCP_DISABLE_NUMBA=1``.
Composite kernels such as ``fit_multistart`` still call compiled helpers
when timed through ``py_func``, so the end-to-end row is the fair
whole-program comparison.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from ginarcp import _kernels as K
from ginarcp import sim
from ginarcp._accel import USE_NUMBA, python_impl
from ginarcp.estimate import EPS_BOX


def fallback(fn):
    """The implementation used when numba is disabled."""
    return getattr(fn, "numpy_impl", None) or python_impl(fn)


def best_of(fn, args, repeat):
    fn(*args)  # compile / warm up
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(n):
    x = sim.simulate_mcp(sim.get_scenario("mcp-biinar-3").build(n), np.random.default_rng(0)).astype(float)
    p = 3
    Z, y = K.lag_design(x, p, n, p)
    theta = np.array([0.2, 0.1, 0.1, 1.0])
    starts = K.make_starts(x[p:], float(y.mean()), p, EPS_BOX, np.full(21, 1 / 21), 0.5, True)
    rng = np.random.default_rng(1)
    parent = K.scan_random(n, rng.random(n), rng.integers(0, 21, n), 10 / n, K.MIN_SPAN)
    return [
        ("qll_eval", K.qll_eval, (Z, y, theta)),
        ("sandwich", K.sandwich, (Z, y, theta)),
        ("fit_multistart", K.fit_multistart, (Z, y, starts, EPS_BOX, 50.0, 200, 1e-8)),
        ("autocov+levinson", lambda s: K.levinson(K.autocov(s, 20), 20), (x,)),
        ("scan_mutate", K.scan_mutate,
         (parent, rng.random(n), rng.integers(0, 21, n), 0.3, 0.3, 0.5, K.MIN_SPAN)),
    ]


SEARCH_SNIPPET = """
import time, numpy as np
from ginarcp import sim
from ginarcp.search import GaConfig, run_auto_pginarm_sa
x = sim.simulate_mcp(sim.get_scenario("mcp-biinar-1").build(500), np.random.default_rng(0))
cfg = GaConfig(n_islands=2, subpop_size=20, max_generations=10, seed=0)
run_auto_pginarm_sa(x, cfg.replace(max_generations=1))
t0 = time.perf_counter()
r = run_auto_pginarm_sa(x, cfg)
print(time.perf_counter() - t0, r.score.total)
"""


def end_to_end(disable):
    env = dict(os.environ, GINARCP_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", SEARCH_SNIPPET], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    return float(out[0]), float(out[1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000, help="series length for kernel inputs")
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-search", action="store_true", help="omit the end-to-end search timing")
    args = ap.parse_args(argv)
    if not USE_NUMBA:
        print("numba disabled in this process; both columns time the fallback")
    print(f"{'kernel':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}")
    for name, fn, fargs in kernel_cases(args.n):
        slow = fallback(fn) if hasattr(fn, "py_func") or hasattr(fn, "numpy_impl") else fn
        a = best_of(fn, fargs, args.repeat)
        b = best_of(slow, fargs, max(1, args.repeat // 4))
        print(f"{name:<18}{a * 1e3:>12.3f}{b * 1e3:>12.3f}{b / a:>10.1f}")
    if not args.skip_search:
        ta, sa = end_to_end(False)
        tb, sb = end_to_end(True)
        print(f"{'search (10 gens)':<18}{ta * 1e3:>12.1f}{tb * 1e3:>12.1f}{tb / ta:>10.1f}")
        print(f"final MDL numba={sa:.6f} numpy={sb:.6f}")


if __name__ == "__main__":
    main()
