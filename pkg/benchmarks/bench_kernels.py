#!/usr/bin/env python3
"""Benchmark the compiled velocity kernel against the pure-Python fallback.

Runs the proximal-gradient velocity solve on a batch of random dual vectors
for several problem sizes and reports per-call timings plus the speedup.  The
fallback is selected with RISOPT_PURE_PYTHON=1 at import time, so the
comparison runs both implementations in this process by importing the modules
directly.

Usage:  python benchmarks/bench_kernels.py [--sizes 4 16 64] [--batch 200]
"""

import argparse
import time

import numpy as np

from risopt import DissipationParams, build_spaces
from risopt.kernels import _fallback

try:
    from risopt.kernels import _core
except ImportError:
    _core = None


def bench_impl(impl, spaces, params, batch, rng):
    step = 1.0 / (params.eps * float(np.max(spaces.mass))
                  + params.delta * spaces.stiffness_norm)
    ws = 2.0 * rng.standard_normal((batch, spaces.n)) * spaces.diss_weights
    om = np.array(spaces.diss_weights)
    m = np.array(spaces.mass)
    a = np.array(spaces.stiffness)
    # warm-up
    impl.velocity_prox_grad(ws[0], om, m, a, params.eps, params.delta, step,
                            1e-11, 100_000)
    start = time.perf_counter()
    total_iters = 0
    for w in ws:
        _, iters, _ = impl.velocity_prox_grad(w, om, m, a, params.eps,
                                              params.delta, step, 1e-11,
                                              100_000)
        total_iters += iters
    elapsed = time.perf_counter() - start
    return elapsed / batch, total_iters / batch


def check_agreement(spaces, params, rng):
    step = 1.0 / (params.eps * float(np.max(spaces.mass))
                  + params.delta * spaces.stiffness_norm)
    worst = 0.0
    for _ in range(20):
        w = 2.0 * rng.standard_normal(spaces.n) * spaces.diss_weights
        args = (w, np.array(spaces.diss_weights), np.array(spaces.mass),
                np.array(spaces.stiffness), params.eps, params.delta, step,
                1e-12, 100_000)
        v_c, _, _ = _core.velocity_prox_grad(*args)
        v_p, _, _ = _fallback.velocity_prox_grad(*args)
        worst = max(worst, float(np.max(np.abs(np.asarray(v_c) - v_p))))
    return worst


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 16, 64])
    ap.add_argument("--batch", type=int, default=200)
    ap.add_argument("--eps", type=float, default=1e-2)
    ap.add_argument("--delta", type=float, default=1e-3)
    args = ap.parse_args()

    if _core is None:
        print("compiled kernel not available; only timing the fallback")
    params = DissipationParams(eps=args.eps, delta=args.delta)
    rng = np.random.default_rng(0)

    print(f"{'n':>5} {'compiled us':>12} {'fallback us':>12} "
          f"{'speedup':>8} {'iters':>7}")
    for n in args.sizes:
        sp = build_spaces(n)
        t_py, it_py = bench_impl(_fallback, sp, params, args.batch, rng)
        if _core is not None:
            t_c, _ = bench_impl(_core, sp, params, args.batch, rng)
            gap = check_agreement(sp, params, rng)
            print(f"{n:>5} {1e6 * t_c:>12.1f} {1e6 * t_py:>12.1f} "
                  f"{t_py / t_c:>7.1f}x {it_py:>7.0f}  (max |dv| {gap:.1e})")
        else:
            print(f"{n:>5} {'-':>12} {1e6 * t_py:>12.1f} {'-':>8} {it_py:>7.0f}")


if __name__ == "__main__":
    main()
