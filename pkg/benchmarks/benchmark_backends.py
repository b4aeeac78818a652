#!/usr/bin/env python3
"""Throughput comparison: compiled stepping kernel vs pure-Python fallback.

Both backends produce bit-identical trajectories (checked here on a small
run before timing); the difference is speed only.  Typical output on one
x86-64 core shows the compiled kernel around two orders of magnitude
faster on diffusive models, more on jump-heavy ones.

Usage: python benchmarks/benchmark_backends.py [--paths N] [--steps K]
"""

import argparse
import time

import numpy as np

from affinelab.models import preset
from affinelab.sde import (
    NoiseBundle,
    SchemeSettings,
    compiled_available,
    simulate,
    simulate_ensemble,
)


def check_equivalence(params, x0, settings):
    nb = NoiseBundle(7, 0)
    fast = simulate(params, x0, settings, nb, backend="compiled")
    slow = simulate(params, x0, settings, nb, backend="python")
    assert np.array_equal(fast.states, slow.states), "backends diverged"


def bench(params, x0, settings, n_paths, backend):
    t0 = time.perf_counter()
    simulate_ensemble(params, x0, settings, n_paths, 123, record_times=[settings.horizon],
                      backend=backend)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=256)
    args = ap.parse_args()
    if not compiled_available:
        raise SystemExit("compiled kernel not built; nothing to compare")

    h = 1.0 / args.steps
    cases = [
        ("cir", preset("cir"), 1e-3),
        ("stoch-vol", preset("stoch-vol"), 1e-3),
        ("anisotropic-root", preset("anisotropic-root"), 1e-2),
    ]
    print(f"{'model':<18}{'paths':>8}{'steps':>7}{'compiled':>12}{'python':>12}{'speedup':>9}")
    for name, pre, eps in cases:
        st = SchemeSettings(step=h, horizon=1.0, truncation=eps)
        check_equivalence(pre.params, pre.default_start, SchemeSettings(step=h, horizon=0.25, truncation=eps))
        t_fast = bench(pre.params, pre.default_start, st, args.paths, "compiled")
        # the fallback is slow; time a slice and scale
        slice_paths = max(args.paths // 20, 10)
        t_slow = bench(pre.params, pre.default_start, st, slice_paths, "python")
        t_slow_full = t_slow * args.paths / slice_paths
        print(
            f"{name:<18}{args.paths:>8}{args.steps:>7}"
            f"{t_fast:>11.3f}s{t_slow_full:>11.3f}s{t_slow_full / t_fast:>8.1f}x"
        )


if __name__ == "__main__":
    main()
