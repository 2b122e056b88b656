#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the per-iteration force evaluation, neighbor-pair queries, the
segment intersection counter, and rasterization on a medium fiber system.

    python3 benchmarks/bench_kernels.py --size 64 --repeat 5
"""

import argparse
import time

import numpy as np


def build_system(size):
    import fiberpack as fp
    from fiberpack.generation import chain_length_for, fiber_count_for_volume_fraction
    from fiberpack.geometry import RngState

    w = fp.Window.cube(float(size))
    l = chain_length_for(40.0, 2.0)
    n = fiber_count_for_volume_fraction(0.2, w, l, 2.0)
    cfg = fp.GenerationConfig(n_fibers=n, chain_length=l, radius=2.0,
                              beta=1.0, kappa1=10.0, kappa2=100.0,
                              prepack_trials=5)
    return fp.generate(cfg, w, RngState(42))


def timeit(fn, repeat):
    fn()                      # warm-up (JIT compile on the numba path)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=float, default=64.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    from fiberpack.grid import build_grid
    from fiberpack.kernels import get_backend

    sys = build_system(args.size)
    g = build_grid(sys.x, sys.window, sys.r)
    empty = np.empty(0, dtype=np.int64)
    force_args = (sys.x, sys.fiber_id, sys.chain_idx, sys.ref_angle, sys.l,
                  sys.window.arr, g.cell_counts, g.order, g.cell_start,
                  g.cells, sys.r, 0.0, 0.05, 0.1, 0.5, 0.0, 0.0, 5,
                  empty, empty)
    pair_args = (sys.x, sys.window.arr, g.cell_counts, g.order, g.cell_start,
                 g.cells, 2 * sys.r + 0.5)

    rng = np.random.default_rng(0)
    m = 400
    centers = rng.uniform(0, 1, (m, 3)) * sys.window.arr
    axes = rng.normal(size=(m, 3))
    axes /= np.linalg.norm(axes, axis=1)[:, None]
    dims = tuple(int(e) for e in sys.window.arr)

    cases = {
        "total_forces": lambda be: be.total_forces(*force_args),
        "pairs_within": lambda be: be.pairs_within(*pair_args),
        "segment_counts": lambda be: be.segment_pair_counts(
            centers, axes, 10.0, sys.window.arr, 4.0),
        "rasterize": lambda be: be.rasterize_balls(sys.x, sys.r, 1.0, dims),
    }

    print(f"system: {sys.n_fibers} fibers, {sys.n_balls} balls, "
          f"window {args.size:.0f}^3")
    print(f"{'kernel':16s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    backends = {}
    for name in ("numpy", "numba"):
        try:
            backends[name] = get_backend(name)
        except ImportError:
            print(f"backend {name} unavailable")
    for label, fn in cases.items():
        row = {}
        for name, be in backends.items():
            row[name] = timeit(lambda: fn(be), args.repeat)
        if len(row) == 2:
            print(f"{label:16s} {row['numpy']*1e3:10.2f}ms {row['numba']*1e3:10.2f}ms "
                  f"{row['numpy']/row['numba']:8.1f}x")
        else:
            only = next(iter(row))
            print(f"{label:16s} {only}: {row[only]*1e3:.2f}ms")


if __name__ == "__main__":
    main()
