"""Benchmark the field-accumulation backends against each other.

Usage::

    python benchmarks/bench_field.py [--grid default|small] [--repeats N]

Reports best-of-N wall time per backend plus their maximum relative
disagreement (the reduction order is fixed, so the backends agree to
rounding noise but are not bit-identical to each other).
"""
import argparse
import time

import numpy as np

import cotf
from cotf._backend import HAVE_NUMBA

GRIDS = {
    "default": cotf.DEFAULT_GRID,
    "small": cotf.GridSpec(1.5, 1.5, 3.0, 0.25, 0.25, 0.25),
}


def time_backend(backend: str, grid, repeats: int) -> tuple:
    field = cotf.simulate_field(cotf.DEFAULT_APERTURE, grid, backend=backend)  # warm-up/JIT
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        field = cotf.simulate_field(cotf.DEFAULT_APERTURE, grid, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, field


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--grid", choices=sorted(GRIDS), default="default")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    grid = GRIDS[args.grid]
    print(f"grid {grid.shape} = {grid.node_count} nodes, "
          f"{cotf.DEFAULT_APERTURE.n_theta} x {cotf.DEFAULT_APERTURE.n_phi} quadrature")

    numpy_time, numpy_field = time_backend("numpy", grid, args.repeats)
    print(f"numpy : best of {args.repeats}  {numpy_time * 1e3:9.1f} ms")
    if not HAVE_NUMBA:
        print("numba : not installed; nothing to compare")
        return 0
    numba_time, numba_field = time_backend("numba", grid, args.repeats)
    print(f"numba : best of {args.repeats}  {numba_time * 1e3:9.1f} ms "
          f"({numpy_time / numba_time:.1f}x vs numpy)")

    scale = np.max(np.abs(numpy_field.samples))
    deviation = np.max(np.abs(numba_field.samples - numpy_field.samples)) / scale
    print(f"max relative disagreement: {deviation:.3e}")
    return 0 if deviation < 1e-12 else 1


if __name__ == "__main__":
    raise SystemExit(main())
