"""Head-to-head benchmark of the numba and numpy kernel lanes.

Runs the hot inner kernels at training-relevant shapes and prints a table of
per-call times plus the speedup of the numba lane.  Numba warm-up (JIT
compilation) happens before timing.

    python3 benchmarks/bench_kernels.py [--repeat 30]
"""

import argparse
import time

import numpy as np

from meaformer.numcore import kernels_numpy as lane_np

try:
    from meaformer.numcore import kernels_numba as lane_nb
except ImportError:
    lane_nb = None


CASES = []


def case(name):
    def wrap(fn):
        CASES.append((name, fn))
        return fn
    return wrap


rng = np.random.default_rng(0)
x_small = rng.standard_normal((8, 16, 16, 16)).astype(np.float32)
x_head = rng.standard_normal((8, 32, 32, 32)).astype(np.float32)
cols_head = rng.standard_normal((8, 32 * 16, 32 * 32)).astype(np.float32)
plane = rng.standard_normal((64, 64)).astype(np.float32)
xs = rng.uniform(0, 63, 4096).astype(np.float32)
ys = rng.uniform(0, 63, 4096).astype(np.float32)
gs = rng.standard_normal(4096).astype(np.float32)
yy, xx = np.mgrid[0:64, 0:64]
mask = ((xx - 30) ** 2 + (yy - 33) ** 2 <= 15 ** 2)
from meaformer.geometry import boundary_pixels  # noqa: E402
feature = boundary_pixels(mask)
up_in = rng.standard_normal((8, 32, 16, 16)).astype(np.float32)


@case("im2col 3x3 (8,16,16,16)")
def _(lane):
    lane.im2col(x_small, 3, 1, 1)


@case("im2col 4x4/s2 (8,32,32,32)")
def _(lane):
    lane.im2col(x_head, 4, 2, 1)


@case("col2im 4x4/s2 -> (8,32,65,65)")
def _(lane):
    lane.col2im(cols_head, 8, 32, 65, 65, 4, 2, 1)


@case("upsample2x (8,32,16,16)")
def _(lane):
    lane.upsample2x(up_in)


@case("plane_gather 4k pts")
def _(lane):
    lane.plane_gather(plane, xs, ys)


@case("plane_scatter_add 4k pts")
def _(lane):
    buf = np.zeros_like(plane)
    lane.plane_scatter_add(buf, xs, ys, gs)


@case("edt_sq 64x64")
def _(lane):
    lane.edt_sq(feature)


def bench(fn, lane, repeat):
    fn(lane)  # warm-up (JIT on the numba lane)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(lane)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=30)
    args = ap.parse_args()

    print(f"{'kernel':<32} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, fn in CASES:
        t_np = bench(fn, lane_np, args.repeat)
        if lane_nb is None:
            print(f"{name:<32} {t_np * 1e3:>8.3f}ms {'n/a':>10} {'':>8}")
            continue
        t_nb = bench(fn, lane_nb, args.repeat)
        print(f"{name:<32} {t_np * 1e3:>8.3f}ms {t_nb * 1e3:>8.3f}ms "
              f"{t_np / t_nb:>7.2f}x")


if __name__ == "__main__":
    main()
