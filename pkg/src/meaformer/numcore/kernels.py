"""Kernel lane dispatch.

MEAF_KERNELS selects the lane at import time:

  auto   (default) numba if importable, else numpy
  numba  require the @njit lane
  numpy  force the pure-numpy lane

Both lanes implement identical contracts; `benchmarks/bench_kernels.py`
compares them head to head.
"""

import os

_requested = os.environ.get("MEAF_KERNELS", "auto").lower()

if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(f"MEAF_KERNELS must be auto|numba|numpy, got {_requested!r}")

if _requested == "numpy":
    from . import kernels_numpy as _impl
else:
    try:
        from . import kernels_numba as _impl
    except ImportError:
        if _requested == "numba":
            raise
        from . import kernels_numpy as _impl

LANE = _impl.LANE

conv_out_size = _impl.conv_out_size
im2col = _impl.im2col
col2im = _impl.col2im
upsample2x = _impl.upsample2x
upsample2x_adj = _impl.upsample2x_adj
plane_gather = _impl.plane_gather
plane_scatter_add = _impl.plane_scatter_add
plane_coord_grad = _impl.plane_coord_grad
edt_sq = _impl.edt_sq
planes_gather = _impl.planes_gather
planes_scatter_add = _impl.planes_scatter_add
planes_coord_grad = _impl.planes_coord_grad
