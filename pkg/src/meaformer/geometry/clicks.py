"""Click guidance channels.

A click inside the lesion becomes two planes: a Gaussian spot (sigma 3 px,
peak 1 at the click pixel) and a normalized distance field (Euclidean
distance from the click over the image diagonal, so values lie in [0, 1]).
"""

import numpy as np

from ..errors import ContractViolation
from .heatmaps import make_gt_heatmap

CLICK_SIGMA = 3.0


def click_channels(click, shape, sigma=CLICK_SIGMA, dtype=np.float32):
    h, w = shape
    x, y = float(click[0]), float(click[1])
    if not (0 <= x <= w - 1 and 0 <= y <= h - 1):
        raise ContractViolation(f"click {click} outside a {w}x{h} image")
    spot = make_gt_heatmap((x, y), sigma=sigma, shape=shape, dtype=dtype)
    ys = np.arange(h, dtype=np.float64)[:, None] - y
    xs = np.arange(w, dtype=np.float64)[None, :] - x
    diag = np.hypot(w - 1, h - 1)
    dist = (np.sqrt(xs * xs + ys * ys) / diag).astype(dtype)
    return spot, dist
