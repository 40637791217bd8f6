"""Binary-mask utilities: boundaries, components, distance maps, contours.

The boundary of a mask is the set of foreground pixels with at least one
background 4-neighbor; pixels beyond the image edge count as background.
"""

import numpy as np
from scipy import ndimage as _ndi

from ..errors import EmptyMaskError
from ..numcore import kernels as K

_EIGHT = np.ones((3, 3), dtype=bool)


def boundary_pixels(mask):
    """Boolean plane marking boundary pixels of `mask`."""
    m = mask.astype(bool)
    interior = np.zeros_like(m)
    interior[1:-1, 1:-1] = (m[:-2, 1:-1] & m[2:, 1:-1] & m[1:-1, :-2] & m[1:-1, 2:])
    return m & ~interior


def largest_component(mask):
    """Largest 8-connected foreground component, as a boolean plane."""
    m = mask.astype(bool)
    if not m.any():
        raise EmptyMaskError("mask has no foreground")
    labels, n = _ndi.label(m, structure=_EIGHT)
    if n == 1:
        return m
    counts = np.bincount(labels.reshape(-1))
    counts[0] = 0
    return labels == counts.argmax()


def boundary_distance_map(mask):
    """Exact Euclidean distance from every pixel to the mask boundary set.

    Zero exactly on boundary pixels, positive elsewhere (inside and outside).
    """
    m = np.asarray(mask).astype(bool)
    if not m.any():
        raise EmptyMaskError("cannot build a distance map for an empty mask")
    return np.sqrt(K.edt_sq(boundary_pixels(m)))


def mask_contour(mask):
    """Closed boundary polygon of the largest component, as (P,2) float (x,y).

    Moore-neighbor tracing, clockwise, starting from the topmost-leftmost
    boundary pixel.  A single-pixel mask yields a single-point contour.
    """
    comp = largest_component(mask)
    ys, xs = np.nonzero(comp)
    start = (ys[0], xs[0])  # topmost row, leftmost column within it
    h, w = comp.shape

    def fg(y, x):
        return 0 <= y < h and 0 <= x < w and comp[y, x]

    # neighbor ring, clockwise starting east
    ring = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]
    contour = [start]
    prev_dir = 4  # pretend we entered moving west so the scan starts north
    cur = start
    for _ in range(4 * comp.sum() + 8):
        found = False
        for k in range(8):
            d = (prev_dir + 5 + k) % 8  # backtrack + 1, clockwise
            ny, nx = cur[0] + ring[d][0], cur[1] + ring[d][1]
            if fg(ny, nx):
                cur = (ny, nx)
                prev_dir = d
                found = True
                break
        if not found:
            break  # isolated pixel
        if cur == start:
            break
        contour.append(cur)
    return np.array([(x, y) for y, x in contour], dtype=float)
