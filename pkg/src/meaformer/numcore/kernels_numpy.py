"""Pure-numpy kernel lane.

Reference implementations of the memory-bound inner kernels.  The numba lane
(`kernels_numba`) implements the same contracts with @njit loops; which lane
is active is decided by `meaformer.numcore.kernels` from the MEAF_KERNELS
environment variable.  Matrix products themselves always go through BLAS and
are not part of the lane contract.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided
from scipy import ndimage as _ndi

LANE = "numpy"


def conv_out_size(size: int, ks: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - ks) // stride + 1


def im2col(x, ks, stride, pad):
    """(N,C,H,W) -> (N, C*ks*ks, Ho*Wo) patch matrix."""
    n, c, h, w = x.shape
    ho = conv_out_size(h, ks, stride, pad)
    wo = conv_out_size(w, ks, stride, pad)
    if pad:
        xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
        xp[:, :, pad:pad + h, pad:pad + w] = x
    else:
        xp = np.ascontiguousarray(x)
    s0, s1, s2, s3 = xp.strides
    win = as_strided(xp, (n, c, ks, ks, ho, wo),
                     (s0, s1, s2, s3, s2 * stride, s3 * stride))
    return win.reshape(n, c * ks * ks, ho * wo)


def col2im(cols, n, c, h, w, ks, stride, pad):
    """Adjoint of im2col: scatter-add patches back to (N,C,H,W)."""
    ho = conv_out_size(h, ks, stride, pad)
    wo = conv_out_size(w, ks, stride, pad)
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    c6 = cols.reshape(n, c, ks, ks, ho, wo)
    for kh in range(ks):
        he = kh + stride * ho
        for kw in range(ks):
            xp[:, :, kh:he:stride, kw:kw + stride * wo:stride] += c6[:, :, kh, kw]
    if pad:
        return xp[:, :, pad:pad + h, pad:pad + w].copy()
    return xp


def _up_lastaxis(x):
    # out[..., 2j] = 0.75 x[j] + 0.25 x[j-1]; out[..., 2j+1] = 0.75 x[j] + 0.25 x[j+1]
    # (edges clamp).  Half-pixel-centred bilinear x2.
    left = np.concatenate([x[..., :1], x[..., :-1]], axis=-1)
    right = np.concatenate([x[..., 1:], x[..., -1:]], axis=-1)
    out = np.empty(x.shape[:-1] + (2 * x.shape[-1],), dtype=x.dtype)
    out[..., 0::2] = 0.75 * x + 0.25 * left
    out[..., 1::2] = 0.75 * x + 0.25 * right
    return out


def _up_adj_lastaxis(g):
    ge, go = g[..., 0::2], g[..., 1::2]
    out = 0.75 * (ge + go)
    out[..., :1] += 0.25 * ge[..., :1]
    out[..., :-1] += 0.25 * ge[..., 1:]
    out[..., -1:] += 0.25 * go[..., -1:]
    out[..., 1:] += 0.25 * go[..., :-1]
    return out


def upsample2x(x):
    """Bilinear 2x upsample of (N,C,h,w)."""
    rows = _up_lastaxis(x.swapaxes(2, 3)).swapaxes(2, 3)
    return _up_lastaxis(rows)


def upsample2x_adj(g):
    """Adjoint of upsample2x: (N,C,2h,2w) -> (N,C,h,w)."""
    gw = _up_adj_lastaxis(g)
    return _up_adj_lastaxis(gw.swapaxes(2, 3)).swapaxes(2, 3)


def _corner_setup(xs, ys, h, w):
    xc = np.clip(xs, 0.0, w - 1.0)
    yc = np.clip(ys, 0.0, h - 1.0)
    if w > 1:
        x0 = np.minimum(np.floor(xc), w - 2).astype(np.int64)
    else:
        x0 = np.zeros_like(xc, dtype=np.int64)
    if h > 1:
        y0 = np.minimum(np.floor(yc), h - 2).astype(np.int64)
    else:
        y0 = np.zeros_like(yc, dtype=np.int64)
    return xc, yc, x0, y0, xc - x0, yc - y0


def plane_gather(plane, xs, ys):
    """Bilinear sample of a (H,W) plane at continuous (x,y) points.

    Coordinates clamp to the image; x is the column index, y the row.
    """
    h, w = plane.shape
    _, _, x0, y0, fx, fy = _corner_setup(xs, ys, h, w)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    p00 = plane[y0, x0]
    p01 = plane[y0, x1]
    p10 = plane[y1, x0]
    p11 = plane[y1, x1]
    return ((1 - fy) * ((1 - fx) * p00 + fx * p01)
            + fy * ((1 - fx) * p10 + fx * p11))


def plane_scatter_add(gplane, xs, ys, g):
    """Adjoint of plane_gather w.r.t. the plane; accumulates into gplane."""
    h, w = gplane.shape
    _, _, x0, y0, fx, fy = _corner_setup(xs, ys, h, w)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    np.add.at(gplane, (y0, x0), g * (1 - fx) * (1 - fy))
    np.add.at(gplane, (y0, x1), g * fx * (1 - fy))
    np.add.at(gplane, (y1, x0), g * (1 - fx) * fy)
    np.add.at(gplane, (y1, x1), g * fx * fy)


def plane_coord_grad(plane, xs, ys, g):
    """Gradient of plane_gather w.r.t. the sample coordinates.

    Zero where the coordinate was clamped (at or beyond the image edge).
    """
    h, w = plane.shape
    _, _, x0, y0, fx, fy = _corner_setup(xs, ys, h, w)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    p00 = plane[y0, x0]
    p01 = plane[y0, x1]
    p10 = plane[y1, x0]
    p11 = plane[y1, x1]
    dvx = (1 - fy) * (p01 - p00) + fy * (p11 - p10)
    dvy = (1 - fx) * (p10 - p00) + fx * (p11 - p01)
    inside_x = (xs > 0.0) & (xs < w - 1.0)
    inside_y = (ys > 0.0) & (ys < h - 1.0)
    return g * dvx * inside_x, g * dvy * inside_y


def edt_sq(feature):
    """Exact squared Euclidean distance to the nearest True pixel.

    The numpy lane delegates to scipy's exact transform; the numba lane runs
    the two-pass lower-envelope algorithm.  Both agree because squared pixel
    distances are integer-valued.
    """
    if not feature.any():
        raise ValueError("edt_sq: feature set is empty")
    d = _ndi.distance_transform_edt(~feature)
    return d * d


def planes_gather(planes, xs, ys):
    """Sample plane k at point k: (K,H,W), (K,), (K,) -> (K,)."""
    k, h, w = planes.shape
    _, _, x0, y0, fx, fy = _corner_setup(xs, ys, h, w)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    idx = np.arange(k)
    p00 = planes[idx, y0, x0]
    p01 = planes[idx, y0, x1]
    p10 = planes[idx, y1, x0]
    p11 = planes[idx, y1, x1]
    return ((1 - fy) * ((1 - fx) * p00 + fx * p01)
            + fy * ((1 - fx) * p10 + fx * p11))


def planes_scatter_add(gplanes, xs, ys, g):
    k, h, w = gplanes.shape
    _, _, x0, y0, fx, fy = _corner_setup(xs, ys, h, w)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    idx = np.arange(k)
    np.add.at(gplanes, (idx, y0, x0), g * (1 - fx) * (1 - fy))
    np.add.at(gplanes, (idx, y0, x1), g * fx * (1 - fy))
    np.add.at(gplanes, (idx, y1, x0), g * (1 - fx) * fy)
    np.add.at(gplanes, (idx, y1, x1), g * fx * fy)


def planes_coord_grad(planes, xs, ys, g):
    k, h, w = planes.shape
    _, _, x0, y0, fx, fy = _corner_setup(xs, ys, h, w)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    idx = np.arange(k)
    p00 = planes[idx, y0, x0]
    p01 = planes[idx, y0, x1]
    p10 = planes[idx, y1, x0]
    p11 = planes[idx, y1, x1]
    dvx = (1 - fy) * (p01 - p00) + fy * (p11 - p10)
    dvy = (1 - fx) * (p10 - p00) + fx * (p11 - p01)
    inside_x = (xs > 0.0) & (xs < w - 1.0)
    inside_y = (ys > 0.0) & (ys < h - 1.0)
    return g * dvx * inside_x, g * dvy * inside_y
