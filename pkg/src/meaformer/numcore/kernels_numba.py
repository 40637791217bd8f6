"""Numba kernel lane: @njit loop versions of the hot inner kernels.

Arrays are allocated on the python side so every kernel stays dtype-generic
(f32 for training, f64 for gradient checks); numba specializes per signature
on first call.
"""

import numpy as np
from numba import njit

LANE = "numba"


def conv_out_size(size: int, ks: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - ks) // stride + 1


@njit(cache=True)
def _im2col_fill(x, cols, ks, stride, pad):
    n, c, h, w = x.shape
    ho = (h + 2 * pad - ks) // stride + 1
    wo = (w + 2 * pad - ks) // stride + 1
    for ni in range(n):
        for ci in range(c):
            for kh in range(ks):
                for kw in range(ks):
                    krow = (ci * ks + kh) * ks + kw
                    for oh in range(ho):
                        ih = oh * stride + kh - pad
                        base = oh * wo
                        if ih < 0 or ih >= h:
                            for ow in range(wo):
                                cols[ni, krow, base + ow] = 0.0
                            continue
                        for ow in range(wo):
                            iw = ow * stride + kw - pad
                            if 0 <= iw < w:
                                cols[ni, krow, base + ow] = x[ni, ci, ih, iw]
                            else:
                                cols[ni, krow, base + ow] = 0.0
    return cols


def im2col(x, ks, stride, pad):
    """(N,C,H,W) -> (N, C*ks*ks, Ho*Wo) patch matrix."""
    n, c, h, w = x.shape
    ho = conv_out_size(h, ks, stride, pad)
    wo = conv_out_size(w, ks, stride, pad)
    cols = np.empty((n, c * ks * ks, ho * wo), dtype=x.dtype)
    _im2col_fill(np.ascontiguousarray(x), cols, ks, stride, pad)
    return cols


@njit(cache=True)
def _col2im_fill(cols, out, ks, stride, pad):
    n, c, h, w = out.shape
    ho = (h + 2 * pad - ks) // stride + 1
    wo = (w + 2 * pad - ks) // stride + 1
    for ni in range(n):
        for ci in range(c):
            for kh in range(ks):
                for kw in range(ks):
                    krow = (ci * ks + kh) * ks + kw
                    for oh in range(ho):
                        ih = oh * stride + kh - pad
                        if ih < 0 or ih >= h:
                            continue
                        base = oh * wo
                        for ow in range(wo):
                            iw = ow * stride + kw - pad
                            if 0 <= iw < w:
                                out[ni, ci, ih, iw] += cols[ni, krow, base + ow]
    return out


def col2im(cols, n, c, h, w, ks, stride, pad):
    """Adjoint of im2col: scatter-add patches back to (N,C,H,W)."""
    out = np.zeros((n, c, h, w), dtype=cols.dtype)
    _col2im_fill(np.ascontiguousarray(cols), out, ks, stride, pad)
    return out


@njit(cache=True)
def _up1d(x, out):
    # out[2j] = 0.75 x[j] + 0.25 x[j-1]; out[2j+1] = 0.75 x[j] + 0.25 x[j+1]
    m = x.shape[-1]
    for n in range(x.shape[0]):
        for j in range(m):
            jl = j - 1 if j > 0 else 0
            jr = j + 1 if j < m - 1 else m - 1
            out[n, 2 * j] = 0.75 * x[n, j] + 0.25 * x[n, jl]
            out[n, 2 * j + 1] = 0.75 * x[n, j] + 0.25 * x[n, jr]


@njit(cache=True)
def _up1d_adj(g, out):
    m = out.shape[-1]
    for n in range(out.shape[0]):
        for j in range(m):
            out[n, j] = 0.75 * (g[n, 2 * j] + g[n, 2 * j + 1])
        out[n, 0] += 0.25 * g[n, 0]
        for j in range(m - 1):
            out[n, j] += 0.25 * g[n, 2 * (j + 1)]
        out[n, m - 1] += 0.25 * g[n, 2 * m - 1]
        for j in range(1, m):
            out[n, j] += 0.25 * g[n, 2 * (j - 1) + 1]


def _up_lastaxis(x):
    flat = np.ascontiguousarray(x).reshape(-1, x.shape[-1])
    out = np.empty((flat.shape[0], 2 * flat.shape[1]), dtype=x.dtype)
    _up1d(flat, out)
    return out.reshape(x.shape[:-1] + (2 * x.shape[-1],))


def _up_adj_lastaxis(g):
    flat = np.ascontiguousarray(g).reshape(-1, g.shape[-1])
    out = np.empty((flat.shape[0], g.shape[-1] // 2), dtype=g.dtype)
    _up1d_adj(flat, out)
    return out.reshape(g.shape[:-1] + (g.shape[-1] // 2,))


def upsample2x(x):
    """Bilinear 2x upsample of (N,C,h,w)."""
    rows = _up_lastaxis(x.swapaxes(2, 3)).swapaxes(2, 3)
    return _up_lastaxis(rows)


def upsample2x_adj(g):
    """Adjoint of upsample2x: (N,C,2h,2w) -> (N,C,h,w)."""
    gw = _up_adj_lastaxis(g)
    return _up_adj_lastaxis(gw.swapaxes(2, 3)).swapaxes(2, 3)


@njit(cache=True)
def _gather_fill(plane, xs, ys, out):
    h, w = plane.shape
    for i in range(xs.shape[0]):
        x = min(max(xs[i], 0.0), w - 1.0)
        y = min(max(ys[i], 0.0), h - 1.0)
        x0 = min(int(np.floor(x)), w - 2) if w > 1 else 0
        y0 = min(int(np.floor(y)), h - 2) if h > 1 else 0
        x1 = min(x0 + 1, w - 1)
        y1 = min(y0 + 1, h - 1)
        fx = x - x0
        fy = y - y0
        out[i] = ((1 - fy) * ((1 - fx) * plane[y0, x0] + fx * plane[y0, x1])
                  + fy * ((1 - fx) * plane[y1, x0] + fx * plane[y1, x1]))


def plane_gather(plane, xs, ys):
    """Bilinear sample of a (H,W) plane at continuous (x,y) points."""
    xs = np.atleast_1d(np.ascontiguousarray(xs))
    ys = np.atleast_1d(np.ascontiguousarray(ys))
    out = np.empty(xs.shape[0], dtype=plane.dtype)
    _gather_fill(np.ascontiguousarray(plane), xs.astype(plane.dtype), ys.astype(plane.dtype), out)
    return out


@njit(cache=True)
def _scatter_fill(gplane, xs, ys, g):
    h, w = gplane.shape
    for i in range(xs.shape[0]):
        x = min(max(xs[i], 0.0), w - 1.0)
        y = min(max(ys[i], 0.0), h - 1.0)
        x0 = min(int(np.floor(x)), w - 2) if w > 1 else 0
        y0 = min(int(np.floor(y)), h - 2) if h > 1 else 0
        x1 = min(x0 + 1, w - 1)
        y1 = min(y0 + 1, h - 1)
        fx = x - x0
        fy = y - y0
        gplane[y0, x0] += g[i] * (1 - fx) * (1 - fy)
        gplane[y0, x1] += g[i] * fx * (1 - fy)
        gplane[y1, x0] += g[i] * (1 - fx) * fy
        gplane[y1, x1] += g[i] * fx * fy


def plane_scatter_add(gplane, xs, ys, g):
    """Adjoint of plane_gather w.r.t. the plane; accumulates into gplane."""
    xs = np.atleast_1d(np.ascontiguousarray(xs)).astype(gplane.dtype)
    ys = np.atleast_1d(np.ascontiguousarray(ys)).astype(gplane.dtype)
    _scatter_fill(gplane, xs, ys, np.atleast_1d(np.ascontiguousarray(g)))


@njit(cache=True)
def _coord_grad_fill(plane, xs, ys, g, gx, gy):
    h, w = plane.shape
    for i in range(xs.shape[0]):
        x = min(max(xs[i], 0.0), w - 1.0)
        y = min(max(ys[i], 0.0), h - 1.0)
        x0 = min(int(np.floor(x)), w - 2) if w > 1 else 0
        y0 = min(int(np.floor(y)), h - 2) if h > 1 else 0
        x1 = min(x0 + 1, w - 1)
        y1 = min(y0 + 1, h - 1)
        fx = x - x0
        fy = y - y0
        p00 = plane[y0, x0]
        p01 = plane[y0, x1]
        p10 = plane[y1, x0]
        p11 = plane[y1, x1]
        dvx = (1 - fy) * (p01 - p00) + fy * (p11 - p10)
        dvy = (1 - fx) * (p10 - p00) + fx * (p11 - p01)
        gx[i] = g[i] * dvx if (xs[i] > 0.0 and xs[i] < w - 1.0) else 0.0
        gy[i] = g[i] * dvy if (ys[i] > 0.0 and ys[i] < h - 1.0) else 0.0


def plane_coord_grad(plane, xs, ys, g):
    """Gradient of plane_gather w.r.t. the sample coordinates."""
    xs = np.atleast_1d(np.ascontiguousarray(xs)).astype(plane.dtype)
    ys = np.atleast_1d(np.ascontiguousarray(ys)).astype(plane.dtype)
    g = np.atleast_1d(np.ascontiguousarray(g))
    gx = np.empty_like(xs)
    gy = np.empty_like(ys)
    _coord_grad_fill(np.ascontiguousarray(plane), xs, ys, g, gx, gy)
    return gx, gy


@njit(cache=True)
def _edt_sq_impl(feature):
    h, w = feature.shape
    big = 1.0e9  # finite cap so feature-free columns stay NaN-safe
    g = np.empty((h, w), np.float64)
    for x in range(w):
        prev = big
        for y in range(h):
            if feature[y, x]:
                prev = 0.0
            elif prev < big:
                prev += 1.0
            g[y, x] = prev
        prev = big
        for y in range(h - 1, -1, -1):
            if feature[y, x]:
                prev = 0.0
            elif prev < big:
                prev += 1.0
            if prev < g[y, x]:
                g[y, x] = prev
    # lower envelope of parabolas per row
    out = np.empty((h, w), np.float64)
    v = np.empty(w, np.int64)
    z = np.empty(w + 1, np.float64)
    for y in range(h):
        k = 0
        v[0] = 0
        z[0] = -np.inf
        z[1] = np.inf
        for q in range(1, w):
            fq = g[y, q] * g[y, q]
            p = v[k]
            fp = g[y, p] * g[y, p]
            s = (fq + q * q - fp - p * p) / (2.0 * (q - p))
            while s <= z[k]:
                k -= 1
                p = v[k]
                fp = g[y, p] * g[y, p]
                s = (fq + q * q - fp - p * p) / (2.0 * (q - p))
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = np.inf
        k = 0
        for q in range(w):
            while z[k + 1] < q:
                k += 1
            p = v[k]
            gp = g[y, p]
            out[y, q] = (q - p) * (q - p) + gp * gp
    return out


def edt_sq(feature):
    """Exact squared Euclidean distance to the nearest True pixel."""
    if not feature.any():
        raise ValueError("edt_sq: feature set is empty")
    return _edt_sq_impl(np.ascontiguousarray(feature))


@njit(cache=True)
def _planes_gather_fill(planes, xs, ys, out):
    k, h, w = planes.shape
    for i in range(k):
        x = min(max(xs[i], 0.0), w - 1.0)
        y = min(max(ys[i], 0.0), h - 1.0)
        x0 = min(int(np.floor(x)), w - 2) if w > 1 else 0
        y0 = min(int(np.floor(y)), h - 2) if h > 1 else 0
        x1 = min(x0 + 1, w - 1)
        y1 = min(y0 + 1, h - 1)
        fx = x - x0
        fy = y - y0
        out[i] = ((1 - fy) * ((1 - fx) * planes[i, y0, x0] + fx * planes[i, y0, x1])
                  + fy * ((1 - fx) * planes[i, y1, x0] + fx * planes[i, y1, x1]))


def planes_gather(planes, xs, ys):
    """Sample plane k at point k: (K,H,W), (K,), (K,) -> (K,)."""
    xs = np.ascontiguousarray(xs).astype(planes.dtype)
    ys = np.ascontiguousarray(ys).astype(planes.dtype)
    out = np.empty(planes.shape[0], dtype=planes.dtype)
    _planes_gather_fill(np.ascontiguousarray(planes), xs, ys, out)
    return out


@njit(cache=True)
def _planes_scatter_fill(gplanes, xs, ys, g):
    k, h, w = gplanes.shape
    for i in range(k):
        x = min(max(xs[i], 0.0), w - 1.0)
        y = min(max(ys[i], 0.0), h - 1.0)
        x0 = min(int(np.floor(x)), w - 2) if w > 1 else 0
        y0 = min(int(np.floor(y)), h - 2) if h > 1 else 0
        x1 = min(x0 + 1, w - 1)
        y1 = min(y0 + 1, h - 1)
        fx = x - x0
        fy = y - y0
        gplanes[i, y0, x0] += g[i] * (1 - fx) * (1 - fy)
        gplanes[i, y0, x1] += g[i] * fx * (1 - fy)
        gplanes[i, y1, x0] += g[i] * (1 - fx) * fy
        gplanes[i, y1, x1] += g[i] * fx * fy


def planes_scatter_add(gplanes, xs, ys, g):
    xs = np.ascontiguousarray(xs).astype(gplanes.dtype)
    ys = np.ascontiguousarray(ys).astype(gplanes.dtype)
    _planes_scatter_fill(gplanes, xs, ys, np.ascontiguousarray(g))


@njit(cache=True)
def _planes_coord_grad_fill(planes, xs, ys, g, gx, gy):
    k, h, w = planes.shape
    for i in range(k):
        x = min(max(xs[i], 0.0), w - 1.0)
        y = min(max(ys[i], 0.0), h - 1.0)
        x0 = min(int(np.floor(x)), w - 2) if w > 1 else 0
        y0 = min(int(np.floor(y)), h - 2) if h > 1 else 0
        x1 = min(x0 + 1, w - 1)
        y1 = min(y0 + 1, h - 1)
        fx = x - x0
        fy = y - y0
        p00 = planes[i, y0, x0]
        p01 = planes[i, y0, x1]
        p10 = planes[i, y1, x0]
        p11 = planes[i, y1, x1]
        dvx = (1 - fy) * (p01 - p00) + fy * (p11 - p10)
        dvy = (1 - fx) * (p10 - p00) + fx * (p11 - p01)
        gx[i] = g[i] * dvx if (xs[i] > 0.0 and xs[i] < w - 1.0) else 0.0
        gy[i] = g[i] * dvy if (ys[i] > 0.0 and ys[i] < h - 1.0) else 0.0


def planes_coord_grad(planes, xs, ys, g):
    xs = np.ascontiguousarray(xs).astype(planes.dtype)
    ys = np.ascontiguousarray(ys).astype(planes.dtype)
    g = np.ascontiguousarray(g)
    gx = np.empty_like(xs)
    gy = np.empty_like(ys)
    _planes_coord_grad_fill(np.ascontiguousarray(planes), xs, ys, g, gx, gy)
    return gx, gy
