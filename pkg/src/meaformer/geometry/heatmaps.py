"""Endpoint heatmap construction and decoding."""

import numpy as np

DEFAULT_SIGMA = 5.0


def make_gt_heatmap(center, sigma=DEFAULT_SIGMA, shape=(64, 64), dtype=np.float32):
    """Gaussian response plane, peak exactly 1 at the rounded center pixel.

    `center` is continuous (x, y); it is rounded to the pixel grid before
    rendering so the peak value is exactly 1 there.  Centers outside the
    image are still rendered (only the tail lands in frame).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    h, w = shape
    cx = float(np.round(center[0]))
    cy = float(np.round(center[1]))
    ys = np.arange(h, dtype=np.float64)[:, None] - cy
    xs = np.arange(w, dtype=np.float64)[None, :] - cx
    return np.exp(-(xs * xs + ys * ys) / (2.0 * sigma * sigma)).astype(dtype)


def decode_heatmap(plane):
    """Peak location of a heatmap with 3x3 quadratic sub-pixel refinement.

    Returns ((x, y), degenerate) where degenerate marks an all-equal plane
    (the image center is returned in that case).  Argmax ties break to the
    row-major first occurrence; the refinement offset is one Newton step on
    the local quadratic, clamped to +-0.5 px, skipped at the image border.
    """
    p = np.asarray(plane, dtype=np.float64)
    h, w = p.shape
    if p.max() == p.min():
        return ((w - 1) / 2.0, (h - 1) / 2.0), True
    flat = int(p.argmax())
    y, x = divmod(flat, w)
    if 0 < x < w - 1 and 0 < y < h - 1:
        dx = (p[y, x + 1] - p[y, x - 1]) / 2.0
        dy = (p[y + 1, x] - p[y - 1, x]) / 2.0
        dxx = p[y, x + 1] + p[y, x - 1] - 2.0 * p[y, x]
        dyy = p[y + 1, x] + p[y - 1, x] - 2.0 * p[y, x]
        dxy = (p[y + 1, x + 1] - p[y + 1, x - 1] - p[y - 1, x + 1] + p[y - 1, x - 1]) / 4.0
        det = dxx * dyy - dxy * dxy
        if dxx < 0 and det > 0:
            ox = -(dyy * dx - dxy * dy) / det
            oy = -(dxx * dy - dxy * dx) / det
        else:
            ox = -dx / dxx if dxx < 0 else 0.0
            oy = -dy / dyy if dyy < 0 else 0.0
        x = x + float(np.clip(ox, -0.5, 0.5))
        y = y + float(np.clip(oy, -0.5, 0.5))
    return (float(x), float(y)), False
