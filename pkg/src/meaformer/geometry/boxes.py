"""Boxes, the LOI rule, and crop/resize with invertible affine bookkeeping.

Coordinates: x = column, y = row, origin at the top-left pixel center, so an
image spans [0, W-1] x [0, H-1].
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, DegenerateGeometryError
from ..numcore import kernels as K


@dataclass(frozen=True)
class Box:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise DegenerateGeometryError(f"degenerate box {self}")

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def center(self):
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    @classmethod
    def from_corners(cls, a, b):
        """Box from two arbitrary opposite corners."""
        return cls(min(a[0], b[0]), min(a[1], b[1]), max(a[0], b[0]), max(a[1], b[1]))


def mask_box(mask) -> Box:
    """Tight bounding box of the foreground (pixel-center coordinates)."""
    ys, xs = np.nonzero(np.asarray(mask).astype(bool))
    if xs.size == 0:
        raise DegenerateGeometryError("mask_box: empty mask")
    if xs.min() == xs.max() or ys.min() == ys.max():
        raise DegenerateGeometryError("mask_box: foreground is a line or point")
    return Box(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))


def box_iou(a: Box, b: Box) -> float:
    ix = max(0.0, min(a.x1, b.x1) - max(a.x0, b.x0))
    iy = max(0.0, min(a.y1, b.y1) - max(a.y0, b.y0))
    inter = ix * iy
    union = a.width * a.height + b.width * b.height - inter
    return inter / union if union > 0 else 0.0


def loi_from_box(box: Box, image_shape) -> Box:
    """Square lesion-of-interest: side twice the box's long side, same center.

    Clipped to image bounds by shifting the center; the side shrinks only
    when it exceeds the image itself.
    """
    h, w = image_shape
    side = 2.0 * max(box.width, box.height)
    side = min(side, float(w - 1), float(h - 1))
    cx, cy = box.center

    def place(c, extent):
        lo = c - side / 2.0
        lo = max(0.0, min(lo, extent - side))
        return lo

    x0 = place(cx, w - 1)
    y0 = place(cy, h - 1)
    return Box(x0, y0, x0 + side, y0 + side)


@dataclass(frozen=True)
class AffineMap:
    """out -> in mapping: x_in = x0 + u * sx, y_in = y0 + v * sy."""

    x0: float
    y0: float
    sx: float
    sy: float

    def apply(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        out = np.empty_like(pts)
        out[..., 0] = self.x0 + pts[..., 0] * self.sx
        out[..., 1] = self.y0 + pts[..., 1] * self.sy
        return out

    def invert(self) -> "AffineMap":
        return AffineMap(-self.x0 / self.sx, -self.y0 / self.sy, 1.0 / self.sx, 1.0 / self.sy)

    @property
    def uniform_scale(self) -> float:
        if not np.isclose(self.sx, self.sy, rtol=1e-9):
            raise ContractViolation("affine is not uniform")
        return self.sx

    def to_dict(self):
        return {"x0": self.x0, "y0": self.y0, "sx": self.sx, "sy": self.sy}


def crop_resize(image, loi: Box, out_size=256):
    """Bilinear crop of `loi` to out_size x out_size.

    Returns (crop, affine) with `affine` mapping crop coordinates back to
    image coordinates (corner-aligned: crop pixel 0 sits on loi.x0, pixel
    out_size-1 on loi.x1).
    """
    if out_size < 2:
        raise ContractViolation("out_size must be >= 2")
    img = np.asarray(image, dtype=np.float64)
    aff = AffineMap(loi.x0, loi.y0,
                    loi.width / (out_size - 1), loi.height / (out_size - 1))
    us = np.arange(out_size, dtype=np.float64)
    xs = (loi.x0 + us * aff.sx)[None, :].repeat(out_size, axis=0)
    ys = (loi.y0 + us * aff.sy)[:, None].repeat(out_size, axis=1)
    vals = K.plane_gather(img, xs.reshape(-1), ys.reshape(-1))
    return vals.reshape(out_size, out_size), aff
