"""RECIST diameter extraction from masks, and measurement fusion.

Long axis: farthest pair of boundary pixels, found exactly on the convex
hull with rotating calipers (integer arithmetic).  Short axis: the longest
chord perpendicular to the long axis, swept at 0.5 px steps along it; chord
ends are the first/last sub-pixel crossings of the 0.5 iso-level of the
bilinearly interpolated mask.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateGeometryError, EmptyMaskError
from ..numcore import kernels as K
from .masks import boundary_pixels, largest_component

SWEEP_STEP = 0.5      # px, along the long axis
SCAN_STEP = 0.25      # px, along each perpendicular ray


def _canonical_pair(a, b):
    """Endpoint with smaller x first; smaller y breaks ties."""
    if (a[0], a[1]) <= (b[0], b[1]):
        return (float(a[0]), float(a[1])), (float(b[0]), float(b[1]))
    return (float(b[0]), float(b[1])), (float(a[0]), float(a[1]))


@dataclass(frozen=True)
class RecistEndpoints:
    long_a: tuple
    long_b: tuple
    short_a: tuple
    short_b: tuple

    def canonical(self) -> "RecistEndpoints":
        la, lb = _canonical_pair(self.long_a, self.long_b)
        sa, sb = _canonical_pair(self.short_a, self.short_b)
        return RecistEndpoints(la, lb, sa, sb)

    def as_array(self):
        return np.array([self.long_a, self.long_b, self.short_a, self.short_b], dtype=float)

    @classmethod
    def from_array(cls, arr):
        t = [tuple(float(v) for v in p) for p in np.asarray(arr).reshape(4, 2)]
        return cls(*t)

    def transformed(self, affine) -> "RecistEndpoints":
        return RecistEndpoints.from_array(affine.apply(self.as_array())).canonical()


@dataclass
class RecistMeasurement:
    endpoints: RecistEndpoints
    long_px: float
    short_px: float
    long_mm: float
    short_mm: float
    source: str                      # segmentation | heatmap | regression | fused
    spacing_mm_per_px: float
    flags: list = field(default_factory=list)

    @classmethod
    def from_endpoints(cls, ep: RecistEndpoints, spacing, source, flags=None):
        ep = ep.canonical()
        lp = math.dist(ep.long_a, ep.long_b)
        sp = math.dist(ep.short_a, ep.short_b)
        return cls(ep, lp, sp, lp * spacing, sp * spacing, source, spacing,
                   list(flags or []))

    @property
    def degenerate(self) -> bool:
        return (not np.isfinite([self.long_px, self.short_px]).all()
                or self.long_px <= 0 or self.short_px <= 0)

    def transformed(self, affine) -> "RecistMeasurement":
        return RecistMeasurement.from_endpoints(
            self.endpoints.transformed(affine), self.spacing_mm_per_px,
            self.source, self.flags)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points):
    """Monotone chain on integer points; strictly convex output."""
    pts = sorted(set((int(x), int(y)) for x, y in points))
    if len(pts) <= 2:
        return pts
    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out
    lower = build(pts)
    upper = build(reversed(pts))
    return lower[:-1] + upper[:-1]


def _d2(a, b):
    dx, dy = a[0] - b[0], a[1] - b[1]
    return dx * dx + dy * dy


def hull_diameter(hull):
    """Farthest vertex pair of a strictly convex polygon (rotating calipers)."""
    m = len(hull)
    if m == 1:
        return 0, (hull[0], hull[0])
    if m == 2:
        return _d2(hull[0], hull[1]), (hull[0], hull[1])

    def tri2(a, b, c):
        return abs(_cross(a, b, c))

    best = -1
    pair = (hull[0], hull[1])
    k = 1
    for i in range(m):
        j = (i + 1) % m
        guard = 0
        while tri2(hull[i], hull[j], hull[(k + 1) % m]) > tri2(hull[i], hull[j], hull[k]):
            k = (k + 1) % m
            guard += 1
            if guard > 2 * m:
                raise RuntimeError("rotating calipers failed to converge")
        for cand in (i, j):
            d2 = _d2(hull[cand], hull[k])
            if d2 > best:
                best = d2
                pair = (hull[cand], hull[k])
    return best, pair


def perpendicular_chords(mask_plane, a, b, margin=2.0):
    """Longest 0.5-level chord perpendicular to segment a->b.

    Sweeps positions t along a->b at 0.5 px steps, scans each perpendicular
    ray at 0.25 px, and sub-pixel-refines the first/last crossings by linear
    interpolation.  Returns (length, end1, end2) or None if no chord exists.
    """
    plane = np.ascontiguousarray(mask_plane, dtype=np.float64)
    ax, ay = float(a[0]), float(a[1])
    ux, uy = b[0] - ax, b[1] - ay
    length = math.hypot(ux, uy)
    if length <= 0:
        return None
    ux, uy = ux / length, uy / length
    vx, vy = -uy, ux
    ts = np.arange(0.0, length + SWEEP_STEP / 2, SWEEP_STEP)
    half = length + margin
    ss = np.arange(-half, half + SCAN_STEP / 2, SCAN_STEP)
    px = ax + ts[:, None] * ux + ss[None, :] * vx
    py = ay + ts[:, None] * uy + ss[None, :] * vy
    vals = K.plane_gather(plane, px.reshape(-1), py.reshape(-1)).reshape(px.shape)
    inside = vals >= 0.5
    rows = inside.any(axis=1)
    if not rows.any():
        return None
    best = None
    for ti in np.nonzero(rows)[0]:
        v = vals[ti]
        idx = np.nonzero(inside[ti])[0]
        j0, j1 = idx[0], idx[-1]
        if j0 == 0:
            s_first = ss[0]
        else:
            s_first = ss[j0 - 1] + SCAN_STEP * (0.5 - v[j0 - 1]) / (v[j0] - v[j0 - 1])
        if j1 == len(ss) - 1:
            s_last = ss[-1]
        else:
            s_last = ss[j1] + SCAN_STEP * (v[j1] - 0.5) / (v[j1] - v[j1 + 1])
        chord = s_last - s_first
        if best is None or chord > best[0]:
            t = ts[ti]
            e1 = (ax + t * ux + s_first * vx, ay + t * uy + s_first * vy)
            e2 = (ax + t * ux + s_last * vx, ay + t * uy + s_last * vy)
            best = (chord, e1, e2)
    return best


def recist_from_mask(mask) -> RecistEndpoints:
    """Long + short diameter endpoints of the largest component of `mask`."""
    m = np.asarray(mask).astype(bool)
    if not m.any():
        raise EmptyMaskError("recist_from_mask: empty mask")
    comp = largest_component(m)
    by, bx = np.nonzero(boundary_pixels(comp))
    if bx.size < 2:
        raise DegenerateGeometryError("mask is a single pixel")
    hull = convex_hull(zip(bx, by))
    d2, (pa, pb) = hull_diameter(hull)
    if d2 == 0:
        raise DegenerateGeometryError("mask has zero-length diameter")
    chord = perpendicular_chords(comp.astype(np.float64), pa, pb)
    if chord is None or chord[0] <= 0:
        raise DegenerateGeometryError("no perpendicular chord found")
    _, sa, sb = chord
    return RecistEndpoints(pa, pb, sa, sb).canonical()


def fuse_diameters(seg: RecistMeasurement, heat: RecistMeasurement,
                   reg: RecistMeasurement) -> RecistMeasurement:
    """Average the reference (segmentation) with the closest other source.

    Per axis independently: of heatmap/regression, take the one whose length
    is closer to the segmentation length (ties go to heatmap), average the
    two lengths, and rescale the segmentation endpoints about their midpoint
    to the fused length.  Degenerate companions fall back to segmentation.
    """
    flags = []
    spacing = seg.spacing_mm_per_px

    def fuse_axis(name, seg_len, heat_len, reg_len):
        candidates = []
        if heat is not None and not heat.degenerate:
            candidates.append(("heatmap", heat_len))
        if reg is not None and not reg.degenerate:
            candidates.append(("regression", reg_len))
        if not candidates:
            flags.append(f"fusion_fallback_{name}")
            return seg_len
        # stable min: heatmap listed first wins ties
        src, cand = min(candidates, key=lambda c: abs(c[1] - seg_len))
        flags.append(f"fusion_{name}_used_{src}")
        return 0.5 * (seg_len + cand)

    fused_long = fuse_axis("long", seg.long_px, getattr(heat, "long_px", 0.0),
                           getattr(reg, "long_px", 0.0))
    fused_short = fuse_axis("short", seg.short_px, getattr(heat, "short_px", 0.0),
                            getattr(reg, "short_px", 0.0))

    def rescale(pa, pb, new_len):
        pa, pb = np.asarray(pa), np.asarray(pb)
        mid = (pa + pb) / 2.0
        d = pb - pa
        n = np.linalg.norm(d)
        if n == 0:
            return tuple(pa), tuple(pb)
        d = d / n * (new_len / 2.0)
        return tuple(mid - d), tuple(mid + d)

    ep = seg.endpoints
    la, lb = rescale(ep.long_a, ep.long_b, fused_long)
    sa, sb = rescale(ep.short_a, ep.short_b, fused_short)
    return RecistMeasurement.from_endpoints(
        RecistEndpoints(la, lb, sa, sb), spacing, "fused", flags)
