"""Synthetic lesion phantoms with exact ground truth.

Each phantom is one lesion: a randomly oriented ellipse whose boundary is
modulated by a low-frequency radial field (3-6 cosine harmonics, radial
amplitude at most 25% of the minor semi-axis), placed over a smoothed-noise
background with an intensity contrast of at least 0.15.  The mask is the
exact analytic interior; diameters and the box are derived from the mask, so
supervision is self-consistent by construction.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as _ndi

from ..errors import ContractViolation, EmptyMaskError
from ..geometry import Box, RecistEndpoints, mask_box, recist_from_mask


@dataclass(frozen=True)
class PhantomConfig:
    size: int = 64
    spacing_mm_per_px: float = 0.8
    area_bounds: tuple = (0.02, 0.30)     # fraction of the image
    min_contrast: float = 0.15
    harmonics: tuple = (3, 6)             # inclusive count range
    max_perturb: float = 0.25             # of the minor semi-axis
    max_retries: int = 60


@dataclass
class Phantom:
    image: np.ndarray            # (H, W) float32 in [0, 1]
    mask: np.ndarray             # (H, W) bool
    recist: RecistEndpoints
    box: Box
    spacing_mm_per_px: float
    seed: int
    flags: list = field(default_factory=list)

    @property
    def shape(self):
        return self.image.shape


def _lesion_membership(size, rng, cfg):
    """Draw a perturbed ellipse; returns (mask, geometry dict) or None."""
    h = w = size
    lo, hi = cfg.area_bounds
    area = rng.uniform(lo, hi) * h * w
    aspect = rng.uniform(0.45, 1.0)
    a = math.sqrt(area / (math.pi * aspect))
    b = a * aspect
    theta = rng.uniform(0.0, math.pi)

    n_harm = int(rng.integers(cfg.harmonics[0], cfg.harmonics[1] + 1))
    amps = rng.uniform(0.3, 1.0, n_harm)
    amps *= rng.uniform(0.3, 1.0) * cfg.max_perturb * (b / a) / amps.sum()
    phases = rng.uniform(0.0, 2 * math.pi, n_harm)
    orders = rng.permutation(np.arange(2, 2 + n_harm))

    r_max = a * (1.0 + amps.sum())
    margin = r_max + 2.0
    if margin >= (size - 1) / 2.0:
        return None
    cx = rng.uniform(margin, w - 1 - margin)
    cy = rng.uniform(margin, h - 1 - margin)

    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs - cx
    dy = ys - cy
    ct, st = math.cos(theta), math.sin(theta)
    u = dx * ct + dy * st
    v = -dx * st + dy * ct
    phi = np.arctan2(v / b, u / a)
    eta = np.zeros_like(phi)
    for k, amp, ph in zip(orders, amps, phases):
        eta += amp * np.cos(k * phi + ph)
    # boundary radius at angle phi, perturbed radially
    r_ell = (a * b) / np.sqrt((b * np.cos(phi)) ** 2 + (a * np.sin(phi)) ** 2)
    radius = np.hypot(u, v)
    mask = radius <= r_ell * (1.0 + eta)
    return mask, dict(center=(cx, cy), axes=(a, b), theta=theta)


def _background(size, rng):
    noise = rng.random((size, size))
    bg = _ndi.gaussian_filter(noise, sigma=3.0)
    bg = (bg - bg.min()) / max(bg.max() - bg.min(), 1e-9)
    return 0.25 + 0.25 * bg        # [0.25, 0.5]


def generate_phantom(seed, cfg: PhantomConfig | None = None) -> Phantom:
    """Deterministic phantom for `seed`; resamples until constraints hold."""
    cfg = cfg or PhantomConfig()
    rng = np.random.default_rng(seed)
    lo_px = cfg.area_bounds[0] * cfg.size ** 2
    hi_px = cfg.area_bounds[1] * cfg.size ** 2
    for _ in range(cfg.max_retries):
        drawn = _lesion_membership(cfg.size, rng, cfg)
        if drawn is None:
            continue
        mask, _geo = drawn
        area = int(mask.sum())
        if not (lo_px <= area <= hi_px):
            continue
        bg = _background(cfg.size, rng)
        ring = _ndi.binary_dilation(mask, iterations=3) & ~mask
        sign = 1.0 if rng.random() < 0.5 else -1.0
        contrast = cfg.min_contrast + rng.uniform(0.02, 0.2)
        lesion_level = float(np.clip(bg[mask].mean() + sign * contrast, 0.05, 0.95))
        image = bg.copy()
        texture = 0.02 * _ndi.gaussian_filter(rng.random(mask.shape), 1.0)
        image[mask] = lesion_level + texture[mask]
        image = np.clip(_ndi.gaussian_filter(image, sigma=0.6), 0.0, 1.0)
        achieved = abs(image[mask].mean() - image[ring].mean())
        if achieved < cfg.min_contrast * 0.8:
            continue
        try:
            recist = recist_from_mask(mask)
            box = mask_box(mask)
        except Exception:
            continue
        return Phantom(image.astype(np.float32), mask, recist, box,
                       cfg.spacing_mm_per_px, int(seed))
    raise ContractViolation(f"phantom constraints not satisfiable for seed {seed}")


def sample_click(mask, rng) -> tuple:
    """Uniform click over the 2-px-eroded foreground; centroid fallback.

    `rng` may be a seed or a Generator.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    m = np.asarray(mask).astype(bool)
    if not m.any():
        raise EmptyMaskError("sample_click: empty mask")
    eroded = _ndi.binary_erosion(m, iterations=2)
    if eroded.any():
        ys, xs = np.nonzero(eroded)
        i = int(rng.integers(len(xs)))
        return (float(xs[i]), float(ys[i]))
    ys, xs = np.nonzero(m)
    cx, cy = float(np.round(xs.mean())), float(np.round(ys.mean()))
    if m[int(cy), int(cx)]:
        return (cx, cy)
    j = int(np.argmin((xs - cx) ** 2 + (ys - cy) ** 2))
    return (float(xs[j]), float(ys[j]))


def quad_pseudo_mask(recist: RecistEndpoints, shape) -> np.ndarray:
    """Filled quadrilateral long_a -> short_a -> long_b -> short_b.

    A stand-in weak-supervision mask built from the diameter endpoints alone.
    """
    pts = np.array([recist.long_a, recist.short_a, recist.long_b, recist.short_b],
                   dtype=float)
    d1, d2 = pts[1] - pts[0], pts[2] - pts[0]
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(cross) < 1e-9:
        raise ContractViolation("quad_pseudo_mask: endpoints are collinear")
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w]
    p = np.stack([xs, ys], axis=-1).astype(float)

    def tri(a, b, c):
        def side(p0, p1):
            return ((p[..., 0] - p0[0]) * (p1[1] - p0[1])
                    - (p[..., 1] - p0[1]) * (p1[0] - p0[0]))
        s1, s2, s3 = side(a, b), side(b, c), side(c, a)
        eps = 1e-9
        return (((s1 >= -eps) & (s2 >= -eps) & (s3 >= -eps))
                | ((s1 <= eps) & (s2 <= eps) & (s3 <= eps)))

    la, sa, lb, sb = pts
    return tri(la, sa, lb) | tri(la, lb, sb)
