"""Training augmentations.

One similarity transform (scale + rotation about the image center + crop
jitter translation) is applied identically to the image, mask, endpoints,
box and click; brightness/contrast/blur touch the image only.  Endpoint
ground truth is re-derived from the warped mask whenever rotation is
involved, since axis extremes of non-convex shapes move under rotation.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage as _ndi

from ..geometry import RecistEndpoints, mask_box, recist_from_mask
from ..numcore import kernels as K
from .phantom import Phantom


@dataclass(frozen=True)
class AugmentationConfig:
    p_geometric: float = 0.7
    scale_range: tuple = (0.9, 1.12)
    rotate_deg: tuple = (-15.0, 15.0)
    jitter_px: float = 4.0
    p_brightness: float = 0.5
    brightness_delta: float = 0.08
    p_contrast: float = 0.5
    contrast_range: tuple = (0.9, 1.1)
    p_blur: float = 0.3
    blur_sigma: tuple = (0.3, 0.8)
    max_retries: int = 8

    @classmethod
    def identity(cls):
        return cls(p_geometric=0.0, p_brightness=0.0, p_contrast=0.0, p_blur=0.0)


def _warp_plane(plane, mat_out_to_in):
    h, w = plane.shape
    ys, xs = np.mgrid[0:h, 0:w]
    pts = np.stack([xs.ravel(), ys.ravel(), np.ones(h * w)], axis=0).astype(float)
    src = mat_out_to_in @ pts
    vals = K.plane_gather(np.ascontiguousarray(plane, dtype=np.float64),
                          src[0], src[1])
    return vals.reshape(h, w)


def _similarity(center, scale, angle_rad, shift):
    """Forward 3x3 matrix: rotate+scale about center, then translate."""
    cx, cy = center
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    m = np.array([[scale * c, -scale * s, 0.0],
                  [scale * s, scale * c, 0.0],
                  [0.0, 0.0, 1.0]])
    pre = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1.0]])
    post = np.array([[1, 0, cx + shift[0]], [0, 1, cy + shift[1]], [0, 0, 1.0]])
    return post @ m @ pre


def augment(phantom: Phantom, click, cfg: AugmentationConfig, rng):
    """Returns (augmented phantom, click').  Deterministic given `rng` state."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    img = phantom.image
    h, w = img.shape
    mask = phantom.mask
    endpoints = phantom.recist
    box = phantom.box
    click = (float(click[0]), float(click[1]))
    flags = []

    if rng.random() < cfg.p_geometric:
        for _ in range(cfg.max_retries):
            scale = rng.uniform(*cfg.scale_range)
            angle = math.radians(rng.uniform(*cfg.rotate_deg))
            shift = rng.uniform(-cfg.jitter_px, cfg.jitter_px, 2)
            fwd = _similarity(((w - 1) / 2.0, (h - 1) / 2.0), scale, angle, shift)
            inv = np.linalg.inv(fwd)
            new_mask = _warp_plane(mask.astype(np.float64), inv) >= 0.5
            if new_mask.sum() < 8:
                continue
            pc = fwd @ np.array([click[0], click[1], 1.0])
            new_click = (float(pc[0]), float(pc[1]))
            if not (0 <= new_click[0] <= w - 1 and 0 <= new_click[1] <= h - 1):
                continue
            if not new_mask[int(round(new_click[1])), int(round(new_click[0]))]:
                continue
            try:
                if abs(angle) > 1e-12:
                    new_endpoints = recist_from_mask(new_mask)
                    flags.append("endpoints_rederived")
                else:
                    def fpt(p):
                        q = fwd @ np.array([p[0], p[1], 1.0])
                        return (float(q[0]), float(q[1]))
                    ep = endpoints
                    new_endpoints = RecistEndpoints(
                        fpt(ep.long_a), fpt(ep.long_b),
                        fpt(ep.short_a), fpt(ep.short_b)).canonical()
                new_box = mask_box(new_mask)
            except Exception:
                continue
            img = _warp_plane(img.astype(np.float64), inv)
            mask, endpoints, box, click = new_mask, new_endpoints, new_box, new_click
            flags.append("geometric")
            break
        else:
            flags.append("geometric_resample_exhausted")

    img = np.asarray(img, dtype=np.float64)
    if rng.random() < cfg.p_brightness:
        img = img + rng.uniform(-cfg.brightness_delta, cfg.brightness_delta)
        flags.append("brightness")
    if rng.random() < cfg.p_contrast:
        m = img.mean()
        img = m + (img - m) * rng.uniform(*cfg.contrast_range)
        flags.append("contrast")
    if rng.random() < cfg.p_blur:
        img = _ndi.gaussian_filter(img, sigma=rng.uniform(*cfg.blur_sigma))
        flags.append("blur")

    if not flags:
        return phantom, click
    out = Phantom(np.clip(img, 0.0, 1.0).astype(np.float32), mask, endpoints,
                  box, phantom.spacing_mm_per_px, phantom.seed,
                  flags=list(phantom.flags) + flags)
    return out, click
