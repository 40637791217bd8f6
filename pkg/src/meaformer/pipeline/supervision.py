"""Sample assembly: phantom -> network input + supervision.

Step 1 sees the whole image (resized to the model's input size) and learns
the two tight box corners.  Step 2 sees the LOI crop built from the ground
truth box and learns the four diameter endpoints.  Both get the click
channels stacked under the CT plane.
"""

import numpy as np

from ..data import augment, sample_click
from ..geometry import (Box, click_channels, crop_resize, loi_from_box,
                        make_gt_heatmap)
from ..losses import SupervisionPack
from ..numcore import kernels as K

HEATMAP_ORDER = ("long_a", "long_b", "short_a", "short_b")


def _warp_mask(mask, affine, out_size):
    us = np.arange(out_size, dtype=np.float64)
    xs = (affine.x0 + us * affine.sx)[None, :].repeat(out_size, axis=0)
    ys = (affine.y0 + us * affine.sy)[:, None].repeat(out_size, axis=1)
    vals = K.plane_gather(np.ascontiguousarray(mask, dtype=np.float64),
                          xs.reshape(-1), ys.reshape(-1))
    return vals.reshape(out_size, out_size) >= 0.5


def _pack(image_plane, click, points, mask, size, sigma):
    spot, dist = click_channels(click, (size, size))
    inp = np.stack([image_plane.astype(np.float32), spot, dist])
    heatmaps = np.stack([make_gt_heatmap(p, sigma, (size, size)) for p in points])
    flags = []
    for p in points:
        if not (0 <= p[0] <= size - 1 and 0 <= p[1] <= size - 1):
            flags.append("heatmap_center_outside")
    kps = np.asarray(points, dtype=np.float64) / (size - 1)
    sup = SupervisionPack(gt_mask=mask.astype(np.float32),
                          gt_heatmaps=heatmaps,
                          gt_keypoints=np.clip(kps, 0.0, 1.0),
                          flags=flags)
    return inp, sup


def build_step2_sample(phantom, input_size, rng, aug_cfg=None, sigma=5.0):
    """LOI view: crop around the ground-truth box, endpoint supervision."""
    click = sample_click(phantom.mask, rng)
    if aug_cfg is not None:
        phantom, click = augment(phantom, click, aug_cfg, rng)
    box = phantom.box
    loi = loi_from_box(box, phantom.shape)
    crop, affine = crop_resize(phantom.image, loi, input_size)
    inv = affine.invert()
    click_l = tuple(inv.apply(np.array(click)))
    click_l = (float(np.clip(click_l[0], 0, input_size - 1)),
               float(np.clip(click_l[1], 0, input_size - 1)))
    mask_l = _warp_mask(phantom.mask, affine, input_size)
    ep = phantom.recist.transformed(inv)
    points = [getattr(ep, n) for n in HEATMAP_ORDER]
    return _pack(crop, click_l, points, mask_l, input_size, sigma)


def build_step1_sample(phantom, input_size, rng, aug_cfg=None, sigma=5.0):
    """Full-image view: box-corner supervision (top-left, bottom-right)."""
    click = sample_click(phantom.mask, rng)
    if aug_cfg is not None:
        phantom, click = augment(phantom, click, aug_cfg, rng)
    h, w = phantom.shape
    whole = Box(0.0, 0.0, float(w - 1), float(h - 1))
    crop, affine = crop_resize(phantom.image, whole, input_size)
    inv = affine.invert()
    click_r = tuple(inv.apply(np.array(click)))
    mask_r = _warp_mask(phantom.mask, affine, input_size)
    b = phantom.box
    corners = inv.apply(np.array([[b.x0, b.y0], [b.x1, b.y1]]))
    points = [tuple(corners[0]), tuple(corners[1])]
    return _pack(crop, click_r, points, mask_r, input_size, sigma)
