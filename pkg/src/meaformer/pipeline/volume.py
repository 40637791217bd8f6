"""3D segmentation by stacking per-slice 2D results."""

import numpy as np

from ..errors import ContractViolation
from .measure import measure


def segment_volume(slices, clicks, spacing, step1_model, step2_model,
                   gt_volume=None, measure_fn=None):
    """Run the 2D pipeline slice by slice and stack the masks.

    `clicks[i]` may be None to skip slice i (empty plane).  `measure_fn`
    overrides the per-slice measurement (testing hook); it must return an
    object with a `seg_mask` attribute or None.

    Returns (volume mask, dice3d or None, flags).
    """
    if not any(c is not None for c in clicks):
        raise ContractViolation("segment_volume needs at least one clicked slice")
    if len(slices) != len(clicks):
        raise ContractViolation("one click entry per slice required")
    flags = []
    planes = []
    for i, (img, click) in enumerate(zip(slices, clicks)):
        img = np.asarray(img)
        if click is None:
            planes.append(np.zeros(img.shape, dtype=bool))
            continue
        if measure_fn is not None:
            rep = measure_fn(img, click)
        else:
            rep = measure(img, click, spacing, step1_model, step2_model)
        if rep is None or getattr(rep, "seg_mask", None) is None:
            planes.append(np.zeros(img.shape, dtype=bool))
            flags.append(f"slice_failed[{i}]")
            continue
        planes.append(np.asarray(rep.seg_mask, dtype=bool))
    vol = np.stack(planes)
    dice3d = None
    if gt_volume is not None:
        gt = np.asarray(gt_volume, dtype=bool)
        denom = int(vol.sum()) + int(gt.sum())
        dice3d = 1.0 if denom == 0 else 2.0 * int((vol & gt).sum()) / denom
    return vol, dice3d, flags
