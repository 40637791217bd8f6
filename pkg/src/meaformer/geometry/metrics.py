"""Evaluation metrics."""

import numpy as np


def dice(pred_mask, gt_mask) -> float:
    """2|A.B| / (|A|+|B|); two empty masks count as perfect agreement."""
    a = np.asarray(pred_mask).astype(bool)
    b = np.asarray(gt_mask).astype(bool)
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / denom


def length_error_mm(pred, gt):
    """Absolute long/short diameter errors in millimetres."""
    return abs(pred.long_mm - gt.long_mm), abs(pred.short_mm - gt.short_mm)
