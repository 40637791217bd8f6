"""Training objectives.

Five terms: segmentation (BCE + soft IoU), heatmap MSE, per-decoder-layer L1
coordinate regression, and two consistency penalties tying the regressed
keypoints to the heatmap peaks and to the segmentation boundary.  The total
is their weighted sum; the step-1 variant drops the consistency terms.

Consistency sampling is bilinear so gradients reach the regressed
coordinates; the distance map in the boundary term is a constant (no
gradient flows through the binarization).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation
from .geometry import boundary_distance_map
from .numcore import clip, log, planes_sample, tabs, tmean, tsum
from .numcore import tensor as T

BCE_EPS = 1e-6
IOU_EPS = 1e-6


@dataclass(frozen=True)
class LossWeights:
    seg: float = 1.0
    heatmap: float = 10.0
    regression: float = 1.0
    cons_heatmap: float = 0.01
    cons_boundary: float = 0.01

    def __post_init__(self):
        if min(self.seg, self.heatmap, self.regression,
               self.cons_heatmap, self.cons_boundary) < 0:
            raise ContractViolation("loss weights must be non-negative")


@dataclass
class SupervisionPack:
    """Per-sample ground truth: mask, one heatmap per query, normalized keypoints."""

    gt_mask: np.ndarray        # (H, W) binary
    gt_heatmaps: np.ndarray    # (n_queries, H, W), peak 1 per plane
    gt_keypoints: np.ndarray   # (n_queries, 2) in [0, 1]
    flags: list = field(default_factory=list)


def _as4d(t):
    t = T.as_tensor(t)
    if t.ndim == 2:
        return T.reshape(t, (1, 1) + t.shape)
    if t.ndim == 3:
        return T.reshape(t, (1,) + t.shape)
    return t


def seg_loss(seg, gt_mask):
    """BCE + soft IoU; `seg` holds probabilities in (0, 1)."""
    s = _as4d(seg)
    g = np.asarray(gt_mask, dtype=s.dtype).reshape(s.shape)
    gt = T.Tensor(g)
    sc = clip(s, BCE_EPS, 1.0 - BCE_EPS)
    bce = -tmean(gt * log(sc) + T.Tensor(1.0 - g) * log(1.0 - sc))
    inter = tsum(s * gt, axis=(1, 2, 3))
    union = tsum(s, axis=(1, 2, 3)) + T.Tensor(g.sum(axis=(1, 2, 3)) + IOU_EPS) - inter
    iou = 1.0 - tmean(inter / union)
    return bce + iou


def heatmap_loss(heatmaps, gt_heatmaps):
    """Mean squared error over all channels and pixels."""
    m = T.as_tensor(heatmaps)
    g = np.asarray(gt_heatmaps, dtype=m.dtype).reshape(m.shape)
    d = m - T.Tensor(g)
    return tmean(d * d)


def regression_loss(keypoints_per_layer, gt_keypoints):
    """Sum over decoder layers of the mean absolute coordinate error."""
    total = None
    for kp in keypoints_per_layer:
        kp = T.as_tensor(kp)
        g = np.asarray(gt_keypoints, dtype=kp.dtype).reshape(kp.shape)
        term = tmean(tabs(kp - T.Tensor(g)))
        total = term if total is None else total + term
    if total is None:
        raise ContractViolation("regression_loss needs at least one layer")
    return total


def _flatten_keypoints(heat_like, keypoints):
    """(N,Q,H,W)+(N,Q,2) or (Q,H,W)+(Q,2) -> stacked planes + pixel coords."""
    m = T.as_tensor(heat_like)
    kp = T.as_tensor(keypoints)
    if m.ndim == 3:
        m = T.reshape(m, (1,) + m.shape)
        kp = T.reshape(kp, (1,) + kp.shape)
    n, q, h, w = m.shape
    planes = T.reshape(m, (n * q, h, w))
    kpf = T.reshape(kp, (n * q, 2))
    xs = kpf[:, 0] * float(w - 1)
    ys = kpf[:, 1] * float(h - 1)
    return planes, xs, ys


def cons1_loss(heatmaps, keypoints):
    """Mean |M_i(x_i, y_i) - 1| with bilinear sampling of heatmap i at keypoint i.

    `keypoints` are the final decoder layer's normalized coordinates.
    """
    planes, xs, ys = _flatten_keypoints(heatmaps, keypoints)
    vals = planes_sample(planes, xs, ys)
    return tmean(tabs(vals - 1.0))


def cons2_loss(seg, keypoints, threshold=0.5):
    """Mean distance (px) from each keypoint to the binarized-mask boundary.

    The segmentation is binarized at `threshold` and turned into a boundary
    distance map, which is treated as a constant; gradients reach the
    keypoints only.  Samples whose binarized mask is empty are skipped and
    flagged; an all-empty batch yields a zero loss.
    """
    s = _as4d(seg)
    kp = T.as_tensor(keypoints)
    if kp.ndim == 2:
        kp = T.reshape(kp, (1,) + kp.shape)
    n, _, h, w = s.shape
    flags = []
    terms = []
    for i in range(n):
        binary = s.data[i, 0] >= threshold
        if not binary.any():
            flags.append(f"cons2_empty_mask[{i}]")
            continue
        dist = boundary_distance_map(binary).astype(s.dtype)
        xs = kp[i, :, 0] * float(w - 1)
        ys = kp[i, :, 1] * float(h - 1)
        stack = np.broadcast_to(dist, (kp.shape[1],) + dist.shape)
        vals = planes_sample(T.Tensor(np.ascontiguousarray(stack)), xs, ys)
        terms.append(tmean(tabs(vals)))
    if not terms:
        return T.Tensor(np.zeros((), dtype=s.dtype)), flags
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total * (1.0 / len(terms)), flags


def total_loss(parts, weights: LossWeights, include_consistency=True):
    """Weighted combination; returns (scalar tensor, {term: float} log dict)."""
    seg, heat, reg = parts["seg"], parts["heatmap"], parts["regression"]
    out = weights.seg * seg + weights.heatmap * heat + weights.regression * reg
    logs = {"seg": float(seg.data), "heatmap": float(heat.data),
            "regression": float(reg.data)}
    if include_consistency:
        c1, c2 = parts["cons_heatmap"], parts["cons_boundary"]
        out = out + weights.cons_heatmap * c1 + weights.cons_boundary * c2
        logs["cons_heatmap"] = float(c1.data)
        logs["cons_boundary"] = float(c2.data)
    logs["total"] = float(out.data)
    return out, logs
