"""Two-step click-to-measurement inference.

Step 1 (whole image, resized to the model input): regress the two box
corners.  Build the LOI (square, twice the box's long side), crop/resize it,
run step 2 there, then decode three diameter sources (segmentation,
heatmaps, keypoint regression), fuse them, and map everything back to
original image coordinates through the stored LOI affine.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateGeometryError, EmptyMaskError
from ..geometry import (AffineMap, Box, RecistEndpoints, RecistMeasurement,
                        box_iou, click_channels, crop_resize, decode_heatmap,
                        dice, fuse_diameters, length_error_mm, loi_from_box,
                        mask_contour, recist_from_mask)
from ..numcore import kernels as K
from ..numcore import no_grad

MIN_BOX_SIDE_PX = 0.5   # narrower step-1 boxes are treated as degenerate
SOURCES = ("segmentation", "heatmap", "regression")


@dataclass
class MeasurementReport:
    box: Box | None
    loi: Box | None
    loi_affine: AffineMap | None
    seg_mask: np.ndarray | None            # original-image coordinates
    measurements: dict                      # source -> RecistMeasurement (original coords)
    fused: RecistMeasurement | None
    flags: list = field(default_factory=list)
    box_iou: float | None = None
    dice: float | None = None
    errors_mm: dict | None = None           # source -> (long, short)

    @property
    def failed(self) -> bool:
        return self.fused is None


def _forward(model, image_plane, click):
    spot, dist = click_channels(click, image_plane.shape)
    inp = np.stack([np.asarray(image_plane, dtype=np.float32), spot, dist])
    with no_grad():
        head, kps = model(inp)
    return head, kps[-1].data[0]


def _unwarp_mask(seg_prob, affine, out_shape):
    """Binarized step-2 segmentation resampled onto the original grid."""
    h, w = out_shape
    inv = affine.invert()
    ys, xs = np.mgrid[0:h, 0:w]
    pts = np.stack([xs.ravel(), ys.ravel()], axis=-1).astype(float)
    src = inv.apply(pts)
    s2 = seg_prob.shape[0]
    inside = ((src[:, 0] >= -0.5) & (src[:, 0] <= s2 - 0.5)
              & (src[:, 1] >= -0.5) & (src[:, 1] <= s2 - 0.5))
    vals = K.plane_gather(np.ascontiguousarray(seg_prob, dtype=np.float64),
                          src[:, 0], src[:, 1])
    return ((vals >= 0.5) & inside).reshape(h, w)


def measure(ct_image, click, spacing, step1_model, step2_model,
            ground_truth=None) -> MeasurementReport:
    """Full pipeline on one image; deterministic for fixed checkpoints."""
    img = np.asarray(ct_image, dtype=np.float32)
    h, w = img.shape
    flags = []

    # -- step 1: box ---------------------------------------------------------
    s1 = step1_model.cfg.input_size
    whole = Box(0.0, 0.0, float(w - 1), float(h - 1))
    img_s1, aff1 = crop_resize(img, whole, s1)
    click_s1 = tuple(aff1.invert().apply(np.asarray(click, dtype=float)))
    _, corners = _forward(step1_model, img_s1, click_s1)
    pts_s1 = corners * (s1 - 1)
    pts = aff1.apply(pts_s1)
    if (abs(pts[0, 0] - pts[1, 0]) < MIN_BOX_SIDE_PX * aff1.sx
            or abs(pts[0, 1] - pts[1, 1]) < MIN_BOX_SIDE_PX * aff1.sy):
        return MeasurementReport(None, None, None, None, {}, None,
                                 flags=["degenerate_box"])
    box = Box.from_corners(pts[0], pts[1])

    # -- step 2: LOI measurement ---------------------------------------------
    s2 = step2_model.cfg.input_size
    loi = loi_from_box(box, (h, w))
    img_s2, aff2 = crop_resize(img, loi, s2)
    click_s2 = aff2.invert().apply(np.asarray(click, dtype=float))
    if not (0 <= click_s2[0] <= s2 - 1 and 0 <= click_s2[1] <= s2 - 1):
        click_s2 = np.clip(click_s2, 0, s2 - 1)
        flags.append("click_clamped_to_loi")
    head, kp = _forward(step2_model, img_s2, tuple(click_s2))
    seg_prob = head.seg.data[0, 0]
    heat = head.heatmaps.data[0]

    measurements = {}
    # segmentation source
    try:
        ep = recist_from_mask(seg_prob >= 0.5)
        measurements["segmentation"] = RecistMeasurement.from_endpoints(
            ep.transformed(aff2), spacing, "segmentation")
    except (EmptyMaskError, DegenerateGeometryError):
        flags.append("segmentation_degenerate")
    # heatmap source
    decoded = []
    heat_ok = True
    for c in range(heat.shape[0]):
        (px, py), degen = decode_heatmap(heat[c])
        decoded.append((px, py))
        heat_ok = heat_ok and not degen
    if heat_ok and len(decoded) == 4:
        ep = RecistEndpoints(decoded[0], decoded[1], decoded[2], decoded[3])
        m = RecistMeasurement.from_endpoints(ep.transformed(aff2), spacing, "heatmap")
        if not m.degenerate:
            measurements["heatmap"] = m
        else:
            flags.append("heatmap_degenerate")
    else:
        flags.append("heatmap_degenerate")
    # regression source
    kp_px = kp * (s2 - 1)
    ep = RecistEndpoints(tuple(kp_px[0]), tuple(kp_px[1]),
                         tuple(kp_px[2]), tuple(kp_px[3]))
    m = RecistMeasurement.from_endpoints(ep.transformed(aff2), spacing, "regression")
    if not m.degenerate:
        measurements["regression"] = m
    else:
        flags.append("regression_degenerate")

    fused = None
    if "segmentation" in measurements:
        fused = fuse_diameters(measurements["segmentation"],
                               measurements.get("heatmap"),
                               measurements.get("regression"))
    elif measurements:
        # no segmentation reference: fall back to the first valid source
        ref_name = next(s for s in SOURCES if s in measurements)
        ref = measurements[ref_name]
        fused = RecistMeasurement.from_endpoints(
            ref.endpoints, spacing, "fused", [f"fusion_reference_{ref_name}"])
        flags.append("fusion_without_segmentation")

    seg_mask = _unwarp_mask(seg_prob, aff2, (h, w))

    report = MeasurementReport(box=box, loi=loi, loi_affine=aff2,
                               seg_mask=seg_mask, measurements=measurements,
                               fused=fused, flags=flags)

    if ground_truth is not None:
        report.box_iou = box_iou(box, ground_truth.box)
        report.dice = dice(seg_mask, ground_truth.mask)
        gt_m = RecistMeasurement.from_endpoints(
            ground_truth.recist, ground_truth.spacing_mm_per_px, "ground_truth")
        report.errors_mm = {}
        for name, m in measurements.items():
            report.errors_mm[name] = length_error_mm(m, gt_m)
        if fused is not None:
            report.errors_mm["fused"] = length_error_mm(fused, gt_m)
    return report


def contour_of(report: MeasurementReport):
    if report.seg_mask is None or not report.seg_mask.any():
        return np.zeros((0, 2))
    return mask_contour(report.seg_mask)
