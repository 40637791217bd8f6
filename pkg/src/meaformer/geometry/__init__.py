"""Non-learned measurement geometry."""

from .boxes import AffineMap, Box, box_iou, crop_resize, loi_from_box, mask_box  # noqa: F401
from .clicks import click_channels, CLICK_SIGMA  # noqa: F401
from .heatmaps import make_gt_heatmap, decode_heatmap, DEFAULT_SIGMA  # noqa: F401
from .masks import (boundary_pixels, boundary_distance_map, largest_component,  # noqa: F401
                    mask_contour)
from .metrics import dice, length_error_mm  # noqa: F401
from .recist import (RecistEndpoints, RecistMeasurement, recist_from_mask,  # noqa: F401
                     fuse_diameters, convex_hull, hull_diameter,
                     perpendicular_chords)
