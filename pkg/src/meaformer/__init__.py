"""Click-guided lesion RECIST diameter measurement and segmentation.

A small multi-task network (segmentation + endpoint heatmaps + keypoint
regression on transformer queries) together with the measurement geometry:
RECIST diameter extraction from masks, lesion-of-interest cropping, source
fusion and longitudinal response assessment.  Ships a synthetic phantom
generator so training and evaluation run end to end on a single CPU.
"""

__version__ = "0.1.0"
