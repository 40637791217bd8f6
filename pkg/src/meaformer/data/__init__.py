"""Synthetic phantom data: generation, augmentation, dataset files."""

from .phantom import (Phantom, PhantomConfig, generate_phantom, sample_click,  # noqa: F401
                      quad_pseudo_mask)
from .augment import AugmentationConfig, augment  # noqa: F401
from .dataset_io import (save_dataset, load_dataset, iter_dataset,  # noqa: F401
                         dataset_count)
