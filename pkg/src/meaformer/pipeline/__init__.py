"""Orchestration: training, two-step measurement, evaluation, assessment."""

from .train import TrainConfig, train, training_losses, validate  # noqa: F401
from .supervision import build_step1_sample, build_step2_sample, HEATMAP_ORDER  # noqa: F401
from .measure import MeasurementReport, measure, contour_of  # noqa: F401
from .evaluate import EvalSummary, evaluate, FULL_SCALE_REFERENCE  # noqa: F401
from .response import (ResponseClass, classify_response, percent_change,  # noqa: F401
                       PR_DECREASE, PD_INCREASE, PD_ABS_MM)
from .volume import segment_volume  # noqa: F401
