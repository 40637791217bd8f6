"""Longitudinal tumor response classification.

Thresholds are the external clinical-standard constants for single-lesion
bidimensional measurements: complete response at zero residual diameter,
partial response at >=30% decrease, progressive disease at >=20% increase
that is also >=5 mm absolute, stable disease otherwise.  The baseline
serves as nadir in this single-pair setting.
"""

from enum import Enum

from ..errors import ContractViolation

PR_DECREASE = 0.30
PD_INCREASE = 0.20
PD_ABS_MM = 5.0


class ResponseClass(Enum):
    COMPLETE_RESPONSE = "CR"
    PARTIAL_RESPONSE = "PR"
    PROGRESSIVE_DISEASE = "PD"
    STABLE_DISEASE = "SD"


def _long_mm(measurement):
    if hasattr(measurement, "long_mm"):
        return float(measurement.long_mm)
    return float(measurement)


def classify_response(baseline, followup) -> ResponseClass:
    """RECIST 1.1 class for a baseline/followup long-diameter pair (mm)."""
    base = _long_mm(baseline)
    post = _long_mm(followup)
    if base <= 0:
        raise ContractViolation("baseline diameter must be positive")
    if post < 0:
        raise ContractViolation("followup diameter must be non-negative")
    if post == 0:
        return ResponseClass.COMPLETE_RESPONSE
    change = (post - base) / base
    if change <= -PR_DECREASE:
        return ResponseClass.PARTIAL_RESPONSE
    if change >= PD_INCREASE and (post - base) >= PD_ABS_MM:
        return ResponseClass.PROGRESSIVE_DISEASE
    return ResponseClass.STABLE_DISEASE


def percent_change(baseline, followup) -> float:
    base = _long_mm(baseline)
    if base <= 0:
        raise ContractViolation("baseline diameter must be positive")
    return 100.0 * (_long_mm(followup) - base) / base
