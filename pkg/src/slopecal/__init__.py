"""Penalty calibration for least-squares model selection by the slope heuristics."""

from .calibrate import (
    CalibrationError,
    DegenerateThresholdWarning,
    NoJumpError,
    ThresholdConfig,
    ThresholdNotReachedError,
    calibrate,
    kmin_maxjump,
    kmin_slope,
    kmin_thresh,
)
from .path import brute_force_argmin, compute_path
from .penalty import PenaltyShape, shape_dimension, shape_known, shape_plugin
from .regressogram import (
    InadmissibleModelError,
    OracleQuantities,
    TrueModelSpec,
    empirical_risk,
    sine_truth,
    fit,
    generate,
    oracle_quantities,
)
from .types import (
    CalibrationReport,
    FittedRegressogram,
    ModelScore,
    PartitionModel,
    Sample,
    SelectionPath,
    total_order,
)

__version__ = "0.1.0"
