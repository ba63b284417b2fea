"""Variance-based smoothing for post-hoc calibration of sub-patch and
ensemble classifiers, with baselines, metrics and a synthetic testbed."""

from vsmooth.core import (
    BetaPolicy,
    EnsembleLogits,
    LogitMatrix,
    PooledLogits,
    SigmaStats,
    SmoothingConfig,
    mean_over_rows,
    softmax,
)
from vsmooth.smoothing import (
    BetaCalibration,
    aggregate_sigma,
    calibrate_beta,
    class_sigma,
    ensemble_sigma,
    ensemble_smoothed_predict,
    pool_logits,
    sigma_bar_of,
    smooth_predict,
    variance_smoothed_forward,
)
from vsmooth.baselines import (
    FittedTemperature,
    apply_temperature,
    conventional_predict,
    ensemble_mean_predict,
    fit_temperature,
    naive_subpatch_average,
)
from vsmooth.metrics import (
    CalibrationReport,
    ReliabilityBin,
    brier,
    cross_entropy,
    ece,
    evaluate,
    kl_to_uniform,
    predictive_entropy,
    reliability_bins,
)

__version__ = "0.1.0"
