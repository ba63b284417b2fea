"""Variance-based smoothing.

The temperature applied to the conventional logits is derived from how much
the sub-patch (or ensemble member) logits disagree with each other:

    sigma_k     = sample std of class-k logits across rows
    sigma_bar   = mean_k sigma_k
    sigma_tilde = max(alpha * (sigma_bar + beta), 1)
    p           = softmax(mean logits / sigma_tilde)

Because sigma_tilde >= 1 and temperature scaling is monotone, the predicted
class never changes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from vsmooth.core import (
    ArrayLike,
    BetaPolicy,
    EnsembleLogits,
    LogitMatrix,
    PooledLogits,
    SigmaStats,
    SmoothingConfig,
    as_matrix,
    mean_over_rows,
    softmax,
)
from vsmooth.errors import (
    EmptyValidationSet,
    InsufficientMembers,
    InsufficientRows,
    InvalidInput,
    InvalidTemperature,
    KernelTooLarge,
)


@dataclass(frozen=True)
class BetaCalibration:
    beta: float
    policy: BetaPolicy
    # validation statistics the value was derived from
    n: int = 0
    mean: float = float("nan")
    percentile: float = float("nan")


def pool_logits(logits: LogitMatrix | ArrayLike, kernel: int, stride: int) -> PooledLogits:
    z = as_matrix(logits)
    T = z.shape[0]
    if kernel < 1 or stride < 1:
        raise InvalidInput("kernel and stride must be >= 1")
    if kernel > T:
        raise KernelTooLarge(f"kernel {kernel} exceeds row count {T}")
    if kernel == 1 and stride == 1:
        return PooledLogits(z, kernel=1, stride=1)
    windows = np.lib.stride_tricks.sliding_window_view(z, kernel, axis=0)[::stride]
    pooled = windows.mean(axis=-1)
    return PooledLogits(pooled, kernel=kernel, stride=stride)


def _row_std(z: np.ndarray) -> np.ndarray:
    mu = z.mean(axis=0)
    return np.sqrt(((z - mu) ** 2).sum(axis=0) / (z.shape[0] - 1))


def class_sigma(pooled: PooledLogits | LogitMatrix | ArrayLike) -> np.ndarray:
    """Per-class sample standard deviation across (pooled) rows."""
    z = as_matrix(pooled)
    if z.shape[0] < 2:
        raise InsufficientRows(f"need at least 2 rows for a sample std, got {z.shape[0]}")
    return _row_std(z)


def ensemble_sigma(ensemble: EnsembleLogits | ArrayLike) -> np.ndarray:
    if not isinstance(ensemble, EnsembleLogits):
        arr = np.asarray(ensemble, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise InsufficientMembers("ensemble needs at least 2 members")
        ensemble = EnsembleLogits(arr)
    return _row_std(ensemble.values)


def aggregate_sigma(per_class: ArrayLike, alpha: float, beta: float) -> SigmaStats:
    sigma = np.asarray(per_class, dtype=np.float64)
    if sigma.ndim != 1 or sigma.size == 0:
        raise InvalidInput("per-class sigma must be a non-empty vector")
    if not np.all(np.isfinite(sigma)) or np.any(sigma < 0):
        raise InvalidInput("per-class sigma must be finite and non-negative")
    if not (np.isfinite(alpha) and alpha > 0) or not np.isfinite(beta):
        raise InvalidInput(f"need finite alpha > 0 and finite beta, got {alpha}, {beta}")
    sigma_bar = float(sigma.mean())
    # max() keeps 1.0 exactly whenever the affine value is below it
    sigma_tilde = max(alpha * (sigma_bar + beta), 1.0)
    if not np.isfinite(sigma_tilde):
        raise InvalidInput("sigma_tilde overflowed")
    return SigmaStats(per_class=sigma, sigma_bar=sigma_bar, sigma_tilde=float(sigma_tilde))


def smooth_predict(mean_logits: ArrayLike, sigma_tilde: float) -> np.ndarray:
    if not sigma_tilde >= 1.0:
        raise InvalidTemperature(f"sigma_tilde must be >= 1, got {sigma_tilde}")
    return softmax(np.asarray(mean_logits, dtype=np.float64) / sigma_tilde)


def variance_smoothed_forward(
    logits: LogitMatrix | ArrayLike,
    config: SmoothingConfig,
    beta: BetaCalibration | float,
) -> tuple[np.ndarray, SigmaStats]:
    """Smoothed prediction for one input plus the statistics behind it.

    Pooling only feeds the variance estimate; the logits that get divided by
    the temperature are the mean over the unpooled rows.
    """
    z = logits if isinstance(logits, LogitMatrix) else LogitMatrix(logits)
    b = beta.beta if isinstance(beta, BetaCalibration) else float(beta)
    pooled = pool_logits(z, config.pool_kernel, config.pool_stride)
    stats = aggregate_sigma(class_sigma(pooled), config.alpha, b)
    return smooth_predict(mean_over_rows(z), stats.sigma_tilde), stats


def sigma_bar_of(logits: LogitMatrix | ArrayLike, config: SmoothingConfig) -> float:
    pooled = pool_logits(logits, config.pool_kernel, config.pool_stride)
    return float(class_sigma(pooled).mean())


def percentile_linear(values: ArrayLike, q: float) -> float:
    """q-th percentile, linear interpolation between closest order statistics."""
    return float(np.percentile(np.asarray(values, dtype=np.float64), q, method="linear"))


def calibrate_beta(validation_sigma_bars: Sequence[float], policy: BetaPolicy) -> BetaCalibration:
    vals = np.asarray(validation_sigma_bars, dtype=np.float64)
    if vals.size == 0:
        raise EmptyValidationSet("no validation sigma-bar values")
    if vals.size < 2:
        raise InvalidInput("need at least 2 validation values")
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise InvalidInput("validation sigma-bar values must be finite and >= 0")
    mean = float(vals.mean())
    pct = float("nan")
    if policy.kind == "fixed":
        beta = policy.value
    elif policy.kind == "mean_offset":
        beta = mean + policy.value
    else:
        pct = percentile_linear(vals, policy.value)
        beta = -pct
    return BetaCalibration(beta=float(beta), policy=policy, n=int(vals.size), mean=mean, percentile=pct)


def ensemble_smoothed_predict(
    ensemble: EnsembleLogits | ArrayLike, alpha: float, beta: float
) -> tuple[np.ndarray, SigmaStats]:
    ens = ensemble if isinstance(ensemble, EnsembleLogits) else EnsembleLogits(ensemble)
    stats = aggregate_sigma(ensemble_sigma(ens), alpha, beta)
    return smooth_predict(mean_over_rows(ens), stats.sigma_tilde), stats
