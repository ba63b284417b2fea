"""Logit-only comparison methods: conventional softmax, naive sub-patch
averaging, ensemble averaging and fitted scalar temperature scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from vsmooth.core import (
    ArrayLike,
    EnsembleLogits,
    LogitMatrix,
    as_matrix,
    log_softmax,
    mean_over_rows,
    softmax,
)
from vsmooth.errors import (
    EmptyValidationSet,
    InsufficientMembers,
    InvalidLabel,
    InvalidTemperature,
    LengthMismatch,
)

T_MIN = 0.05
T_MAX = 20.0
GOLDEN_MAX_ITER = 200
GOLDEN_TOL = 1e-6
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FittedTemperature:
    t: float
    final_nll: float
    iterations: int
    at_bound: bool = False


def conventional_predict(logits: LogitMatrix | ArrayLike) -> np.ndarray:
    return softmax(mean_over_rows(as_matrix(logits)))


def naive_subpatch_average(logits: LogitMatrix | ArrayLike) -> np.ndarray:
    """Mean of the per-row softmax distributions."""
    return softmax(as_matrix(logits)).mean(axis=0)


def ensemble_mean_predict(members: EnsembleLogits | ArrayLike) -> np.ndarray:
    if not isinstance(members, EnsembleLogits):
        arr = np.asarray(members, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise InsufficientMembers("ensemble needs at least 2 members")
        members = EnsembleLogits(arr)
    return softmax(members.values).mean(axis=0)


def apply_temperature(mean_logits: ArrayLike, t: float) -> np.ndarray:
    if not (np.isfinite(t) and t > 0):
        raise InvalidTemperature(f"temperature must be positive, got {t}")
    return softmax(np.asarray(mean_logits, dtype=np.float64) / t)


def mean_nll(logits: np.ndarray, labels: np.ndarray, t: float = 1.0) -> float:
    """Mean negative log-likelihood of softmax(logits / t)."""
    logp = log_softmax(logits / t)
    return float(-logp[np.arange(len(labels)), labels].mean())


def _validate_labeled(val_mean_logits, labels) -> tuple[np.ndarray, np.ndarray]:
    z = np.asarray(val_mean_logits, dtype=np.float64)
    y = np.asarray(labels)
    if z.size == 0 or y.size == 0:
        raise EmptyValidationSet("temperature fit needs at least one labeled sample")
    if z.ndim == 1:
        z = z[None, :]
    if z.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{z.shape[0]} logit vectors but {y.shape[0]} labels")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise InvalidLabel("labels must be integers")
        y = y.astype(np.int64)
    if np.any(y < 0) or np.any(y >= z.shape[1]):
        raise InvalidLabel(f"labels must lie in [0, {z.shape[1]})")
    return z, y


def fit_temperature(
    val_mean_logits: Sequence[ArrayLike] | np.ndarray, labels: Sequence[int] | np.ndarray
) -> FittedTemperature:
    """Scalar temperature minimizing validation NLL.

    Golden-section search over log t in [log 0.05, log 20]; the NLL is convex
    in 1/t, hence unimodal in log t, so the bracket converges to the global
    minimum. Stops once the bracket is narrower than 1e-6 or after 200
    iterations.
    """
    z, y = _validate_labeled(val_mean_logits, labels)

    def f(log_t: float) -> float:
        return mean_nll(z, y, math.exp(log_t))

    a, b = math.log(T_MIN), math.log(T_MAX)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a >= GOLDEN_TOL and it < GOLDEN_MAX_ITER:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        it += 1
    log_t = 0.5 * (a + b)
    t = math.exp(log_t)
    nll = f(log_t)
    nll_unit = mean_nll(z, y, 1.0)
    if nll_unit < nll:
        # only reachable through rounding near a flat optimum
        t, nll = 1.0, nll_unit
    at_bound = log_t - math.log(T_MIN) < 10 * GOLDEN_TOL or math.log(T_MAX) - log_t < 10 * GOLDEN_TOL
    return FittedTemperature(t=t, final_nll=nll, iterations=it, at_bound=at_bound)
