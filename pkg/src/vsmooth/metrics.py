"""Calibration and confidence metrics.

Confidence is the max-probability of a prediction. Entropies are in nats.
Sums over samples use ``math.fsum`` so the result does not depend on the
order samples arrive in.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from vsmooth.core import ArrayLike, log_softmax
from vsmooth.errors import EmptyEvaluationSet, InvalidInput, InvalidLabel, LengthMismatch

LOG_BASE = "e"


@dataclass(frozen=True)
class ReliabilityBin:
    lo: float
    hi: float
    count: int
    mean_confidence: float
    # NaN marks an empty bin
    empirical_accuracy: float

    @property
    def empty(self) -> bool:
        return self.count == 0


@dataclass(frozen=True)
class CalibrationReport:
    bins: list[ReliabilityBin]
    ece: float
    brier: float
    mean_entropy: float
    mean_kl_to_uniform: float
    accuracy: float
    n: int
    log_base: str = LOG_BASE

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bins"] = [
            {**asdict(b), "empirical_accuracy": None if b.empty else b.empirical_accuracy,
             "mean_confidence": None if b.empty else b.mean_confidence}
            for b in self.bins
        ]
        return d


def predictive_entropy(p: ArrayLike) -> float:
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def kl_to_uniform(p: ArrayLike) -> float:
    """D_KL(p || uniform) = ln K - H(p)."""
    p = np.asarray(p, dtype=np.float64)
    return max(math.log(p.shape[-1]) - predictive_entropy(p), 0.0)


def _check_label(label: int, K: int) -> int:
    if int(label) != label or not 0 <= label < K:
        raise InvalidLabel(f"label {label} outside [0, {K})")
    return int(label)


def brier(p: ArrayLike, label: int) -> float:
    p = np.asarray(p, dtype=np.float64)
    label = _check_label(label, p.shape[-1])
    target = np.zeros_like(p)
    target[label] = 1.0
    return float(np.sum((p - target) ** 2))


def cross_entropy(logits: ArrayLike, label: int) -> float:
    z = np.asarray(logits, dtype=np.float64)
    label = _check_label(label, z.shape[-1])
    return float(-log_softmax(z)[label])


def _as_predictions(predictions, labels) -> tuple[np.ndarray, np.ndarray]:
    P = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels)
    if P.ndim != 2:
        raise InvalidInput("predictions must be an N x K array")
    if P.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{P.shape[0]} predictions but {y.shape[0]} labels")
    if y.size and (np.any(y < 0) or np.any(y >= P.shape[1])):
        raise InvalidLabel(f"labels must lie in [0, {P.shape[1]})")
    return P, y.astype(np.int64)


def bin_index(confidence: np.ndarray, n_bins: int) -> np.ndarray:
    """Half-open [lo, hi) bins; confidence 1.0 goes into the top bin."""
    idx = np.floor(np.asarray(confidence) * n_bins).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


def reliability_bins(
    predictions: Sequence[ArrayLike] | np.ndarray, labels: Sequence[int] | np.ndarray, n_bins: int = 10
) -> list[ReliabilityBin]:
    if n_bins < 2:
        raise InvalidInput(f"need n_bins >= 2, got {n_bins}")
    P, y = _as_predictions(predictions, labels)
    conf = P.max(axis=1)
    correct = (P.argmax(axis=1) == y).astype(np.float64)
    idx = bin_index(conf, n_bins)
    bins = []
    for b in range(n_bins):
        mask = idx == b
        count = int(mask.sum())
        if count:
            mc = math.fsum(conf[mask]) / count
            acc = math.fsum(correct[mask]) / count
        else:
            mc = acc = float("nan")
        bins.append(ReliabilityBin(lo=b / n_bins, hi=(b + 1) / n_bins, count=count,
                                   mean_confidence=mc, empirical_accuracy=acc))
    return bins


def ece_from_bins(bins: Sequence[ReliabilityBin], n: int) -> float:
    return math.fsum(
        (b.count / n) * abs(b.empirical_accuracy - b.mean_confidence) for b in bins if b.count
    )


def ece(predictions, labels, n_bins: int = 10) -> float:
    bins = reliability_bins(predictions, labels, n_bins)
    n = sum(b.count for b in bins)
    if n == 0:
        raise EmptyEvaluationSet("ECE of an empty set")
    return ece_from_bins(bins, n)


def evaluate(predictions, labels, n_bins: int = 10) -> CalibrationReport:
    P, y = _as_predictions(predictions, labels)
    n = P.shape[0]
    if n == 0:
        raise EmptyEvaluationSet("nothing to evaluate")
    bins = reliability_bins(P, y, n_bins)
    onehot = np.zeros_like(P)
    onehot[np.arange(n), y] = 1.0
    briers = ((P - onehot) ** 2).sum(axis=1)
    entropies = np.array([predictive_entropy(p) for p in P])
    lnK = math.log(P.shape[1])
    kls = np.maximum(lnK - entropies, 0.0)
    return CalibrationReport(
        bins=bins,
        ece=ece_from_bins(bins, n),
        brier=math.fsum(briers) / n,
        mean_entropy=math.fsum(entropies) / n,
        mean_kl_to_uniform=math.fsum(kls) / n,
        accuracy=math.fsum(P.argmax(axis=1) == y) / n,
        n=n,
    )
