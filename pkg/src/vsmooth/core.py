"""Shared numeric types, the stable softmax, and seed derivation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from vsmooth.errors import (
    EmptyInput,
    InsufficientMembers,
    InvalidInput,
    InvalidLogits,
)

PROB_SUM_TOL = 1e-9

ArrayLike = Union[np.ndarray, list, tuple]


def _frozen(values: ArrayLike, ndim: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise InvalidLogits(f"{what} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidLogits(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LogitMatrix:
    """T sub-patch logit rows by K class columns."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values, 2, "LogitMatrix")
        if arr.shape[0] < 1:
            raise EmptyInput("LogitMatrix needs at least one row")
        if arr.shape[1] < 2:
            raise InvalidLogits(f"LogitMatrix needs K >= 2 classes, got {arr.shape[1]}")
        object.__setattr__(self, "values", arr)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PooledLogits(LogitMatrix):
    """Window-averaged logits; T here is the pooled window count."""

    kernel: int = 1
    stride: int = 1


@dataclass(frozen=True)
class EnsembleLogits:
    """M member logit rows by K class columns, one input."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values, 2, "EnsembleLogits")
        if arr.shape[0] < 2:
            raise InsufficientMembers(f"ensemble needs M >= 2 members, got {arr.shape[0]}")
        if arr.shape[1] < 2:
            raise InvalidLogits(f"EnsembleLogits needs K >= 2 classes, got {arr.shape[1]}")
        object.__setattr__(self, "values", arr)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SigmaStats:
    per_class: np.ndarray
    sigma_bar: float
    sigma_tilde: float


@dataclass(frozen=True)
class BetaPolicy:
    """How the offset beta is obtained.

    kind is one of ``fixed`` (value is beta), ``mean_offset`` (value is added
    to the validation mean of sigma-bar) or ``neg_percentile`` (value is the
    percentile q in (0, 100)).
    """

    kind: str
    value: float

    KINDS = ("fixed", "mean_offset", "neg_percentile")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidInput(f"unknown beta policy {self.kind!r}")
        if not np.isfinite(self.value):
            raise InvalidInput("beta policy value must be finite")
        if self.kind == "neg_percentile" and not 0.0 < self.value < 100.0:
            raise InvalidInput(f"percentile must lie in (0, 100), got {self.value}")

    @classmethod
    def fixed(cls, value: float) -> "BetaPolicy":
        return cls("fixed", float(value))

    @classmethod
    def mean_offset(cls, offset: float) -> "BetaPolicy":
        return cls("mean_offset", float(offset))

    @classmethod
    def neg_percentile(cls, q: float) -> "BetaPolicy":
        return cls("neg_percentile", float(q))


@dataclass(frozen=True)
class SmoothingConfig:
    alpha: float = 1.0
    beta_policy: BetaPolicy = field(default_factory=lambda: BetaPolicy.fixed(0.0))
    pool_kernel: int = 1
    pool_stride: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidInput(f"alpha must be positive, got {self.alpha}")
        if self.pool_kernel < 1 or self.pool_stride < 1:
            raise InvalidInput("pool kernel and stride must be >= 1")


def as_matrix(logits: LogitMatrix | EnsembleLogits | ArrayLike) -> np.ndarray:
    if isinstance(logits, (LogitMatrix, EnsembleLogits)):
        return logits.values
    return LogitMatrix(logits).values


def softmax(logits: ArrayLike) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim < 1 or z.shape[-1] < 2:
        raise InvalidLogits("softmax needs at least two classes")
    if not np.all(np.isfinite(z)):
        raise InvalidLogits("softmax input contains non-finite entries")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: ArrayLike) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def mean_over_rows(matrix: LogitMatrix | ArrayLike) -> np.ndarray:
    """Column-wise mean, i.e. the conventional pre-softmax output."""
    if isinstance(matrix, (LogitMatrix, EnsembleLogits)):
        arr = matrix.values
    else:
        arr = np.asarray(matrix, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise EmptyInput("mean_over_rows needs a non-empty 2-D matrix")
    # shifting by the first row makes identical rows average back exactly
    return arr[0] + (arr - arr[0]).mean(axis=0)


def argmax(v: ArrayLike) -> int:
    # np.argmax already returns the first maximal index
    return int(np.argmax(np.asarray(v)))


def check_prob_vector(p: ArrayLike, tol: float = PROB_SUM_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise InvalidInput("probability vector must be 1-D with K >= 2")
    if np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > tol:
        raise InvalidInput("not a valid probability vector")
    return p


def derive_seed(seed: int, *keys) -> int:
    """Stable 64-bit seed from a root seed and any number of str/int keys."""
    h = hashlib.blake2b(digest_size=8)
    h.update(repr((int(seed),) + tuple(keys)).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys) if keys else seed)
