"""Synthetic task where every sub-patch carries (noisy) label information,
plus a per-patch linear classifier trained on mean-pooled logits."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from vsmooth.core import EnsembleLogits, LogitMatrix, rng_for
from vsmooth.errors import EmptyDataset, InsufficientMembers, InvalidSpec, ShapeError

MAX_PROTOTYPE_COS = 0.9
BATCH_SIZE = 32


@dataclass(frozen=True)
class SynthSample:
    patches: np.ndarray  # T x d
    label: int


@dataclass(frozen=True)
class SynthDatasetSpec:
    n_samples: int = 5000
    K: int = 10
    T: int = 8
    d: int = 16
    signal_strength: float = 1.0
    patch_noise: float = 1.0
    informative_fraction: float = 0.75
    seed: int = 0

    def __post_init__(self):
        ok = (
            self.n_samples >= 1 and self.K >= 2 and self.T >= 2 and self.d >= 1
            and self.signal_strength > 0 and self.patch_noise >= 0
            and 0.0 < self.informative_fraction <= 1.0
        )
        if not ok:
            raise InvalidSpec(f"invalid dataset spec {self}")


# acceptance-run defaults: 5000 train / 1000 val / 1000 test
STANDARD_SPLITS = {"train": 5000, "val": 1000, "test": 1000}


@dataclass(frozen=True)
class PatchClassifier:
    weights: np.ndarray  # K x d
    bias: np.ndarray  # K

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ShapeError(f"weights {w.shape} and bias {b.shape} disagree")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ShapeError("classifier parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]


def class_prototypes(K: int, d: int, seed: int) -> np.ndarray:
    """K random unit vectors with pairwise cosine below 0.9 (rejection sampled)."""
    rng = rng_for(seed, "prototypes")
    protos: list[np.ndarray] = []
    attempts = 0
    while len(protos) < K:
        attempts += 1
        if attempts > 100_000:
            raise InvalidSpec(f"cannot place {K} prototypes in {d} dimensions")
        v = rng.standard_normal(d)
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        v /= norm
        if all(float(v @ u) < MAX_PROTOTYPE_COS for u in protos):
            protos.append(v)
    return np.stack(protos)


def generate_dataset(spec: SynthDatasetSpec, split: str = "train") -> list[SynthSample]:
    """Draw ``spec.n_samples`` samples. Prototypes depend on the seed only, so
    all splits of one seed share them; the samples themselves depend on the
    split name too."""
    protos = class_prototypes(spec.K, spec.d, spec.seed)
    rng = rng_for(spec.seed, "samples", split)
    n_inf = max(1, int(round(spec.informative_fraction * spec.T)))
    labels = rng.integers(0, spec.K, size=spec.n_samples)
    noise = rng.standard_normal((spec.n_samples, spec.T, spec.d))
    out = []
    for i, y in enumerate(labels):
        informative = np.zeros(spec.T, dtype=bool)
        informative[rng.permutation(spec.T)[:n_inf]] = True
        patches = spec.patch_noise * noise[i]
        patches[informative] += spec.signal_strength * protos[y]
        out.append(SynthSample(patches=patches, label=int(y)))
    return out


def generate_splits(spec: SynthDatasetSpec, sizes: dict[str, int] | None = None) -> dict[str, list[SynthSample]]:
    sizes = STANDARD_SPLITS if sizes is None else sizes
    return {name: generate_dataset(replace(spec, n_samples=n), split=name) for name, n in sizes.items()}


def stack(samples: Sequence[SynthSample]) -> tuple[np.ndarray, np.ndarray]:
    if len(samples) == 0:
        raise EmptyDataset("no samples")
    X = np.stack([s.patches for s in samples])
    y = np.array([s.label for s in samples], dtype=np.int64)
    return X, y


def init_classifier(K: int, d: int, seed: int, scale: float = 0.1) -> PatchClassifier:
    rng = rng_for(seed, "init")
    return PatchClassifier(scale * rng.standard_normal((K, d)), np.zeros(K))


def loss_and_grad(
    weights: np.ndarray, bias: np.ndarray, patches: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy of the mean-pooled logits and its exact gradient.

    ``patches`` is N x T x d. Mean pooling commutes with the linear map, so the
    pooled logits are W @ mean_t(patch_t) + b.
    """
    xbar = patches.mean(axis=1)
    z = xbar @ weights.T + bias
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = labels.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    dz = np.exp(logp)
    dz[np.arange(n), labels] -= 1.0
    dz /= n
    return float(loss), dz.T @ xbar, dz.sum(axis=0)


def train(
    classifier: PatchClassifier,
    dataset: Sequence[SynthSample] | tuple[np.ndarray, np.ndarray],
    epochs: int,
    learning_rate: float,
    seed: int,
    log: list | None = None,
) -> PatchClassifier:
    """Mini-batch gradient descent (batch 32, reshuffled every epoch).

    If ``log`` is a list, one (epoch, mean_loss, accuracy) tuple per epoch is
    appended to it.
    """
    X, y = dataset if isinstance(dataset, tuple) else stack(dataset)
    if X.shape[0] == 0:
        raise EmptyDataset("no samples")
    if X.shape[2] != classifier.d or y.max() >= classifier.K:
        raise ShapeError("dataset does not match classifier dimensions")
    W = classifier.weights.copy()
    b = classifier.bias.copy()
    rng = rng_for(seed, "shuffle")
    n = X.shape[0]
    for epoch in range(epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, BATCH_SIZE):
            idx = order[start:start + BATCH_SIZE]
            loss, gW, gb = loss_and_grad(W, b, X[idx], y[idx])
            W -= learning_rate * gW
            b -= learning_rate * gb
            losses.append(loss * len(idx))
        if log is not None:
            acc = float(np.mean((X.mean(axis=1) @ W.T + b).argmax(axis=1) == y))
            log.append((epoch, sum(losses) / n, acc))
    return PatchClassifier(W, b)


def predict_logits(classifier: PatchClassifier, sample: SynthSample | np.ndarray) -> LogitMatrix:
    patches = sample.patches if isinstance(sample, SynthSample) else np.asarray(sample, dtype=np.float64)
    if patches.ndim != 2 or patches.shape[1] != classifier.d:
        raise ShapeError(f"patches of shape {patches.shape} do not fit a d={classifier.d} classifier")
    return LogitMatrix(patches @ classifier.weights.T + classifier.bias)


def batch_logits(classifier: PatchClassifier, X: np.ndarray) -> np.ndarray:
    """N x T x K logits for an N x T x d patch array."""
    return X @ classifier.weights.T + classifier.bias


def accuracy(classifier: PatchClassifier, dataset: Sequence[SynthSample] | tuple[np.ndarray, np.ndarray]) -> float:
    X, y = dataset if isinstance(dataset, tuple) else stack(dataset)
    return float(np.mean(batch_logits(classifier, X).mean(axis=1).argmax(axis=1) == y))


def patch_accuracy(classifier: PatchClassifier, dataset) -> float:
    """Accuracy of individual sub-patch rows against the sample label."""
    X, y = dataset if isinstance(dataset, tuple) else stack(dataset)
    pred = batch_logits(classifier, X).argmax(axis=2)
    return float(np.mean(pred == y[:, None]))


def make_ensemble(
    dataset,
    M: int,
    base_seed: int,
    epochs: int = 20,
    learning_rate: float = 0.1,
    K: int | None = None,
) -> list[PatchClassifier]:
    if M < 2:
        raise InsufficientMembers(f"ensemble needs M >= 2, got {M}")
    X, y = dataset if isinstance(dataset, tuple) else stack(dataset)
    if len(y) == 0:
        raise EmptyDataset("no samples")
    K = int(y.max()) + 1 if K is None else K
    members = []
    for m in range(M):
        seed = base_seed + m
        init = init_classifier(K, X.shape[2], seed)
        members.append(train(init, (X, y), epochs, learning_rate, seed))
    return members


def ensemble_logits(members: Sequence[PatchClassifier], patches: np.ndarray) -> EnsembleLogits:
    """Per-member mean-pooled logits for one input, stacked M x K."""
    return EnsembleLogits(np.stack([(patches @ m.weights.T + m.bias).mean(axis=0) for m in members]))
