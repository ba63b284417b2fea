"""Input perturbations of tunable intensity lambda in [0, 1], and the sweep
that records how sigma-bar, entropy and accuracy respond to them."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from vsmooth.core import ArrayLike, LogitMatrix, SmoothingConfig, derive_seed
from vsmooth.errors import InvalidInput
from vsmooth.metrics import predictive_entropy
from vsmooth.smoothing import BetaCalibration, variance_smoothed_forward

NOISE_KINDS = ("gaussian", "speckle", "affine", "elastic")

ROTATION_DEG = 30.0
SHEAR_DEG = 10.0
PAD_FRACTION = 0.2
ELASTIC_MAX_SHIFT = 5.0


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    lam: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise InvalidInput(f"unknown noise kind {self.kind!r}")
        _check_lambda(self.lam)


@dataclass(frozen=True)
class SweepCurve:
    lambdas: np.ndarray
    sigma_bar: np.ndarray
    mean_entropy: np.ndarray
    accuracy: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "sigma_bar", "mean_entropy", "accuracy"])
        for row in zip(self.lambdas, self.sigma_bar, self.mean_entropy, self.accuracy):
            w.writerow([f"{v:.9g}" for v in row])
        return buf.getvalue()


def _check_lambda(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise InvalidInput(f"lambda must lie in [0, 1], got {lam}")


def gaussian_noise(x: ArrayLike, lam: float, seed: int) -> np.ndarray:
    _check_lambda(lam)
    x = np.asarray(x, dtype=np.float64)
    if lam == 0.0:
        return x.copy()
    eps = np.random.default_rng(seed).standard_normal(x.shape)
    return x + lam * eps


def speckle_noise(x: ArrayLike, lam: float, seed: int) -> np.ndarray:
    _check_lambda(lam)
    x = np.asarray(x, dtype=np.float64)
    if lam == 0.0:
        return x.copy()
    eps = np.random.default_rng(seed).standard_normal(x.shape)
    return x + lam * (x * eps)


def _as_image(img: ArrayLike) -> tuple[np.ndarray, bool]:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        return arr[:, :, None], True
    if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInput(f"image must be H x W or H x W x C, got shape {arr.shape}")
    return arr, False


def affine_matrix(lam: float) -> np.ndarray:
    """Rotation lam*30 deg, shear lam*10 deg (added in radians), scale 1+lam."""
    theta = math.radians(lam * ROTATION_DEG)
    s = math.radians(lam * SHEAR_DEG)
    g = 1.0 + lam
    return np.array([
        [g * math.cos(theta), -g * math.sin(theta) + s],
        [g * math.sin(theta), g * math.cos(theta) + s],
    ])


def affine_transform(img: ArrayLike, lam: float) -> np.ndarray:
    """Pad (edge replication), warp about the centre with nearest-neighbour
    inverse mapping, then centre-crop back to the input size."""
    _check_lambda(lam)
    arr, squeeze = _as_image(img)
    if lam == 0.0:
        out = arr.copy()
        return out[:, :, 0] if squeeze else out
    H, W, _ = arr.shape
    p = int(round(PAD_FRACTION * max(H, W)))
    padded = np.pad(arr, ((p, p), (p, p), (0, 0)), mode="edge")
    Hp, Wp = padded.shape[:2]
    cy, cx = (Hp - 1) / 2.0, (Wp - 1) / 2.0
    inv = np.linalg.inv(affine_matrix(lam))
    # only the cropped window is ever kept, so map just those output pixels
    ys, xs = np.mgrid[p:p + H, p:p + W]
    dst = np.stack([xs.ravel() - cx, ys.ravel() - cy])
    src = inv @ dst
    sx = np.clip(np.rint(src[0] + cx), 0, Wp - 1).astype(np.int64)
    sy = np.clip(np.rint(src[1] + cy), 0, Hp - 1).astype(np.int64)
    out = padded[sy, sx].reshape(H, W, -1)
    return out[:, :, 0] if squeeze else out


def elastic_distortion(img: ArrayLike, lam: float, seed: int) -> np.ndarray:
    _check_lambda(lam)
    arr, squeeze = _as_image(img)
    if lam == 0.0:
        out = arr.copy()
        return out[:, :, 0] if squeeze else out
    H, W, _ = arr.shape
    rng = np.random.default_rng(seed)
    amp = ELASTIC_MAX_SHIFT * lam
    dx = rng.uniform(-amp, amp, size=(H, W))
    dy = rng.uniform(-amp, amp, size=(H, W))
    ys, xs = np.mgrid[0:H, 0:W]
    sx = np.rint(np.clip(xs + dx, 0, W - 1)).astype(np.int64)
    sy = np.rint(np.clip(ys + dy, 0, H - 1)).astype(np.int64)
    out = arr[sy, sx]
    return out[:, :, 0] if squeeze else out


def apply_noise(x: ArrayLike, kind: str, lam: float, seed: int) -> np.ndarray:
    if kind == "gaussian":
        return gaussian_noise(x, lam, seed)
    if kind == "speckle":
        return speckle_noise(x, lam, seed)
    if kind == "affine":
        return affine_transform(x, lam)
    if kind == "elastic":
        return elastic_distortion(x, lam, seed)
    raise InvalidInput(f"unknown noise kind {kind!r}")


def parse_lambda_grid(text: str) -> np.ndarray:
    """``start:stop:steps`` -> ``steps`` evenly spaced values, both ends included."""
    try:
        start, stop, steps = text.split(":")
        start, stop, steps = float(start), float(stop), int(steps)
    except ValueError:
        raise InvalidInput(f"lambda grid must look like start:stop:steps, got {text!r}") from None
    if steps < 1:
        raise InvalidInput("lambda grid needs at least one step")
    grid = np.linspace(start, stop, steps) if steps > 1 else np.array([start])
    _check_grid(grid)
    return grid


def _check_grid(grid: np.ndarray) -> None:
    if grid.size == 0:
        raise InvalidInput("empty lambda grid")
    if np.any(grid < 0) or np.any(grid > 1):
        raise InvalidInput("lambda grid must lie in [0, 1]")
    if np.any(np.diff(grid) < 0):
        raise InvalidInput("lambda grid must be ascending")


def noise_sweep(
    model: Callable[[np.ndarray], LogitMatrix | np.ndarray],
    inputs: Sequence[np.ndarray],
    labels: Sequence[int],
    kind: str,
    lambda_grid: Sequence[float],
    config: SmoothingConfig,
    beta: BetaCalibration | float,
    seed: int = 0,
) -> SweepCurve:
    """Perturb every input at each lambda and summarise the smoothed predictions.

    ``model`` maps one (perturbed) input to its sub-patch logit matrix. The
    noise seed of sample i at grid point j is derive_seed(seed, i, j), so the
    curve does not depend on evaluation order.
    """
    grid = np.asarray(lambda_grid, dtype=np.float64)
    _check_grid(grid)
    if kind not in NOISE_KINDS:
        raise InvalidInput(f"unknown noise kind {kind!r}")
    y = np.asarray(labels)
    n = len(inputs)
    if n == 0 or n != y.shape[0]:
        raise InvalidInput("need a non-empty input set with one label per input")
    sig, ent, acc = [], [], []
    for j, lam in enumerate(grid):
        sbar, h, correct = [], [], []
        for i, x in enumerate(inputs):
            xn = apply_noise(x, kind, float(lam), derive_seed(seed, i, j))
            p, stats = variance_smoothed_forward(model(xn), config, beta)
            sbar.append(stats.sigma_bar)
            h.append(predictive_entropy(p))
            correct.append(1.0 if int(np.argmax(p)) == int(y[i]) else 0.0)
        sig.append(math.fsum(sbar) / n)
        ent.append(math.fsum(h) / n)
        acc.append(math.fsum(correct) / n)
    return SweepCurve(grid, np.array(sig), np.array(ent), np.array(acc))
