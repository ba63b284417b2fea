"""Desk-scale experiments on the standard synthetic task. Used by the
acceptance tests and by the runners in ``scripts/``."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from vsmooth import baselines, metrics, synth
from vsmooth.core import BetaPolicy, SmoothingConfig, derive_seed, mean_over_rows, softmax
from vsmooth.noise import SweepCurve, apply_noise, noise_sweep
from vsmooth.smoothing import (
    BetaCalibration,
    calibrate_beta,
    ensemble_sigma,
    ensemble_smoothed_predict,
    sigma_bar_of,
    variance_smoothed_forward,
)

EPOCHS = 20
LEARNING_RATE = 0.1
# T=8 is short, so sigma is taken over all sub-patch rows without pooling
STANDARD_SMOOTHING = SmoothingConfig(alpha=1.0, beta_policy=BetaPolicy.mean_offset(0.5))


@dataclass(frozen=True)
class StandardRun:
    seed: int
    spec: synth.SynthDatasetSpec
    train: tuple[np.ndarray, np.ndarray]
    val: tuple[np.ndarray, np.ndarray]
    test: tuple[np.ndarray, np.ndarray]
    model: synth.PatchClassifier


@lru_cache(maxsize=8)
def standard_run(seed: int) -> StandardRun:
    spec = synth.SynthDatasetSpec(seed=derive_seed(seed, "synth"))
    splits = {k: synth.stack(v) for k, v in synth.generate_splits(spec).items()}
    init = synth.init_classifier(spec.K, spec.d, derive_seed(seed, "train"))
    model = synth.train(init, splits["train"], EPOCHS, LEARNING_RATE, derive_seed(seed, "train"))
    return StandardRun(seed, spec, splits["train"], splits["val"], splits["test"], model)


def calibrate_on_validation(run: StandardRun, config: SmoothingConfig, scale: float = 1.0) -> BetaCalibration:
    logits = scale * synth.batch_logits(run.model, run.val[0])
    return calibrate_beta([sigma_bar_of(z, config) for z in logits], config.beta_policy)


def shift_curve(seed: int, kind: str = "gaussian", n_grid: int = 20) -> SweepCurve:
    """sigma-bar / entropy / accuracy on the test split as noise grows."""
    run = standard_run(seed)
    cfg = STANDARD_SMOOTHING
    beta = calibrate_on_validation(run, cfg)
    X, y = run.test
    W, b = run.model.weights, run.model.bias
    return noise_sweep(lambda x: x @ W.T + b, list(X), y, kind, np.linspace(0.0, 1.0, n_grid), cfg, beta,
                       seed=derive_seed(seed, "noise", kind))


@dataclass(frozen=True)
class ComparisonResult:
    ece: dict
    accuracy: dict
    argmax_identical: dict
    sigma_bar_mean: float
    beta: float
    temperature: float


def overconfidence_comparison(seed: int, scale: float = 5.0, n_bins: int = 10,
                              config: SmoothingConfig = STANDARD_SMOOTHING) -> ComparisonResult:
    """Scale the trained model's logits to make it overconfident, then compare
    conventional softmax, variance smoothing and fitted temperature scaling."""
    run = standard_run(seed)
    beta = calibrate_on_validation(run, config, scale)
    val_logits = scale * synth.batch_logits(run.model, run.val[0])
    fit = baselines.fit_temperature(np.array([mean_over_rows(z) for z in val_logits]), run.val[1])

    test_logits = scale * synth.batch_logits(run.model, run.test[0])
    y = run.test[1]
    means = np.array([mean_over_rows(z) for z in test_logits])
    preds = {
        "conventional": softmax(means),
        "variance_smoothing": np.array([variance_smoothed_forward(z, config, beta)[0] for z in test_logits]),
        "temp_scaling": np.array([baselines.apply_temperature(m, fit.t) for m in means]),
    }
    ref = preds["conventional"].argmax(axis=1)
    return ComparisonResult(
        ece={k: metrics.ece(p, y, n_bins) for k, p in preds.items()},
        accuracy={k: float(np.mean(p.argmax(axis=1) == y)) for k, p in preds.items()},
        argmax_identical={k: bool(np.array_equal(p.argmax(axis=1), ref)) for k, p in preds.items()},
        sigma_bar_mean=beta.mean,
        beta=beta.beta,
        temperature=fit.t,
    )


@lru_cache(maxsize=8)
def standard_ensemble(seed: int, M: int = 10) -> tuple[synth.PatchClassifier, ...]:
    run = standard_run(seed)
    return tuple(synth.make_ensemble(run.train, M, derive_seed(seed, "ensemble") % 2**32,
                                     EPOCHS, LEARNING_RATE, K=run.spec.K))


def ensemble_kl(seed: int, lam: float = 0.7, alpha: float = 5.0, offset: float = 0.5,
                alpha_factor: float = 100.0, M: int = 10) -> dict:
    """Mean KL-to-uniform on Gaussian-perturbed test inputs for the plain
    ensemble average and for ensemble smoothing at alpha and alpha*factor."""
    run = standard_run(seed)
    members = standard_ensemble(seed, M)
    val_bars = [float(ensemble_sigma(synth.ensemble_logits(members, x)).mean()) for x in run.val[0]]
    beta = calibrate_beta(val_bars, BetaPolicy.mean_offset(offset)).beta
    kl = {"ensemble_mean": [], "smoothed": [], "smoothed_high_alpha": []}
    for i, x in enumerate(run.test[0]):
        e = synth.ensemble_logits(members, apply_noise(x, "gaussian", lam, derive_seed(seed, "ens-noise", i)))
        kl["ensemble_mean"].append(metrics.kl_to_uniform(baselines.ensemble_mean_predict(e)))
        kl["smoothed"].append(metrics.kl_to_uniform(ensemble_smoothed_predict(e, alpha, beta)[0]))
        kl["smoothed_high_alpha"].append(
            metrics.kl_to_uniform(ensemble_smoothed_predict(e, alpha * alpha_factor, beta)[0]))
    out = {k: math.fsum(v) / len(v) for k, v in kl.items()}
    out["beta"] = beta
    return out
