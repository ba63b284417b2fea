"""Command-line entry point.

    vsmooth gen-data      --out DIR --seed S
    vsmooth train         --in DIR/train.vsd --out model.vsm --seed S
    vsmooth export-logits --in data.vsd --model model.vsm --out DIR
    vsmooth calibrate     --method ... --in DIR/val.vsd --model model.vsm --out cal.json
    vsmooth evaluate      --method ... --in DIR/test.vsd --model model.vsm --out DIR
    vsmooth sweep         --in DIR/test.vsd --model model.vsm --noise gaussian --out DIR

Every failure prints one line ``error: <Code>: <message>`` on stderr and exits
with status 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from vsmooth import baselines, metrics, noise, smoothing, synth
from vsmooth.core import BetaPolicy, EnsembleLogits, SmoothingConfig, derive_seed, mean_over_rows
from vsmooth.errors import ConfigError, VSmoothError
from vsmooth.formats import (
    atomic_write_text,
    read_dataset,
    read_logits,
    read_model,
    write_dataset,
    write_json,
    write_logits,
    write_model,
)

METHODS = (
    "conventional",
    "naive_average",
    "temp_scaling",
    "variance_smoothing",
    "ensemble_mean",
    "ensemble_smoothing",
)
ENSEMBLE_METHODS = ("ensemble_mean", "ensemble_smoothing")
CALIBRATED_METHODS = ("temp_scaling", "variance_smoothing", "ensemble_smoothing")
BETA_MODES = {"fixed": "fixed", "mean-offset": "mean_offset", "neg-percentile": "neg_percentile"}


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    method: str = "conventional"
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    n_bins: int = 10
    seed: int = 0
    inputs: list[Path] = field(default_factory=list)
    output: Path | None = None
    members: list[Path] = field(default_factory=list)

    def validate(self, forbid_test: bool = False) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.method in ENSEMBLE_METHODS and len(self.members) < 2:
            raise ConfigError(f"{self.method} needs --members with at least 2 model files")
        if self.method not in ENSEMBLE_METHODS and len(self.members) > 1:
            raise ConfigError(f"{self.method} takes a single model")
        if self.n_bins < 2:
            raise ConfigError("--bins must be >= 2")
        if forbid_test:
            for p in self.inputs:
                if path_role(p) == "test":
                    raise ConfigError(f"calibration may not read the test split ({p})")


def path_role(path: Path) -> str:
    """Split role implied by a file or directory name (train/val/test/other)."""
    stem = Path(path).name.split(".")[0].lower()
    for role in ("train", "val", "test"):
        if stem.startswith(role):
            return role
    return "other"


# ---------------------------------------------------------------- inputs


@dataclass
class Inputs:
    """Per-sample logits for one split, either single-model or ensemble."""

    labels: np.ndarray
    logits: list[np.ndarray]  # T x K per sample
    ensemble: list[np.ndarray] | None = None  # M x K per sample
    patches: list[np.ndarray] | None = None
    models: list[synth.PatchClassifier] | None = None


def _load_models(args) -> list[synth.PatchClassifier]:
    paths = list(args.members or []) + ([args.model] if getattr(args, "model", None) else [])
    if not paths:
        raise ConfigError("need --model or --members")
    return [read_model(p) for p in paths]


def load_inputs(path: Path, args, scale: float = 1.0) -> Inputs:
    path = Path(path)
    if path.is_dir():
        return _load_logit_dir(path, scale)
    samples, _ = read_dataset(path)
    models = _load_models(args)
    patches = [s.patches for s in samples]
    labels = np.array([s.label for s in samples], dtype=np.int64)
    logits = [scale * synth.predict_logits(models[0], p).values for p in patches]
    ens = None
    if len(models) > 1:
        ens = [scale * synth.ensemble_logits(models, p).values for p in patches]
    return Inputs(labels=labels, logits=logits, ensemble=ens, patches=patches, models=models)


def _load_logit_dir(path: Path, scale: float) -> Inputs:
    label_file = path / "labels.txt"
    if not label_file.exists():
        raise ConfigError(f"{path} has no labels.txt")
    labels = np.array([int(x) for x in label_file.read_text().split()], dtype=np.int64)
    files = sorted(p for p in path.iterdir() if p.suffix in (".vsl", ".vse"))
    if len(files) != len(labels):
        raise ConfigError(f"{len(files)} logit files but {len(labels)} labels in {path}")
    mats = [read_logits(f) for f in files]
    if all(isinstance(m, EnsembleLogits) for m in mats):
        return Inputs(labels=labels, logits=[scale * m.values for m in mats],
                      ensemble=[scale * m.values for m in mats])
    if any(isinstance(m, EnsembleLogits) for m in mats):
        raise ConfigError(f"{path} mixes VSL and VSE files")
    return Inputs(labels=labels, logits=[scale * m.values for m in mats])


# ---------------------------------------------------------------- config


def smoothing_config(args) -> SmoothingConfig:
    mode = BETA_MODES[args.beta_mode]
    value = {"fixed": args.beta_value, "mean_offset": args.beta_offset,
             "neg_percentile": args.beta_percentile}[mode]
    return SmoothingConfig(alpha=args.alpha, beta_policy=BetaPolicy(mode, value),
                           pool_kernel=args.pool_kernel, pool_stride=args.pool_stride)


def run_config(args, inputs: Sequence[Path]) -> RunConfig:
    return RunConfig(
        method=args.method,
        smoothing=smoothing_config(args),
        n_bins=getattr(args, "bins", 10),
        seed=args.seed,
        inputs=[Path(p) for p in inputs],
        output=Path(args.out),
        members=[Path(p) for p in (args.members or [])],
    )


def _nan_to_none(x: float):
    return None if x != x else x


def _record_smoothing(rec: dict) -> tuple[SmoothingConfig, float]:
    pol = rec["beta_policy"]
    cfg = SmoothingConfig(alpha=rec["alpha"], beta_policy=BetaPolicy(pol["kind"], pol["value"]),
                          pool_kernel=rec["pool_kernel"], pool_stride=rec["pool_stride"])
    return cfg, rec["beta"]


def _read_calibration(path, method: str) -> dict:
    rec = json.loads(Path(path).read_text())
    if rec.get("method") != method:
        raise ConfigError(f"calibration record is for {rec.get('method')!r}, not {method!r}")
    return rec


def _smoothing_from_args(args, method: str) -> tuple[SmoothingConfig, float]:
    """Config and beta from a calibration record, or from flags (fixed beta only)."""
    if args.calibration:
        return _record_smoothing(_read_calibration(args.calibration, method))
    cfg = smoothing_config(args)
    if cfg.beta_policy.kind != "fixed":
        raise ConfigError(f"{method} without --calibration needs --beta-mode fixed")
    return cfg, cfg.beta_policy.value


# ---------------------------------------------------------------- commands


def cmd_gen_data(args) -> int:
    spec = synth.SynthDatasetSpec(
        K=args.classes, T=args.patches, d=args.dim, signal_strength=args.signal,
        patch_noise=args.patch_noise, informative_fraction=args.informative,
        seed=derive_seed(args.seed, "synth"),
    )
    sizes = {"train": args.n_train, "val": args.n_val, "test": args.n_test}
    out = Path(args.out)
    for name, samples in synth.generate_splits(spec, sizes).items():
        write_dataset(out / f"{name}.vsd", samples, spec.K)
    return 0


def cmd_train(args) -> int:
    samples, K = read_dataset(args.inp)
    seed = derive_seed(args.seed, "train")
    X, y = synth.stack(samples)
    init = synth.init_classifier(K, X.shape[2], seed)
    log: list = []
    clf = synth.train(init, (X, y), args.epochs, args.lr, seed, log=log)
    write_model(args.out, clf)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "loss", "accuracy"])
    for epoch, loss, acc in log:
        w.writerow([epoch, repr(loss), repr(acc)])
    atomic_write_text(str(args.out) + ".log.csv", buf.getvalue())
    return 0


def cmd_export_logits(args) -> int:
    samples, _ = read_dataset(args.inp)
    models = _load_models(args)
    out = Path(args.out)
    width = max(5, len(str(len(samples))))
    for i, s in enumerate(samples):
        if len(models) > 1:
            write_logits(out / f"{i:0{width}d}.vse", synth.ensemble_logits(models, s.patches))
        else:
            write_logits(out / f"{i:0{width}d}.vsl", synth.predict_logits(models[0], s.patches))
    atomic_write_text(out / "labels.txt", "\n".join(str(s.label) for s in samples) + "\n")
    return 0


def cmd_calibrate(args) -> int:
    cfg = run_config(args, [args.inp])
    if cfg.method not in CALIBRATED_METHODS:
        raise ConfigError(f"{cfg.method} has nothing to calibrate")
    cfg.validate(forbid_test=True)
    data = load_inputs(args.inp, args, args.logit_scale)
    if cfg.method == "temp_scaling":
        fit = baselines.fit_temperature(np.array([mean_over_rows(z) for z in data.logits]), data.labels)
        rec = {
            "method": "temp_scaling",
            "temperature": fit.t,
            "final_nll": fit.final_nll,
            "iterations": fit.iterations,
            "at_bound": fit.at_bound,
            "logit_scale": args.logit_scale,
            "validation": {"n": int(len(data.labels))},
        }
    else:
        sc = cfg.smoothing
        if cfg.method == "ensemble_smoothing":
            if data.ensemble is None:
                raise ConfigError("ensemble_smoothing needs ensemble inputs")
            bars = [float(smoothing.ensemble_sigma(e).mean()) for e in data.ensemble]
        else:
            bars = [smoothing.sigma_bar_of(z, sc) for z in data.logits]
        bc = smoothing.calibrate_beta(bars, sc.beta_policy)
        rec = {
            "method": cfg.method,
            "alpha": sc.alpha,
            "beta": bc.beta,
            "beta_policy": {"kind": sc.beta_policy.kind, "value": sc.beta_policy.value},
            "pool_kernel": sc.pool_kernel,
            "pool_stride": sc.pool_stride,
            "logit_scale": args.logit_scale,
            "validation": {
                "n": bc.n,
                "sigma_bar_mean": bc.mean,
                "sigma_bar_percentile": _nan_to_none(bc.percentile),
            },
        }
    write_json(args.out, rec)
    return 0


def predict_all(method: str, data: Inputs, args) -> np.ndarray:
    if method == "conventional":
        return np.array([baselines.conventional_predict(z) for z in data.logits])
    if method == "naive_average":
        return np.array([baselines.naive_subpatch_average(z) for z in data.logits])
    if method == "temp_scaling":
        if not args.calibration:
            raise ConfigError("temp_scaling needs --calibration")
        t = _read_calibration(args.calibration, method)["temperature"]
        return np.array([baselines.apply_temperature(mean_over_rows(z), t) for z in data.logits])
    if method == "variance_smoothing":
        cfg, beta = _smoothing_from_args(args, method)
        return np.array([smoothing.variance_smoothed_forward(z, cfg, beta)[0] for z in data.logits])
    if data.ensemble is None:
        raise ConfigError(f"{method} needs ensemble inputs (--members or a VSE directory)")
    if method == "ensemble_mean":
        return np.array([baselines.ensemble_mean_predict(e) for e in data.ensemble])
    cfg, beta = _smoothing_from_args(args, method)
    return np.array([smoothing.ensemble_smoothed_predict(e, cfg.alpha, beta)[0] for e in data.ensemble])


def bins_csv(bins: Sequence[metrics.ReliabilityBin]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_lo", "bin_hi", "count", "mean_conf", "accuracy"])
    for b in bins:
        w.writerow([repr(b.lo), repr(b.hi), b.count,
                    "" if b.empty else repr(b.mean_confidence),
                    "" if b.empty else repr(b.empirical_accuracy)])
    return buf.getvalue()


def cmd_evaluate(args) -> int:
    cfg = run_config(args, [args.inp])
    cfg.validate()
    data = load_inputs(args.inp, args, args.logit_scale)
    preds = predict_all(cfg.method, data, args)
    report = metrics.evaluate(preds, data.labels, cfg.n_bins)
    out = Path(args.out)
    write_json(out / "report.json", {"method": cfg.method, **report.to_dict()})
    atomic_write_text(out / "bins.csv", bins_csv(report.bins))
    return 0


def cmd_sweep(args) -> int:
    cfg = run_config(args, [args.inp])
    cfg.validate()
    if Path(args.inp).is_dir():
        raise ConfigError("sweep perturbs inputs, so --in must be a VSD dataset")
    data = load_inputs(args.inp, args, args.logit_scale)
    sc, beta = _smoothing_from_args(args, "variance_smoothing")
    grid = noise.parse_lambda_grid(args.lambda_grid)
    model = data.models[0]
    scale = args.logit_scale

    def produce(patches):
        return scale * synth.predict_logits(model, patches).values

    out = Path(args.out)
    for kind in args.noise:
        curve = noise.noise_sweep(produce, data.patches, data.labels, kind, grid, sc, beta,
                                  seed=derive_seed(args.seed, "noise", kind))
        atomic_write_text(out / f"sweep_{kind}.csv", curve.to_csv())
    return 0


# ---------------------------------------------------------------- parser


def _add_smoothing_flags(p):
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta-mode", choices=sorted(BETA_MODES), default="fixed")
    p.add_argument("--beta-value", type=float, default=0.0)
    p.add_argument("--beta-offset", type=float, default=0.5)
    p.add_argument("--beta-percentile", type=float, default=95.0)
    p.add_argument("--pool-kernel", type=int, default=1)
    p.add_argument("--pool-stride", type=int, default=1)


def _add_model_flags(p):
    p.add_argument("--model", help="VSM model file")
    p.add_argument("--members", nargs="+", help="VSM model files forming an ensemble")
    p.add_argument("--logit-scale", type=float, default=1.0,
                   help="multiply every logit by this factor (overconfidence experiments)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vsmooth", description="variance-based smoothing toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="write synthetic train/val/test VSD files")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=5000)
    p.add_argument("--n-val", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--patches", type=int, default=8)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--signal", type=float, default=1.0)
    p.add_argument("--patch-noise", type=float, default=1.0)
    p.add_argument("--informative", type=float, default=0.75)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a per-patch linear classifier")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("export-logits", help="write per-sample VSL/VSE files and labels.txt")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    p.set_defaults(func=cmd_export_logits)

    for name, func, help_ in (
        ("calibrate", cmd_calibrate, "fit beta or a temperature on the validation split"),
        ("evaluate", cmd_evaluate, "write a calibration report and reliability bins"),
        ("sweep", cmd_sweep, "sigma-bar / entropy / accuracy versus noise intensity"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--in", dest="inp", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--method", choices=METHODS,
                       default="variance_smoothing" if name == "sweep" else "conventional")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--bins", type=int, default=10)
        p.add_argument("--calibration", help="JSON record written by `calibrate`")
        _add_model_flags(p)
        _add_smoothing_flags(p)
        if name == "sweep":
            p.add_argument("--noise", nargs="+", choices=noise.NOISE_KINDS, default=["gaussian"])
            p.add_argument("--lambda-grid", default="0:1:20")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except VSmoothError as exc:
        code, msg = exc.code, str(exc)
    except FileNotFoundError as exc:
        code, msg = "FileNotFound", str(exc.filename)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        code, msg = type(exc).__name__, str(exc)
    msg = " ".join(msg.split())
    print(f"error: {code}: {msg}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
