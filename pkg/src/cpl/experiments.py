"""Experiment runners behind the service endpoints and CLI verbs.

Each runner takes a ``RunConfig``, validates it before any compute, writes
its artifacts under ``output_dir``, and returns a JSON-friendly summary:

* ``run_training`` -- checkpoint.json, training_log.csv, summary.csv
* ``run_eval``     -- eval.csv
* ``run_sweep``    -- sweep_<parameter>.csv, one train/eval per grid value
* ``run_ablate``   -- ablate_<name>.csv, variants trained under one seed
* ``run_viz``      -- proxies.csv, features.csv, layout.svg (needs d = 2)

CSV floats use shortest round-trip text, so rerunning a seeded config
reproduces every file byte for byte.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ABLATIONS, DEFAULT_GRIDS, SWEEP_PARAMETERS, RunConfig
from .data import LabeledDataset
from .errors import ConfigurationError
from .model import CplModel, ProblemSpec, init_model, load_checkpoint, save_checkpoint
from .svgplot import scatter_svg
from .training import evaluate, train, write_metric_log

_SWEEP_FIELDS = {
    "s": "scale",
    "tau_p": "tau_p",
    "tau_b": "tau_b",
    "alpha": "alpha",
    "dim": "feature_dim",
}


def _out_dir(config: RunConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _check_compat(model: CplModel, dataset: LabeledDataset) -> None:
    if dataset.input_dim != model.extractor.input_dim:
        raise ConfigurationError(
            f"dataset dimension {dataset.input_dim} does not match the "
            f"checkpoint input {model.extractor.input_dim}"
        )
    if dataset.num_classes != model.num_classes:
        raise ConfigurationError(
            f"dataset has {dataset.num_classes} classes, checkpoint has "
            f"{model.num_classes}"
        )


def _train_once(spec: ProblemSpec, config: RunConfig, splits):
    train_set, val_set, test_set = splits
    model = init_model(spec, config.seed)
    result = train(model, train_set, val_set, config.train_config())
    return model, result, evaluate(model, test_set)


def run_training(config: RunConfig) -> dict:
    spec = config.problem_spec()
    train_config = config.train_config()
    train_set, val_set, test_set = config.load_splits()
    model = init_model(spec, train_config.seed)
    result = train(model, train_set, val_set, train_config)
    val_metrics = evaluate(model, val_set)
    test_metrics = evaluate(model, test_set)

    out = _out_dir(config)
    checkpoint = out / "checkpoint.json"
    save_checkpoint(model, checkpoint, seed=train_config.seed,
                    epoch=result.best_epoch)
    log = out / "training_log.csv"
    write_metric_log(result.history, log)
    summary = out / "summary.csv"
    _write_rows(summary, "split,accuracy,mae", [
        ("val", repr(val_metrics.accuracy), repr(val_metrics.mae)),
        ("test", repr(test_metrics.accuracy), repr(test_metrics.mae)),
    ])
    return {
        "epochs": len(result.history),
        "best_epoch": result.best_epoch,
        "val_accuracy": val_metrics.accuracy,
        "val_mae": val_metrics.mae,
        "test_accuracy": test_metrics.accuracy,
        "test_mae": test_metrics.mae,
        "checkpoint": str(checkpoint),
        "training_log": str(log),
        "summary": str(summary),
    }


def run_eval(config: RunConfig) -> dict:
    if config.checkpoint is None:
        raise ConfigurationError("eval needs a checkpoint path in the config")
    model, _, _ = load_checkpoint(config.checkpoint)
    dataset = config.eval_dataset()
    _check_compat(model, dataset)
    metrics = evaluate(model, dataset)
    out = _out_dir(config)
    path = out / "eval.csv"
    _write_rows(path, "accuracy,mae",
                [(repr(metrics.accuracy), repr(metrics.mae))])
    return {
        "accuracy": metrics.accuracy,
        "mae": metrics.mae,
        "split": config.eval_split,
        "samples": len(dataset),
        "output": str(path),
    }


def _swept_spec(base: ProblemSpec, parameter: str, value: float) -> ProblemSpec:
    field = _SWEEP_FIELDS[parameter]
    if parameter == "dim":
        if value != int(value) or value < 1:
            raise ConfigurationError(
                f"dim sweep values must be positive integers, got {value}"
            )
        return replace(base, feature_dim=int(value))
    return replace(base, **{field: float(value)})


def run_sweep(config: RunConfig) -> dict:
    parameter = config.sweep_parameter
    if parameter is None:
        raise ConfigurationError(
            f"sweep needs sweep_parameter, one of {SWEEP_PARAMETERS}"
        )
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigurationError(
            f"unknown sweep parameter {parameter!r}; pick from {SWEEP_PARAMETERS}"
        )
    values = config.sweep_values
    if values is None:
        values = DEFAULT_GRIDS[parameter]
    if not values:
        raise ConfigurationError("sweep_values must not be empty")
    base = config.problem_spec()
    # Every entry sees identical data, splits, and seeds; only the swept
    # parameter moves.
    specs = [(_swept_spec(base, parameter, v), v) for v in values]
    splits = config.load_splits()
    rows = []
    for spec, value in specs:
        _, _, metrics = _train_once(spec, config, splits)
        rows.append({
            "value": float(value),
            "accuracy": metrics.accuracy,
            "mae": metrics.mae,
        })
    out = _out_dir(config)
    path = out / f"sweep_{parameter}.csv"
    _write_rows(path, "value,accuracy,mae", [
        (repr(r["value"]), repr(r["accuracy"]), repr(r["mae"])) for r in rows
    ])
    return {"parameter": parameter, "rows": rows, "output": str(path)}


def _ablation_variants(name: str, base: ProblemSpec, config: RunConfig):
    if name == "neg-euclidean":
        if base.similarity != "euclidean_t":
            raise ConfigurationError(
                "the neg-euclidean ablation compares against the euclidean_t "
                f"similarity; the config uses {base.similarity!r}"
            )
        return [
            ("euclidean_t", base),
            ("neg_euclidean",
             replace(base, similarity="neg_euclidean", allow_experimental=True)),
        ]
    if name == "fixed-v0-norm":
        if base.layout != "linear":
            raise ConfigurationError(
                "the fixed-v0-norm ablation needs the linear layout; the "
                f"config uses {base.layout!r}"
            )
        if not config.fixed_norms:
            raise ConfigurationError("fixed_norms must not be empty")
        variants = [("learnable", replace(base, norm_mode="learnable"))]
        for norm in config.fixed_norms:
            variants.append((
                f"fixed-{norm:g}",
                replace(base, norm_mode="fixed", fixed_norm=float(norm)),
            ))
        return variants
    # upl-baseline
    if base.loss_mode == "upl":
        raise ConfigurationError(
            "the upl-baseline ablation needs a constrained config to compare "
            "against; loss_mode is already 'upl'"
        )
    return [
        ("cpl", base),
        ("upl", replace(base, loss_mode="upl", layout="free", smoothing=None)),
    ]


def run_ablate(config: RunConfig) -> dict:
    name = config.ablation
    if name is None:
        raise ConfigurationError(f"ablate needs ablation, one of {ABLATIONS}")
    if name not in ABLATIONS:
        raise ConfigurationError(
            f"unknown ablation {name!r}; pick from {ABLATIONS}"
        )
    variants = _ablation_variants(name, config.problem_spec(), config)
    splits = config.load_splits()
    rows = []
    for label, spec in variants:
        _, _, metrics = _train_once(spec, config, splits)
        rows.append({
            "variant": label,
            "accuracy": metrics.accuracy,
            "mae": metrics.mae,
        })
    out = _out_dir(config)
    path = out / f"ablate_{name}.csv"
    _write_rows(path, "variant,accuracy,mae", [
        (r["variant"], repr(r["accuracy"]), repr(r["mae"])) for r in rows
    ])
    return {"ablation": name, "rows": rows, "output": str(path)}


def run_viz(config: RunConfig) -> dict:
    if config.checkpoint is None:
        raise ConfigurationError("viz needs a checkpoint path in the config")
    model, _, _ = load_checkpoint(config.checkpoint)
    if model.extractor.feature_dim != 2:
        raise ConfigurationError(
            "the layout figure needs 2-d features; train a checkpoint with "
            f"feature_dim=2 (this one has {model.extractor.feature_dim})"
        )
    dataset = config.eval_dataset()
    _check_compat(model, dataset)
    feats = model.extract_batch(dataset.features)
    preds = model.predict_batch(dataset.features)
    correct = preds == dataset.labels
    proxies = model.layout.proxies()

    out = _out_dir(config)
    proxies_path = out / "proxies.csv"
    _write_rows(proxies_path, "class,x0,x1", [
        (str(k), repr(float(p[0])), repr(float(p[1])))
        for k, p in enumerate(proxies)
    ])
    features_path = out / "features.csv"
    _write_rows(
        features_path, "x0,x1,true_label,predicted_label,correct", [
            (repr(float(f[0])), repr(float(f[1])), str(int(t)), str(int(p)),
             str(int(ok)))
            for f, t, p, ok in zip(feats, dataset.labels, preds, correct)
        ],
    )
    svg_path = out / "layout.svg"
    title = (
        f"{model.spec.layout} layout, {len(dataset)} samples "
        f"({config.eval_split} split)"
    )
    svg_path.write_text(
        scatter_svg(feats, dataset.labels, correct, proxies, title=title),
        encoding="utf-8",
    )
    return {
        "proxies": str(proxies_path),
        "features": str(features_path),
        "figure": str(svg_path),
        "samples": len(dataset),
        "accuracy": float(np.mean(correct)),
    }


def predict_features(checkpoint: str, features) -> list:
    """Class predictions for raw input rows under a stored checkpoint."""
    model, _, _ = load_checkpoint(checkpoint)
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ConfigurationError(
            f"features must be a non-empty n x d matrix, got shape {x.shape}"
        )
    if x.shape[1] != model.extractor.input_dim:
        raise ConfigurationError(
            f"features have {x.shape[1]} columns, the checkpoint expects "
            f"{model.extractor.input_dim}"
        )
    return [int(p) for p in model.predict_batch(x)]
