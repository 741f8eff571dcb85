"""AdamW, the epoch/batch training loop, and metric evaluation.

The loop follows the usual recipe: seeded shuffle each epoch, batches of
``batch_size`` with the final partial batch kept, one optimizer step per
batch, a validation pass after every epoch.  Model selection keeps the
parameters from the epoch with the lowest validation mean absolute error.

Two parameter groups carry their own learning rates: the feature extractor
trains slowly (0.001 default), the proxy parameters an order of magnitude
faster (0.01 default).  Everything is single-threaded and deterministic for
a fixed seed; the metric log writes floats with shortest round-trip text so
a rerun produces a byte-identical file.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .errors import ConfigurationError, NumericError
from .losses import batch_loss
from .model import CplModel

LOG_HEADER = "epoch,train_loss,val_accuracy,val_mae"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 48
    batch_size: int = 32
    lr_extractor: float = 0.001
    lr_proxies: float = 0.01
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(
                f"batch_size must be >= 1, got {self.batch_size}"
            )
        if not self.lr_extractor > 0.0 or not self.lr_proxies > 0.0:
            raise ConfigurationError("learning rates must be > 0")
        if self.weight_decay < 0.0:
            raise ConfigurationError("weight_decay must be >= 0")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ConfigurationError("betas must lie in [0, 1)")
        if not self.eps > 0.0:
            raise ConfigurationError("eps must be > 0")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    mae: float


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float
    val_mae: float


@dataclass
class TrainResult:
    model: CplModel
    history: list
    best_epoch: int
    best_val_mae: float


def adamw_step(value, grad, state, lr: float, config: TrainConfig) -> None:
    """One decoupled-weight-decay step, in place on ``value``.

    ``state`` holds the moment buffers ``m``, ``v`` and step count ``t``;
    the decay term uses the pre-update parameters.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != value.shape:
        raise ConfigurationError(
            f"gradient shape {grad.shape} does not match parameter {value.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient; aborting the optimizer step")
    state["t"] += 1
    state["m"] = config.beta1 * state["m"] + (1.0 - config.beta1) * grad
    state["v"] = config.beta2 * state["v"] + (1.0 - config.beta2) * grad * grad
    m_hat = state["m"] / (1.0 - config.beta1 ** state["t"])
    v_hat = state["v"] / (1.0 - config.beta2 ** state["t"])
    value -= lr * m_hat / (np.sqrt(v_hat) + config.eps) + lr * config.weight_decay * value


class AdamW:
    """Optimizer over a model's parameter store with per-group learning rates."""

    def __init__(self, model: CplModel, config: TrainConfig):
        self.config = config
        self.model = model
        self._state = {
            p.name: {"m": np.zeros_like(p.value), "v": np.zeros_like(p.value), "t": 0}
            for p in model.params
        }

    def step(self, grads: dict) -> None:
        for p in self.model.params:
            grad = grads.get(p.name)
            if grad is None:
                raise ConfigurationError(f"no gradient supplied for {p.name}")
            lr = (
                self.config.lr_extractor
                if p.group == "extractor"
                else self.config.lr_proxies
            )
            try:
                adamw_step(p.value, grad, self._state[p.name], lr, self.config)
            except NumericError as exc:
                raise NumericError(f"{exc} (parameter {p.name})") from exc


def evaluate(model: CplModel, dataset: LabeledDataset) -> Metrics:
    """Accuracy and mean absolute error of most-similar-proxy predictions."""
    if len(dataset) == 0:
        raise ConfigurationError("cannot evaluate on an empty dataset")
    preds = model.predict_batch(dataset.features)
    errors = np.abs(preds - dataset.labels)
    return Metrics(
        accuracy=float(np.mean(preds == dataset.labels)),
        mae=float(np.mean(errors)),
    )


def train(
    model: CplModel,
    train_set: LabeledDataset,
    val_set: LabeledDataset,
    config: TrainConfig,
    epoch_callback=None,
) -> TrainResult:
    """Train in place and finish holding the minimum-validation-MAE parameters.

    Returns the per-epoch history alongside the selected epoch.  The optional
    ``epoch_callback(model, record)`` runs after each epoch's validation.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ConfigurationError("training and validation splits must be non-empty")
    if train_set.input_dim != model.extractor.input_dim:
        raise ConfigurationError(
            f"dataset dimension {train_set.input_dim} does not match the "
            f"model input {model.extractor.input_dim}"
        )
    if train_set.num_classes != model.num_classes:
        raise ConfigurationError(
            f"dataset has {train_set.num_classes} classes, model has "
            f"{model.num_classes}"
        )
    rng = np.random.default_rng(config.seed)
    optimizer = AdamW(model, config)
    n = len(train_set)
    history = []
    best_epoch = 0
    best_mae = np.inf
    best_params = None
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            feats = model.extract_batch(train_set.features[batch])
            out = batch_loss(
                feats,
                train_set.labels[batch],
                model.layout,
                model.similarity,
                model.loss_config,
            )
            grads = {
                f"extractor.{k}": g
                for k, g in model.extractor.backward(out.d_features).items()
            }
            grads.update(
                {f"layout.{k}": g for k, g in out.d_params.items()}
            )
            optimizer.step(grads)
            model.layout.apply_constraints()
            loss_sum += out.value * batch.size
        metrics = evaluate(model, val_set)
        record = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / n,
            val_accuracy=metrics.accuracy,
            val_mae=metrics.mae,
        )
        history.append(record)
        if metrics.mae < best_mae:
            best_mae = metrics.mae
            best_epoch = epoch
            best_params = {p.name: p.value.copy() for p in model.params}
        if epoch_callback is not None:
            epoch_callback(model, record)
    for p in model.params:
        np.copyto(p.value, best_params[p.name])
    return TrainResult(
        model=model, history=history, best_epoch=best_epoch, best_val_mae=best_mae
    )


def write_metric_log(history, path) -> None:
    """Write the per-epoch CSV; float text is shortest round-trip (repr)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(LOG_HEADER + "\n")
        for rec in history:
            fh.write(
                f"{rec.epoch},{rec.train_loss!r},{rec.val_accuracy!r},{rec.val_mae!r}\n"
            )
