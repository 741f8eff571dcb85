"""The flat JSON run configuration shared by the CLI and the service.

Every experiment is described by one JSON object with flat keys; unknown
keys are rejected.  ``--set key=value`` pairs override file values, with
the value parsed as JSON when possible (so ``--set alpha=4`` is a number
and ``--set smoothing=poisson`` a string).

Model keys
    num_classes, input_dim, hidden_dim, feature_dim -- network sizes
    layout          -- "linear" | "semicircular" | "free"
    similarity      -- "euclidean_t" | "cosine" | "neg_euclidean"
    scale           -- cosine similarity scale s
    loss_mode       -- "hard" | "soft" | "upl"
    alpha           -- soft-mode penalty weight
    smoothing       -- "poisson" | "binomial" | "exponential" | "triangular"
    tau_p, tau_b, tau_e, tri_peak, tri_floor -- smoothing shape knobs
    normalization   -- override: "softmax" | "direct"
    norm_mode       -- linear layout: "learnable" | "fixed"
    fixed_norm      -- target norm when norm_mode is "fixed"
    allow_experimental -- opt into unnamed variant combinations

Optimization keys
    epochs, batch_size, lr_extractor, lr_proxies, weight_decay,
    beta1, beta2, eps -- the usual AdamW knobs
    seed -- the one experiment seed (data generation, splits, init, shuffle)

Data keys
    data            -- "synthetic-linear" | "synthetic-ring" | a CSV path
    n_per_class, noise_sigma, overlap -- synthetic generator knobs
    train_fraction, val_fraction, test_fraction -- split sizes
    eval_split      -- which part eval/viz read: "train" | "val" | "test" | "all"

Output and command keys
    output_dir      -- directory for checkpoints, logs, CSVs, figures
    checkpoint      -- model file for eval/viz
    sweep_parameter -- "s" | "tau_p" | "tau_b" | "alpha" | "dim"
    sweep_values    -- grid override (defaults mirror the standard ranges)
    ablation        -- "neg-euclidean" | "fixed-v0-norm" | "upl-baseline"
    fixed_norms     -- norms tried by the fixed-v0-norm ablation
"""

from __future__ import annotations

import json

from pydantic import BaseModel, ConfigDict, ValidationError

from .data import LabeledDataset, SplitSpec, gen_synthetic_linear, gen_synthetic_ring, load_csv, split
from .errors import ConfigurationError, DataError
from .model import ProblemSpec
from .training import TrainConfig

SWEEP_PARAMETERS = ("s", "tau_p", "tau_b", "alpha", "dim")
ABLATIONS = ("neg-euclidean", "fixed-v0-norm", "upl-baseline")
EVAL_SPLITS = ("train", "val", "test", "all")

DEFAULT_GRIDS = {
    "s": [2.0, 4.0, 6.0, 8.0, 10.0],
    "tau_p": [0.07, 0.09, 0.11, 0.13, 0.15, 0.17],
    "tau_b": [0.07, 0.09, 0.11, 0.13, 0.15, 0.17],
    "alpha": [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
    "dim": [float(2 ** i) for i in range(12)],  # 1 .. 2048
}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # model
    num_classes: int = 8
    input_dim: int = 16
    hidden_dim: int = 64
    feature_dim: int = 512
    layout: str = "linear"
    similarity: str = "euclidean_t"
    scale: float = 6.0
    loss_mode: str = "hard"
    alpha: float = 6.0
    smoothing: str | None = None
    tau_p: float = 0.11
    tau_b: float = 0.13
    tau_e: float = 30.0
    tri_peak: float = 0.9
    tri_floor: float = 0.1
    normalization: str | None = None
    norm_mode: str = "learnable"
    fixed_norm: float = 1.0
    allow_experimental: bool = False

    # optimization
    epochs: int = 48
    batch_size: int = 32
    lr_extractor: float = 0.001
    lr_proxies: float = 0.01
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    # data
    data: str = "synthetic-linear"
    n_per_class: int = 40
    noise_sigma: float = 0.1
    overlap: float = 0.0
    train_fraction: float = 0.75
    val_fraction: float = 0.05
    test_fraction: float = 0.20
    eval_split: str = "test"

    # outputs and command arguments
    output_dir: str = "cpl-run"
    checkpoint: str | None = None
    sweep_parameter: str | None = None
    sweep_values: list[float] | None = None
    ablation: str | None = None
    fixed_norms: list[float] = [1.0, 3.0, 5.0, 7.0]

    def problem_spec(self) -> ProblemSpec:
        return ProblemSpec(
            num_classes=self.num_classes,
            input_dim=self.input_dim,
            hidden_dim=self.hidden_dim,
            feature_dim=self.feature_dim,
            layout=self.layout,
            similarity=self.similarity,
            scale=self.scale,
            loss_mode=self.loss_mode,
            alpha=self.alpha,
            smoothing=self.smoothing,
            tau_p=self.tau_p,
            tau_b=self.tau_b,
            tau_e=self.tau_e,
            tri_peak=self.tri_peak,
            tri_floor=self.tri_floor,
            normalization=self.normalization,
            norm_mode=self.norm_mode,
            fixed_norm=self.fixed_norm,
            allow_experimental=self.allow_experimental,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr_extractor=self.lr_extractor,
            lr_proxies=self.lr_proxies,
            weight_decay=self.weight_decay,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            seed=self.seed,
        )

    def split_spec(self) -> SplitSpec:
        return SplitSpec(
            train_fraction=self.train_fraction,
            val_fraction=self.val_fraction,
            test_fraction=self.test_fraction,
            seed=self.seed,
        )

    def load_dataset(self) -> LabeledDataset:
        if self.data == "synthetic-linear":
            return gen_synthetic_linear(
                num_classes=self.num_classes,
                n_per_class=self.n_per_class,
                input_dim=self.input_dim,
                noise_sigma=self.noise_sigma,
                overlap=self.overlap,
                seed=self.seed,
            )
        if self.data == "synthetic-ring":
            return gen_synthetic_ring(
                num_classes=self.num_classes,
                n_per_class=self.n_per_class,
                input_dim=self.input_dim,
                noise_sigma=self.noise_sigma,
                seed=self.seed,
            )
        dataset = load_csv(self.data, num_classes=self.num_classes)
        if dataset.input_dim != self.input_dim:
            raise ConfigurationError(
                f"{self.data} has {dataset.input_dim} feature columns; set "
                f"input_dim to match (configured {self.input_dim})"
            )
        return dataset

    def load_splits(self):
        return split(self.load_dataset(), self.split_spec())

    def eval_dataset(self) -> LabeledDataset:
        """The split eval and viz read, per the ``eval_split`` key."""
        if self.eval_split not in EVAL_SPLITS:
            raise ConfigurationError(
                f"eval_split must be one of {EVAL_SPLITS}, got {self.eval_split!r}"
            )
        if self.eval_split == "all":
            return self.load_dataset()
        parts = dict(zip(("train", "val", "test"), self.load_splits()))
        return parts[self.eval_split]


def parse_overrides(pairs) -> dict:
    """``key=value`` strings to a dict; values parse as JSON when they can."""
    out = {}
    for pair in pairs:
        key, sep, text = pair.partition("=")
        if not sep or not key:
            raise ConfigurationError(
                f"override {pair!r} is not of the form key=value"
            )
        try:
            out[key] = json.loads(text)
        except json.JSONDecodeError:
            out[key] = text
    return out


def build_run_config(data: dict) -> RunConfig:
    try:
        return RunConfig(**data)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}"
            for err in exc.errors()
        )
        raise ConfigurationError(f"bad configuration: {problems}") from exc


def load_run_config(path, overrides=()) -> RunConfig:
    """Read a JSON config file and apply ``key=value`` overrides on top."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError(f"config {path} must hold a JSON object")
    data.update(parse_overrides(overrides))
    return build_run_config(data)
