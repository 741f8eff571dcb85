"""The trainable pipeline: feature extractor + proxy layout + loss choice.

The extractor is a two-layer perceptron (rectified-linear hidden layer,
identity output).  It stands in for a large image backbone: the method under
study lives entirely in the head, so the extractor only needs to be a
differentiable map into the embedding space.

``ProblemSpec`` is the flat, JSON-serializable description of one model:
sizes, layout, similarity, loss mode, smoothing.  ``init_model`` turns a spec
plus a seed into a fully initialized ``CplModel``; checkpoints round-trip the
spec and every parameter array exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .distributions import Smoothing
from .errors import ConfigurationError, DataError, DegeneratePlaneError
from .geometry import (
    LAYOUT_KINDS,
    SIMILARITY_KINDS,
    FreeLayout,
    LinearLayout,
    ProxyLayout,
    SemicircularLayout,
    Similarity,
)
from .losses import LOSS_MODES, LossConfig

CHECKPOINT_FORMAT = "cpl-checkpoint"
CHECKPOINT_VERSION = 1

SMOOTHING_CHOICES = ("poisson", "binomial", "exponential", "triangular")

# Combinations reported as the method's main results; anything else needs
# allow_experimental so a typo cannot silently train a nonsense variant.
_NAMED_VARIANTS = {
    ("hard", "linear", "euclidean_t"),
    ("hard", "semicircular", "cosine"),
    ("soft", "free", "euclidean_t"),
    ("soft", "free", "cosine"),
    ("upl", "free", "euclidean_t"),
    ("upl", "free", "cosine"),
}


@dataclass(frozen=True)
class ProblemSpec:
    """Flat description of a model; every field has a JSON-friendly type."""

    num_classes: int
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

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ConfigurationError(
                f"need at least 2 classes, got {self.num_classes}"
            )
        for name in ("input_dim", "hidden_dim", "feature_dim"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.layout not in LAYOUT_KINDS:
            raise ConfigurationError(f"unknown layout: {self.layout!r}")
        if self.similarity not in SIMILARITY_KINDS:
            raise ConfigurationError(f"unknown similarity: {self.similarity!r}")
        if self.loss_mode not in LOSS_MODES:
            raise ConfigurationError(f"unknown loss mode: {self.loss_mode!r}")
        if self.layout == "semicircular" and self.feature_dim < 2:
            raise ConfigurationError(
                "the semicircular layout needs feature_dim >= 2 to span a plane"
            )
        if self.layout == "linear" and self.similarity == "cosine":
            raise ConfigurationError(
                "the linear layout places a proxy at the origin, where cosine "
                "similarity is undefined"
            )
        # Mode/layout pairing is structural, not a taste question: the hard
        # losses rely on the layout for unimodality, the soft penalty and the
        # unconstrained baseline only make sense with free proxies.
        if self.loss_mode == "hard" and self.layout not in ("linear", "semicircular"):
            raise ConfigurationError(
                "hard mode needs a linear or semicircular layout"
            )
        if self.loss_mode in ("soft", "upl") and self.layout != "free":
            raise ConfigurationError(f"{self.loss_mode} mode needs the free layout")
        if self.loss_mode == "soft":
            if self.smoothing is None:
                raise ConfigurationError("soft mode needs a smoothing choice")
            if self.smoothing not in SMOOTHING_CHOICES:
                raise ConfigurationError(f"unknown smoothing: {self.smoothing!r}")
        named = (self.loss_mode, self.layout, self.similarity) in _NAMED_VARIANTS
        if self.loss_mode == "soft" and self.smoothing not in ("poisson", "binomial"):
            named = False
        if not named and not self.allow_experimental:
            raise ConfigurationError(
                "this layout/similarity/loss combination is not one of the "
                "named variants; set allow_experimental to run it anyway"
            )
        # Constructing these validates their own parameter ranges.
        self.build_similarity()
        self.build_loss_config()

    def build_similarity(self) -> Similarity:
        return Similarity(kind=self.similarity, scale=self.scale)

    def build_smoothing(self) -> Smoothing:
        if self.smoothing is None:
            raise ConfigurationError("no smoothing configured")
        norm = self.normalization
        if self.smoothing == "poisson":
            return Smoothing.poisson(self.tau_p, norm or "softmax")
        if self.smoothing == "binomial":
            return Smoothing.binomial(self.tau_b, norm or "softmax")
        if self.smoothing == "exponential":
            return Smoothing.exponential(self.tau_e, norm or "direct")
        return Smoothing.triangular(self.tri_peak, self.tri_floor, norm or "direct")

    def build_loss_config(self) -> LossConfig:
        smoothing = self.build_smoothing() if self.loss_mode == "soft" else None
        return LossConfig(mode=self.loss_mode, alpha=self.alpha, smoothing=smoothing)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown problem fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class Parameter:
    """A named, trainable array; ``group`` selects the learning rate."""

    name: str
    value: np.ndarray
    group: str


class ParameterStore:
    """Ordered collection of parameters, addressable by name."""

    def __init__(self, params: list[Parameter]):
        self._params = list(params)
        self._by_name = {p.name: p for p in params}
        if len(self._by_name) != len(self._params):
            raise ConfigurationError("duplicate parameter names")

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def __getitem__(self, name: str) -> Parameter:
        return self._by_name[name]

    def names(self) -> list:
        return [p.name for p in self._params]


def xavier_normal(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=shape)


class FeatureExtractor:
    """Two-layer perceptron: rectified-linear hidden layer, identity output."""

    def __init__(self, w1, b1, w2, b2):
        self.w1 = np.asarray(w1, dtype=np.float64)
        self.b1 = np.asarray(b1, dtype=np.float64)
        self.w2 = np.asarray(w2, dtype=np.float64)
        self.b2 = np.asarray(b2, dtype=np.float64)
        if self.w1.shape[1] != self.b1.shape[0] or self.w2.shape[1] != self.b2.shape[0]:
            raise ConfigurationError("bias shapes do not match weight shapes")
        if self.w1.shape[1] != self.w2.shape[0]:
            raise ConfigurationError("hidden dimensions of the two layers differ")
        self._cache = None

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.w2.shape[1]

    def forward(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.input_dim:
            raise ConfigurationError(
                f"input dimension {x.shape[1]} does not match extractor "
                f"input {self.input_dim}"
            )
        pre = x @ self.w1 + self.b1
        hidden = np.maximum(pre, 0.0)
        self._cache = (x, pre, hidden)
        return hidden @ self.w2 + self.b2

    def backward(self, d_out) -> dict:
        """Gradients for the most recent forward pass, keyed by weight name."""
        if self._cache is None:
            raise ConfigurationError("backward called before forward")
        x, pre, hidden = self._cache
        d_out = np.atleast_2d(np.asarray(d_out, dtype=np.float64))
        d_hidden = (d_out @ self.w2.T) * (pre > 0.0)
        return {
            "w2": hidden.T @ d_out,
            "b2": d_out.sum(axis=0),
            "w1": x.T @ d_hidden,
            "b1": d_hidden.sum(axis=0),
        }


class CplModel:
    """Extractor + layout + similarity + loss mode, with a shared parameter store."""

    def __init__(
        self,
        spec: ProblemSpec,
        extractor: FeatureExtractor,
        layout: ProxyLayout,
    ):
        self.spec = spec
        self.extractor = extractor
        self.layout = layout
        self.similarity = spec.build_similarity()
        self.loss_config = spec.build_loss_config()
        params = [
            Parameter("extractor.w1", extractor.w1, "extractor"),
            Parameter("extractor.b1", extractor.b1, "extractor"),
            Parameter("extractor.w2", extractor.w2, "extractor"),
            Parameter("extractor.b2", extractor.b2, "extractor"),
        ]
        for name, value in layout.params.items():
            params.append(Parameter(f"layout.{name}", value, "proxies"))
        self.params = ParameterStore(params)

    @property
    def num_classes(self) -> int:
        return self.layout.num_classes

    def extract_batch(self, x) -> np.ndarray:
        return self.extractor.forward(x)

    def predict_batch(self, x) -> np.ndarray:
        feats = self.extract_batch(x)
        sims = self.similarity.pairwise(feats, self.layout.proxies())
        return np.argmax(sims, axis=1)


def extract(model: CplModel, x) -> np.ndarray:
    """Embed a single input vector."""
    return model.extract_batch(np.atleast_2d(x))[0]


def predict_rank(model: CplModel, x) -> int:
    """Most-similar-proxy prediction; ties go to the smaller class index."""
    return int(model.predict_batch(np.atleast_2d(x))[0])


def init_model(spec: ProblemSpec, seed: int) -> CplModel:
    """Build a model with seed-determined Xavier-normal parameters.

    Weights use variance 2/(fan_in + fan_out); biases start at zero; each
    proxy parameter vector is treated as a 1 x d map for its fan sizes.
    """
    rng = np.random.default_rng(seed)
    d_in, h, d = spec.input_dim, spec.hidden_dim, spec.feature_dim
    extractor = FeatureExtractor(
        w1=xavier_normal(rng, d_in, h, (d_in, h)),
        b1=np.zeros(h),
        w2=xavier_normal(rng, h, d, (h, d)),
        b2=np.zeros(d),
    )
    layout = _init_layout(spec, rng)
    return CplModel(spec, extractor, layout)


def _init_layout(spec: ProblemSpec, rng: np.random.Generator) -> ProxyLayout:
    d = spec.feature_dim
    if spec.layout == "linear":
        v0 = _nonzero_draw(rng, d)
        return LinearLayout(
            v0, spec.num_classes, norm_mode=spec.norm_mode, fixed_norm=spec.fixed_norm
        )
    if spec.layout == "semicircular":
        v0 = _nonzero_draw(rng, d)
        for _ in range(100):
            v1 = _nonzero_draw(rng, d)
            try:
                return SemicircularLayout(v0, v1, spec.num_classes)
            except DegeneratePlaneError:
                continue
        raise DegeneratePlaneError(
            "could not draw a second direction spanning a plane"
        )
    vectors = xavier_normal(rng, d, 1, (spec.num_classes, d))
    return FreeLayout(vectors, spec.num_classes)


def _nonzero_draw(rng: np.random.Generator, d: int) -> np.ndarray:
    for _ in range(100):
        v = xavier_normal(rng, d, 1, (d,))
        if float(np.linalg.norm(v)) > 0.0:
            return v
    raise ConfigurationError("random draws keep returning zero vectors")


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(model: CplModel, path, seed: int, epoch: int) -> None:
    """Write the spec, seed, epoch, and every parameter array as JSON."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "problem": model.spec.to_dict(),
        "seed": int(seed),
        "epoch": int(epoch),
        "parameters": {
            p.name: {"shape": list(p.value.shape), "data": p.value.ravel().tolist()}
            for p in model.params
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path):
    """Read a checkpoint; returns (model, seed, epoch)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path} is not a model checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version: {doc.get('version')}")
    spec = ProblemSpec.from_dict(doc["problem"])
    seed = int(doc["seed"])
    epoch = int(doc["epoch"])
    model = init_model(spec, seed)
    stored = doc["parameters"]
    expected = set(model.params.names())
    if set(stored) != expected:
        raise DataError(
            f"checkpoint parameters {sorted(stored)} do not match the "
            f"model's {sorted(expected)}"
        )
    for name, entry in stored.items():
        param = model.params[name]
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if arr.shape != param.value.shape:
            raise DataError(
                f"parameter {name} has shape {arr.shape}, expected {param.value.shape}"
            )
        np.copyto(param.value, arr)
    return model, seed, epoch
