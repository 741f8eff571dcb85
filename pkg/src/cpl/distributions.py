"""Categorical distributions and unimodal label-smoothing targets.

Distributions are kept in both probability and log-probability form.  The
log form matters: sharply peaked smoothings (small temperature, many classes)
push tail probabilities below the smallest positive float, and any check on
shape or positivity has to read the logs instead.

Four smoothing families produce a unimodal target peaked at the true class:

* ``poisson``     -- log-pmf of a Poisson with rate ``true_class + 1/2``,
  divided by a temperature, then softmax-normalized.
* ``binomial``    -- log-pmf of a Binomial(K-1, p) with p placing the mean
  near the true class, temperature-scaled, softmax-normalized.
* ``exponential`` -- scores ``exp(-|k - k*| / tau)`` normalized by their sum.
* ``triangular``  -- a tent function dropping linearly from ``peak`` at the
  true class to ``floor`` at the farthest class, normalized by its sum.

The first two have negative log-scores, so only softmax normalization is
valid for them; the last two produce non-negative scores and default to
direct (divide-by-sum) normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError
from .geometry import Similarity

SMOOTHING_KINDS = ("poisson", "binomial", "exponential", "triangular")
NORMALIZATION_KINDS = ("softmax", "direct")


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def softmax(logits) -> np.ndarray:
    return np.exp(log_softmax(logits))


@dataclass(frozen=True)
class CategoricalDistribution:
    """A distribution over classes, carried as probs and log-probs."""

    probs: np.ndarray
    log_probs: np.ndarray

    @classmethod
    def from_logits(cls, logits) -> "CategoricalDistribution":
        z = np.asarray(logits, dtype=np.float64)
        if not np.all(np.isfinite(z)):
            raise NumericError("softmax needs finite logits")
        lp = log_softmax(z)
        return cls(probs=np.exp(lp), log_probs=lp)

    @classmethod
    def from_scores(cls, scores) -> "CategoricalDistribution":
        """Normalize non-negative scores by their sum."""
        s = np.asarray(scores, dtype=np.float64)
        if np.any(s < 0.0):
            raise ConfigurationError(
                "direct normalization needs non-negative scores"
            )
        total = float(np.sum(s))
        if not total > 0.0:
            raise ConfigurationError("scores sum to zero; cannot normalize")
        p = s / total
        with np.errstate(divide="ignore"):
            lp = np.log(p)
        return cls(probs=p, log_probs=lp)

    @property
    def num_classes(self) -> int:
        return self.probs.shape[-1]

    def mode(self) -> int:
        """Index of the largest probability (smallest index wins ties)."""
        return int(np.argmax(self.log_probs))

    def is_unimodal(self, atol: float = 0.0) -> bool:
        """True if log-probs rise to the mode and fall after it."""
        lp = self.log_probs
        m = self.mode()
        rising = np.all(np.diff(lp[: m + 1]) >= -atol)
        falling = np.all(np.diff(lp[m:]) <= atol)
        return bool(rising and falling)


def uniform_distribution(num_classes: int) -> CategoricalDistribution:
    if num_classes < 1:
        raise ConfigurationError(f"need at least 1 class, got {num_classes}")
    p = np.full(num_classes, 1.0 / num_classes)
    return CategoricalDistribution(probs=p, log_probs=np.log(p))


def total_variation(p: CategoricalDistribution, q: CategoricalDistribution) -> float:
    if p.num_classes != q.num_classes:
        raise ConfigurationError("distributions have different class counts")
    return float(0.5 * np.sum(np.abs(p.probs - q.probs)))


def assignment_distribution(
    f, proxies, similarity: Similarity
) -> CategoricalDistribution:
    """Class-assignment distribution of a feature: softmax over sim(f, p_k)."""
    logits = similarity.pairwise(np.atleast_2d(f), proxies)[0]
    return CategoricalDistribution.from_logits(logits)


def proxy_distribution(
    true_class: int, proxies, similarity: Similarity
) -> CategoricalDistribution:
    """A proxy's view of all proxies: softmax over sim(p_{k*}, p_k).

    The self term k = k* is included; self-similarity is maximal for both
    metrics, so the mode sits at the true class.
    """
    proxies = np.asarray(proxies, dtype=np.float64)
    _check_class(proxies.shape[0], true_class)
    logits = similarity.pairwise(proxies[true_class : true_class + 1], proxies)[0]
    return CategoricalDistribution.from_logits(logits)


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def smoothing_poisson(k: int, true_class: int, tau: float) -> float:
    """Temperature-scaled log-mass of a Poisson with rate ``true_class + 1/2``.

    The rate sits strictly between ``true_class`` and ``true_class + 1``, so
    the score is maximal at k = true_class.
    """
    if k < 0:
        raise ConfigurationError(f"class index must be >= 0, got {k}")
    if true_class < 0:
        raise ConfigurationError(f"true class must be >= 0, got {true_class}")
    if not tau > 0.0:
        raise ConfigurationError("poisson smoothing needs tau > 0")
    rate = true_class + 0.5
    return (k * math.log(rate) - rate - math.lgamma(k + 1.0)) / tau


def smoothing_binomial(k: int, true_class: int, num_classes: int, tau: float) -> float:
    """Temperature-scaled log-mass of Binomial(K-1, (2k*+1)/(2K)) at k."""
    _check_class(num_classes, true_class)
    if not 0 <= k < num_classes:
        raise ConfigurationError(f"class index {k} outside [0, {num_classes})")
    if not tau > 0.0:
        raise ConfigurationError("binomial smoothing needs tau > 0")
    n = num_classes - 1
    p = (2 * true_class + 1) / (2 * num_classes)
    return (_log_binom(n, k) + k * math.log(p) + (n - k) * math.log1p(-p)) / tau


def smoothing_exponential(k: int, true_class: int, num_classes: int, tau: float) -> float:
    """Normalized exponential-decay weight ``exp(-|k - k*|/tau) / sum_j(...)``."""
    _check_class(num_classes, true_class)
    if not 0 <= k < num_classes:
        raise ConfigurationError(f"class index {k} outside [0, {num_classes})")
    if not tau > 0.0:
        raise ConfigurationError("exponential smoothing needs tau > 0")
    offsets = np.abs(np.arange(num_classes) - true_class)
    w = np.exp(-offsets / tau)
    return float(w[k] / np.sum(w))


def smoothing_triangular(
    k: int, true_class: int, num_classes: int, peak: float, floor: float
) -> float:
    """Normalized tent weight dropping from ``peak`` at k* to ``floor`` at the far end."""
    _check_class(num_classes, true_class)
    if not 0 <= k < num_classes:
        raise ConfigurationError(f"class index {k} outside [0, {num_classes})")
    if not 0.0 < floor < peak:
        raise ConfigurationError("triangular smoothing needs 0 < floor < peak")
    offsets = np.abs(np.arange(num_classes) - true_class)
    span = max(true_class, num_classes - 1 - true_class)
    tent = peak - (peak - floor) * offsets / span
    return float(tent[k] / np.sum(tent))


@dataclass(frozen=True)
class Smoothing:
    """A unimodal smoothing family with its parameters and normalization."""

    kind: str
    tau: float = 0.0
    peak: float = 0.9
    floor: float = 0.1
    normalization: str = "softmax"

    def __post_init__(self):
        if self.kind not in SMOOTHING_KINDS:
            raise ConfigurationError(f"unknown smoothing kind: {self.kind!r}")
        if self.normalization not in NORMALIZATION_KINDS:
            raise ConfigurationError(
                f"unknown normalization: {self.normalization!r}"
            )
        if self.kind in ("poisson", "binomial", "exponential") and not self.tau > 0.0:
            raise ConfigurationError(f"{self.kind} smoothing needs tau > 0")
        if self.kind in ("poisson", "binomial") and self.normalization == "direct":
            raise ConfigurationError(
                f"{self.kind} scores are log-scale and can be negative; "
                "only softmax normalization applies"
            )
        if self.kind == "triangular" and not 0.0 < self.floor < self.peak:
            raise ConfigurationError(
                "triangular smoothing needs 0 < floor < peak"
            )

    @classmethod
    def poisson(cls, tau: float = 0.11, normalization: str = "softmax") -> "Smoothing":
        return cls(kind="poisson", tau=tau, normalization=normalization)

    @classmethod
    def binomial(cls, tau: float = 0.13, normalization: str = "softmax") -> "Smoothing":
        return cls(kind="binomial", tau=tau, normalization=normalization)

    @classmethod
    def exponential(cls, tau: float = 30.0, normalization: str = "direct") -> "Smoothing":
        return cls(kind="exponential", tau=tau, normalization=normalization)

    @classmethod
    def triangular(
        cls, peak: float = 0.9, floor: float = 0.1, normalization: str = "direct"
    ) -> "Smoothing":
        return cls(kind="triangular", peak=peak, floor=floor, normalization=normalization)

    def scores(self, num_classes: int, true_class: int) -> np.ndarray:
        """Raw per-class scores before normalization."""
        _check_class(num_classes, true_class)
        ks = np.arange(num_classes, dtype=np.float64)
        if self.kind == "poisson":
            rate = true_class + 0.5
            log_pmf = ks * math.log(rate) - rate - np.array(
                [math.lgamma(k + 1.0) for k in range(num_classes)]
            )
            return log_pmf / self.tau
        if self.kind == "binomial":
            n = num_classes - 1
            p = (2 * true_class + 1) / (2 * num_classes)
            log_pmf = np.array(
                [
                    _log_binom(n, k) + k * math.log(p) + (n - k) * math.log1p(-p)
                    for k in range(num_classes)
                ]
            )
            return log_pmf / self.tau
        offsets = np.abs(ks - true_class)
        if self.kind == "exponential":
            w = np.exp(-offsets / self.tau)
            return w / np.sum(w)
        span = max(true_class, num_classes - 1 - true_class)
        tent = self.peak - (self.peak - self.floor) * offsets / span
        return tent / np.sum(tent)

    def target(self, num_classes: int, true_class: int) -> CategoricalDistribution:
        """The smoothed label distribution for a given true class."""
        s = self.scores(num_classes, true_class)
        if self.normalization == "softmax":
            return CategoricalDistribution.from_logits(s)
        return CategoricalDistribution.from_scores(s)


def unimodal_target(
    true_class: int, smoothing: Smoothing, num_classes: int
) -> CategoricalDistribution:
    """The smoothed label distribution a soft-constrained model trains toward."""
    return smoothing.target(num_classes, true_class)


def _check_class(num_classes: int, true_class: int) -> None:
    if num_classes < 2:
        raise ConfigurationError(f"need at least 2 classes, got {num_classes}")
    if not 0 <= true_class < num_classes:
        raise ConfigurationError(
            f"true class {true_class} outside [0, {num_classes})"
        )
