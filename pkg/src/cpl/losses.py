"""Training losses: scaled KL divergences with analytic backward passes.

Three modes share one machinery:

* ``hard``  -- the basic loss alone.  Each sample's assignment distribution
  P(f) is pulled toward the proxy-to-proxies distribution Q(k*) of its true
  class.  Q is a stop-gradient target: it depends on the proxy parameters,
  but no gradient flows into it (the layout already forces unimodality, and
  optimizing the target too would let the proxies chase their own tail).
* ``soft``  -- basic loss plus ``alpha`` times a unimodality penalty that
  pulls each Q(k*) toward a smoothed label distribution U(k*).  Gradients do
  flow through Q here; that is the whole point of the penalty.
* ``upl``   -- plain cross-entropy of P(f) against the one-hot label, the
  unconstrained baseline.

All KL terms carry a 1/K factor.  It is a positive constant per problem, so
optima are unchanged, but keeping it preserves the magnitude regime that the
default ``alpha = 6`` was chosen for.  Batch losses are means over samples,
so learning rates do not depend on batch size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    CategoricalDistribution,
    Smoothing,
    log_softmax,
    proxy_distribution,
)
from .errors import ConfigurationError
from .geometry import ProxyLayout, Similarity

LOSS_MODES = ("hard", "soft", "upl")

_HARD_LAYOUTS = ("linear", "semicircular")


@dataclass(frozen=True)
class LossConfig:
    """Loss mode plus the soft-mode knobs (ignored by the other modes)."""

    mode: str = "hard"
    alpha: float = 6.0
    smoothing: Smoothing | None = None

    def __post_init__(self):
        if self.mode not in LOSS_MODES:
            raise ConfigurationError(f"unknown loss mode: {self.mode!r}")
        if self.alpha < 0.0:
            raise ConfigurationError(f"alpha must be >= 0, got {self.alpha}")
        if self.mode == "soft" and self.smoothing is None:
            raise ConfigurationError("soft mode needs a smoothing choice")

    def check_layout(self, layout_kind: str) -> None:
        if self.mode == "hard" and layout_kind not in _HARD_LAYOUTS:
            raise ConfigurationError(
                "hard mode needs a linear or semicircular layout; "
                f"got {layout_kind!r}"
            )
        if self.mode in ("soft", "upl") and layout_kind != "free":
            raise ConfigurationError(
                f"{self.mode} mode needs the free layout, got {layout_kind!r}"
            )


@dataclass
class LossOutput:
    """A scalar loss with its gradients.

    ``d_feature`` is the gradient with respect to the input feature (None
    for losses that take no feature); ``d_params`` maps layout parameter
    names to gradient arrays of matching shape.
    """

    value: float
    d_feature: np.ndarray | None
    d_params: dict = field(default_factory=dict)


@dataclass
class BatchLossOutput:
    """Batch mean loss with per-sample feature gradients and layout gradients."""

    value: float
    d_features: np.ndarray
    d_params: dict


def kl_basic(target: CategoricalDistribution, pred: CategoricalDistribution) -> float:
    """``(1/K) * KL(target || pred)``, computed in log space.

    Zero iff the distributions coincide; always >= 0.
    """
    if target.num_classes != pred.num_classes:
        raise ConfigurationError(
            f"distribution lengths differ: {target.num_classes} vs {pred.num_classes}"
        )
    k = target.num_classes
    with np.errstate(invalid="ignore"):
        terms = target.probs * (target.log_probs - pred.log_probs)
    return float(np.sum(np.where(target.probs > 0.0, terms, 0.0)) / k)


def loss_basic(
    f, true_class: int, layout: ProxyLayout, similarity: Similarity
) -> LossOutput:
    """Per-sample basic loss: (1/K) * KL(Q(k*) || P(f)) with Q held constant.

    Gradients flow through P into the feature and the layout parameters; the
    dependence of Q on those same parameters is deliberately cut.
    """
    proxies = layout.proxies()
    num_classes = proxies.shape[0]
    _check_label(true_class, num_classes)
    f = np.asarray(f, dtype=np.float64)
    z = similarity.pairwise(f[None, :], proxies)
    log_p = log_softmax(z[0])
    p = np.exp(log_p)
    q = proxy_distribution(true_class, proxies, similarity)
    value = kl_basic(q, CategoricalDistribution(probs=p, log_probs=log_p))
    dz = (p - q.probs) / num_classes
    d_feature, d_proxies = similarity.pairwise_vjp(f[None, :], proxies, dz[None, :])
    return LossOutput(
        value=value,
        d_feature=d_feature[0],
        d_params=layout.backprop(d_proxies),
    )


def loss_unimodal(
    true_class: int,
    layout: ProxyLayout,
    similarity: Similarity,
    smoothing: Smoothing,
) -> LossOutput:
    """Per-class unimodality penalty: (1/K) * KL(U(k*) || Q(k*)).

    U is a constant target; gradients flow through Q into the free proxy
    vectors.  Hard layouts are rejected: their geometry already guarantees a
    unimodal Q, and their training objective has no such term.
    """
    if layout.kind != "free":
        raise ConfigurationError(
            f"the unimodality penalty applies to the free layout only, got {layout.kind!r}"
        )
    proxies = layout.proxies()
    num_classes = proxies.shape[0]
    _check_label(true_class, num_classes)
    q = proxy_distribution(true_class, proxies, similarity)
    u = smoothing.target(num_classes, true_class)
    value = kl_basic(u, q)
    dqz = (q.probs - u.probs) / num_classes
    d_row, d_all = similarity.pairwise_vjp(
        proxies[true_class : true_class + 1], proxies, dqz[None, :]
    )
    d_proxies = d_all
    d_proxies[true_class] += d_row[0]
    return LossOutput(
        value=value, d_feature=None, d_params=layout.backprop(d_proxies)
    )


def loss_total(
    f, true_class: int, layout: ProxyLayout, similarity: Similarity, config: LossConfig
) -> LossOutput:
    """Per-sample training loss for whichever mode the config selects."""
    config.check_layout(layout.kind)
    if config.mode == "hard":
        return loss_basic(f, true_class, layout, similarity)
    if config.mode == "upl":
        return _cross_entropy_sample(f, true_class, layout, similarity)
    base = loss_basic(f, true_class, layout, similarity)
    extra = loss_unimodal(true_class, layout, similarity, config.smoothing)
    d_params = {
        name: base.d_params[name] + config.alpha * extra.d_params[name]
        for name in base.d_params
    }
    return LossOutput(
        value=base.value + config.alpha * extra.value,
        d_feature=base.d_feature,
        d_params=d_params,
    )


def _cross_entropy_sample(f, true_class, layout, similarity) -> LossOutput:
    proxies = layout.proxies()
    num_classes = proxies.shape[0]
    _check_label(true_class, num_classes)
    f = np.asarray(f, dtype=np.float64)
    z = similarity.pairwise(f[None, :], proxies)
    log_p = log_softmax(z[0])
    p = np.exp(log_p)
    dz = p.copy()
    dz[true_class] -= 1.0
    d_feature, d_proxies = similarity.pairwise_vjp(f[None, :], proxies, dz[None, :])
    return LossOutput(
        value=float(-log_p[true_class]),
        d_feature=d_feature[0],
        d_params=layout.backprop(d_proxies),
    )


# ---------------------------------------------------------------------------
# batched forward/backward used by the training loop
# ---------------------------------------------------------------------------

def batch_loss(
    features,
    labels,
    layout: ProxyLayout,
    similarity: Similarity,
    config: LossConfig,
) -> BatchLossOutput:
    """Mean loss over a batch with all gradients, in one vectorized pass.

    Equals the mean of the per-sample ``loss_total`` values and gradients
    (linearity); the batched path exists because the training loop calls it
    thousands of times.
    """
    config.check_layout(layout.kind)
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    labels = _check_labels(labels, layout.num_classes)
    if features.shape[0] != labels.shape[0]:
        raise ConfigurationError(
            f"{features.shape[0]} features but {labels.shape[0]} labels"
        )
    n = features.shape[0]
    proxies = layout.proxies()
    num_classes = proxies.shape[0]
    z = similarity.pairwise(features, proxies)
    log_p = log_softmax(z)
    p = np.exp(log_p)

    if config.mode == "upl":
        rows = np.arange(n)
        value = float(-np.mean(log_p[rows, labels]))
        dz = p / n
        dz[rows, labels] -= 1.0 / n
        d_features, d_proxies = similarity.pairwise_vjp(features, proxies, dz)
        return BatchLossOutput(value, d_features, layout.backprop(d_proxies))

    qz = similarity.pairwise(proxies, proxies)
    log_q = log_softmax(qz)
    q = np.exp(log_q)
    q_rows = q[labels]
    log_q_rows = log_q[labels]
    value = float(
        np.sum(q_rows * (log_q_rows - log_p)) / (num_classes * n)
    )
    dz = (p - q_rows) / (num_classes * n)
    d_features, d_proxies = similarity.pairwise_vjp(features, proxies, dz)

    if config.mode == "soft":
        counts = np.bincount(labels, minlength=num_classes).astype(np.float64)
        targets = np.stack(
            [
                config.smoothing.target(num_classes, k).probs
                for k in range(num_classes)
            ]
        )
        with np.errstate(invalid="ignore", divide="ignore"):
            kl_terms = np.where(
                targets > 0.0, targets * (np.log(targets) - log_q), 0.0
            )
        per_class = np.sum(kl_terms, axis=1) / num_classes
        value += config.alpha * float(counts @ per_class) / n
        dqz = (config.alpha / (num_classes * n)) * counts[:, None] * (q - targets)
        d_left, d_right = similarity.pairwise_vjp(proxies, proxies, dqz)
        d_proxies = d_proxies + d_left + d_right

    return BatchLossOutput(value, d_features, layout.backprop(d_proxies))


def batch_loss_value(
    features,
    labels,
    layout: ProxyLayout,
    similarity: Similarity,
    config: LossConfig,
    basic_targets=None,
) -> float:
    """Loss value only, with an optional frozen Q for the basic term.

    Finite-difference checks must respect the stop-gradient: when parameters
    are perturbed, the basic term keeps the unperturbed Q (passed in as
    ``basic_targets``, one row per class) while the soft penalty sees the
    recomputed Q.
    """
    config.check_layout(layout.kind)
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    labels = _check_labels(labels, layout.num_classes)
    n = features.shape[0]
    proxies = layout.proxies()
    num_classes = proxies.shape[0]
    z = similarity.pairwise(features, proxies)
    log_p = log_softmax(z)

    if config.mode == "upl":
        return float(-np.mean(log_p[np.arange(n), labels]))

    qz = similarity.pairwise(proxies, proxies)
    log_q = log_softmax(qz)
    if basic_targets is None:
        q_probs = np.exp(log_q)
        q_logs = log_q
    else:
        q_probs = np.asarray(basic_targets, dtype=np.float64)
        with np.errstate(divide="ignore"):
            q_logs = np.log(q_probs)
    with np.errstate(invalid="ignore"):
        basic_terms = np.where(
            q_probs[labels] > 0.0,
            q_probs[labels] * (q_logs[labels] - log_p),
            0.0,
        )
    value = float(np.sum(basic_terms) / (num_classes * n))
    if config.mode == "soft":
        counts = np.bincount(labels, minlength=num_classes).astype(np.float64)
        targets = np.stack(
            [
                config.smoothing.target(num_classes, k).probs
                for k in range(num_classes)
            ]
        )
        with np.errstate(invalid="ignore", divide="ignore"):
            kl_terms = np.where(
                targets > 0.0, targets * (np.log(targets) - log_q), 0.0
            )
        per_class = np.sum(kl_terms, axis=1) / num_classes
        value += config.alpha * float(counts @ per_class) / n
    return value


def _check_label(true_class: int, num_classes: int) -> None:
    if not 0 <= true_class < num_classes:
        raise ConfigurationError(
            f"true class {true_class} outside [0, {num_classes})"
        )


def _check_labels(labels, num_classes: int) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigurationError("labels must be a non-empty 1-d array")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ConfigurationError("labels must be integers")
    if np.any(arr < 0) or np.any(arr >= num_classes):
        raise ConfigurationError(f"labels must lie in [0, {num_classes})")
    return arr.astype(np.int64)
