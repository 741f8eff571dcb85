"""Feature/proxy similarity functions and layout-constrained proxy generators.

Similarities come in three flavours:

* ``euclidean_t``  -- ``-log(1 + ||f - p||^2)``, squared Euclidean distance
  passed through a heavy-tailed log kernel (smooth gradients at any distance).
* ``cosine``       -- ``s * cos(f, p)`` with a scale ``s > 1``.
* ``neg_euclidean`` -- ``-||f - p||``, kept as an ablation variant.

Proxy layouts turn a handful of learnable vectors into the ``K`` class
proxies.  The linear layout places them evenly along one direction, the
semicircular layout spreads unit proxies over half a circle inside the plane
spanned by two vectors, and the free layout gives every class its own vector.
Each layout knows how to pull gradients on the proxies back onto its own
parameters.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegeneratePlaneError, DegenerateVectorError

SIMILARITY_KINDS = ("euclidean_t", "cosine", "neg_euclidean")
LAYOUT_KINDS = ("linear", "semicircular", "free")

# |cos| above this bound counts as a collapsed plane; the training path
# clamps instead of failing because sin(gamma) sits in a denominator.
_COS_CLAMP = 1.0 - 1e-7
_SINGULAR_DIST = 1e-12


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ConfigurationError(f"{name} must be a 1-d vector, got shape {v.shape}")
    return v


def _check_same_dim(f: np.ndarray, p: np.ndarray) -> None:
    if f.shape != p.shape:
        raise ConfigurationError(
            f"feature and proxy dimensions differ: {f.shape[0]} vs {p.shape[0]}"
        )


def sim_euclidean_t(f, p) -> float:
    """Similarity ``-log(1 + ||f - p||^2)``; 0 iff the vectors coincide."""
    fv = _as_vector(f, "feature")
    pv = _as_vector(p, "proxy")
    _check_same_dim(fv, pv)
    diff = fv - pv
    return float(-np.log1p(diff @ diff))


def sim_cosine(f, p, s: float = 6.0) -> float:
    """Scaled cosine similarity ``s * f.p / (||f|| ||p||)``, in [-s, s]."""
    fv = _as_vector(f, "feature")
    pv = _as_vector(p, "proxy")
    _check_same_dim(fv, pv)
    nf = float(np.linalg.norm(fv))
    np_ = float(np.linalg.norm(pv))
    if nf == 0.0 or np_ == 0.0:
        raise DegenerateVectorError("cosine similarity needs non-zero vectors")
    return float(s * (fv @ pv) / (nf * np_))


def sim_neg_euclidean(f, p) -> float:
    """Plain negative Euclidean distance ``-||f - p||`` (ablation variant)."""
    fv = _as_vector(f, "feature")
    pv = _as_vector(p, "proxy")
    _check_same_dim(fv, pv)
    return float(-np.linalg.norm(fv - pv))


@dataclass(frozen=True)
class Similarity:
    """A similarity function choice plus its parameters.

    ``pairwise``/``pairwise_vjp`` are the batched forward and
    vector-Jacobian-product used by the losses; ``value``/``grad`` are the
    single-pair versions used in tests and by ``grad_similarity``.
    """

    kind: str
    scale: float = 6.0

    def __post_init__(self):
        if self.kind not in SIMILARITY_KINDS:
            raise ConfigurationError(f"unknown similarity kind: {self.kind!r}")
        if self.kind == "cosine" and not self.scale > 1.0:
            raise ConfigurationError(
                f"cosine scale must be > 1, got {self.scale}"
            )

    def value(self, f, p) -> float:
        if self.kind == "euclidean_t":
            return sim_euclidean_t(f, p)
        if self.kind == "cosine":
            return sim_cosine(f, p, self.scale)
        return sim_neg_euclidean(f, p)

    def grad(self, f, p):
        """Analytic partials ``(d sim / d f, d sim / d p)``."""
        fv = _as_vector(f, "feature")
        pv = _as_vector(p, "proxy")
        _check_same_dim(fv, pv)
        if self.kind == "euclidean_t":
            diff = fv - pv
            coef = 2.0 / (1.0 + diff @ diff)
            return -coef * diff, coef * diff
        if self.kind == "cosine":
            nf = np.linalg.norm(fv)
            np_ = np.linalg.norm(pv)
            if nf == 0.0 or np_ == 0.0:
                raise DegenerateVectorError("cosine similarity needs non-zero vectors")
            fu = fv / nf
            pu = pv / np_
            c = fu @ pu
            return self.scale * (pu - c * fu) / nf, self.scale * (fu - c * pu) / np_
        diff = fv - pv
        dist = np.linalg.norm(diff)
        if dist < _SINGULAR_DIST:
            warnings.warn(
                "neg_euclidean gradient is undefined at zero distance; returning zeros",
                RuntimeWarning,
                stacklevel=2,
            )
            return np.zeros_like(fv), np.zeros_like(pv)
        unit = diff / dist
        return -unit, unit

    def pairwise(self, left, right) -> np.ndarray:
        """Similarity matrix between rows of ``left`` (n,d) and ``right`` (m,d)."""
        left = np.atleast_2d(np.asarray(left, dtype=np.float64))
        right = np.atleast_2d(np.asarray(right, dtype=np.float64))
        if left.shape[1] != right.shape[1]:
            raise ConfigurationError(
                f"dimension mismatch: {left.shape[1]} vs {right.shape[1]}"
            )
        if self.kind == "cosine":
            lu = _unit_rows(left)
            ru = _unit_rows(right)
            return self.scale * (lu @ ru.T)
        diffs = left[:, None, :] - right[None, :, :]
        sq = np.einsum("nkd,nkd->nk", diffs, diffs)
        if self.kind == "euclidean_t":
            return -np.log1p(sq)
        return -np.sqrt(sq)

    def pairwise_vjp(self, left, right, weights):
        """Backward pass of ``pairwise``.

        Given ``weights[n, k] = dL / d sim(left_n, right_k)``, returns
        ``(dL/dleft, dL/dright)``.
        """
        left = np.atleast_2d(np.asarray(left, dtype=np.float64))
        right = np.atleast_2d(np.asarray(right, dtype=np.float64))
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (left.shape[0], right.shape[0]):
            raise ConfigurationError(
                f"weight shape {w.shape} does not match ({left.shape[0]}, {right.shape[0]})"
            )
        if self.kind == "cosine":
            lu = _unit_rows(left)
            ru = _unit_rows(right)
            cos = lu @ ru.T
            ln = np.linalg.norm(left, axis=1, keepdims=True)
            rn = np.linalg.norm(right, axis=1, keepdims=True)
            dleft = self.scale * (w @ ru - np.sum(w * cos, axis=1, keepdims=True) * lu) / ln
            dright = self.scale * (w.T @ lu - np.sum(w * cos, axis=0)[:, None] * ru) / rn
            return dleft, dright
        diffs = left[:, None, :] - right[None, :, :]
        sq = np.einsum("nkd,nkd->nk", diffs, diffs)
        if self.kind == "euclidean_t":
            coef = 2.0 * w / (1.0 + sq)
        else:
            dist = np.sqrt(sq)
            singular = dist < _SINGULAR_DIST
            if np.any(singular & (w != 0.0)):
                warnings.warn(
                    "neg_euclidean gradient is undefined at zero distance; "
                    "dropping the singular terms",
                    RuntimeWarning,
                    stacklevel=2,
                )
            coef = np.where(singular, 0.0, w / np.where(singular, 1.0, dist))
        dleft = -np.einsum("nk,nkd->nd", coef, diffs)
        dright = np.einsum("nk,nkd->kd", coef, diffs)
        return dleft, dright


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateVectorError("cosine similarity needs non-zero vectors")
    return mat / norms


def grad_similarity(similarity: Similarity, f, p):
    """Analytic ``(d sim/d f, d sim/d p)`` for any similarity kind."""
    return similarity.grad(f, p)


# ---------------------------------------------------------------------------
# proxy generators
# ---------------------------------------------------------------------------

def gen_linear_proxies(v0, num_classes: int) -> np.ndarray:
    """Proxies ``p_k = k * v0``: collinear, evenly spaced, p_0 at the origin."""
    v = _as_vector(v0, "v0")
    if num_classes < 2:
        raise ConfigurationError(f"need at least 2 classes, got {num_classes}")
    if float(np.linalg.norm(v)) == 0.0:
        raise DegenerateVectorError("linear layout needs a non-zero step vector")
    return np.arange(num_classes, dtype=np.float64)[:, None] * v[None, :]


def gen_semicircular_proxies(v0, v1, num_classes: int) -> np.ndarray:
    """Unit proxies evenly spread over the semicircle from ``v0`` to ``-v0``.

    The arc lives in the plane spanned by ``v0`` and ``v1``; adjacent proxies
    are separated by an angle of ``pi / (K - 1)``.  Raises if the two vectors
    do not span a plane.
    """
    return _semicircle(
        _as_vector(v0, "v0"), _as_vector(v1, "v1"), num_classes, clamp=False
    )


def gen_free_proxies(vectors, num_classes: int) -> np.ndarray:
    """Identity layout: each class keeps its own vector as the proxy."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigurationError(f"expected a (K, d) array, got shape {arr.shape}")
    if arr.shape[0] != num_classes:
        raise ConfigurationError(
            f"expected {num_classes} proxy vectors, got {arr.shape[0]}"
        )
    return arr.copy()


def _semicircle(v0, v1, num_classes, clamp):
    if num_classes < 2:
        raise ConfigurationError(f"need at least 2 classes, got {num_classes}")
    if v0.shape != v1.shape:
        raise ConfigurationError(
            f"v0/v1 dimensions differ: {v0.shape[0]} vs {v1.shape[0]}"
        )
    n0 = float(np.linalg.norm(v0))
    n1 = float(np.linalg.norm(v1))
    if n0 == 0.0 or n1 == 0.0:
        raise DegenerateVectorError("semicircular layout needs non-zero vectors")
    u0 = v0 / n0
    u1 = v1 / n1
    c = float(u0 @ u1)
    if abs(c) >= _COS_CLAMP:
        if not clamp:
            raise DegeneratePlaneError(
                "v0 and v1 are (anti)parallel; they must span a plane"
            )
        c = math.copysign(_COS_CLAMP, c)
    gamma = math.acos(c)
    beta = math.pi / (num_classes - 1)
    ks = np.arange(num_classes, dtype=np.float64)
    sin_gamma = math.sin(gamma)
    a = np.sin(gamma - ks * beta) / sin_gamma
    b = np.sin(ks * beta) / sin_gamma
    return a[:, None] * u0[None, :] + b[:, None] * u1[None, :]


# ---------------------------------------------------------------------------
# layouts: learnable parameters -> proxies, plus the backward pass
# ---------------------------------------------------------------------------

class ProxyLayout:
    """Base class: owns the learnable arrays behind the proxy set."""

    kind: str

    def __init__(self, num_classes: int, params: dict):
        if num_classes < 2:
            raise ConfigurationError(f"need at least 2 classes, got {num_classes}")
        self.num_classes = num_classes
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    @property
    def dim(self) -> int:
        return next(iter(self.params.values())).shape[-1]

    def proxies(self) -> np.ndarray:
        raise NotImplementedError

    def backprop(self, dproxies: np.ndarray) -> dict:
        """Map ``dL/dproxies`` (K, d) to gradients on each parameter array."""
        raise NotImplementedError

    def apply_constraints(self) -> None:
        """Post-optimizer-step projection hook (no-op for most layouts)."""

    def copy(self) -> "ProxyLayout":
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone


class LinearLayout(ProxyLayout):
    """Collinear proxies ``p_k = k * v0`` from a single learnable vector.

    ``norm_mode="fixed"`` re-projects the step vector to a target norm after
    every optimizer step (an ablation of the default learnable norm).
    """

    kind = "linear"

    def __init__(self, v0, num_classes, norm_mode="learnable", fixed_norm=1.0):
        super().__init__(num_classes, {"v0": v0})
        if norm_mode not in ("learnable", "fixed"):
            raise ConfigurationError(f"unknown norm mode: {norm_mode!r}")
        if norm_mode == "fixed" and not fixed_norm > 0.0:
            raise ConfigurationError("fixed step norm must be positive")
        if float(np.linalg.norm(self.params["v0"])) == 0.0:
            raise DegenerateVectorError("linear layout needs a non-zero step vector")
        self.norm_mode = norm_mode
        self.fixed_norm = float(fixed_norm)
        self.apply_constraints()

    def proxies(self) -> np.ndarray:
        return gen_linear_proxies(self.params["v0"], self.num_classes)

    def backprop(self, dproxies) -> dict:
        ks = np.arange(self.num_classes, dtype=np.float64)
        return {"v0": ks @ dproxies}

    def apply_constraints(self) -> None:
        if self.norm_mode == "fixed":
            v0 = self.params["v0"]
            norm = float(np.linalg.norm(v0))
            if norm == 0.0:
                raise DegenerateVectorError("step vector collapsed to zero norm")
            v0 *= self.fixed_norm / norm


class SemicircularLayout(ProxyLayout):
    """Unit proxies on a semicircle inside the plane of two learnable vectors."""

    kind = "semicircular"

    def __init__(self, v0, v1, num_classes):
        super().__init__(num_classes, {"v0": v0, "v1": v1})
        # Fail fast on a collapsed plane at construction; during training the
        # forward pass clamps instead (see _semicircle).
        gen_semicircular_proxies(self.params["v0"], self.params["v1"], num_classes)

    def proxies(self) -> np.ndarray:
        return _semicircle(
            self.params["v0"], self.params["v1"], self.num_classes, clamp=True
        )

    def backprop(self, dproxies) -> dict:
        v0 = self.params["v0"]
        v1 = self.params["v1"]
        n0 = float(np.linalg.norm(v0))
        n1 = float(np.linalg.norm(v1))
        u0 = v0 / n0
        u1 = v1 / n1
        c = float(u0 @ u1)
        clamped = abs(c) >= _COS_CLAMP
        if clamped:
            c = math.copysign(_COS_CLAMP, c)
        gamma = math.acos(c)
        sin_gamma = math.sin(gamma)
        beta = math.pi / (self.num_classes - 1)
        ks = np.arange(self.num_classes, dtype=np.float64)
        a = np.sin(gamma - ks * beta) / sin_gamma
        b = np.sin(ks * beta) / sin_gamma
        # p_k = a_k u0 + b_k u1 with the weights a, b functions of gamma alone.
        d_u0 = a @ dproxies
        d_u1 = b @ dproxies
        da_dgamma = np.sin(ks * beta) / sin_gamma**2
        db_dgamma = -np.sin(ks * beta) * c / sin_gamma**2
        d_gamma = float(da_dgamma @ (dproxies @ u0) + db_dgamma @ (dproxies @ u1))
        if clamped:
            d_gamma = 0.0  # the clamp flattens the angle's dependence
        dc_dv0 = (u1 - c * u0) / n0
        dc_dv1 = (u0 - c * u1) / n1
        dgamma_dc = -1.0 / sin_gamma
        d_v0 = (d_u0 - (d_u0 @ u0) * u0) / n0 + d_gamma * dgamma_dc * dc_dv0
        d_v1 = (d_u1 - (d_u1 @ u1) * u1) / n1 + d_gamma * dgamma_dc * dc_dv1
        return {"v0": d_v0, "v1": d_v1}


class FreeLayout(ProxyLayout):
    """One learnable vector per class; proxies are the vectors themselves."""

    kind = "free"

    def __init__(self, vectors, num_classes):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.shape[0] != num_classes:
            raise ConfigurationError(
                f"expected {num_classes} proxy vectors, got {vectors.shape[0]}"
            )
        super().__init__(num_classes, {"vectors": vectors})

    def proxies(self) -> np.ndarray:
        return self.params["vectors"].copy()

    def backprop(self, dproxies) -> dict:
        return {"vectors": np.asarray(dproxies, dtype=np.float64).copy()}
