"""Synthetic ordinal datasets, CSV ingestion, and seeded stratified splits.

Two generators provide desk-scale stand-ins for ordinal image benchmarks:

* ``gen_synthetic_linear`` -- Gaussian clusters whose means march along one
  random direction in class order, so the geometry matches a collinear proxy
  layout.  The ``overlap`` knob shrinks the spacing between means to dial in
  a noisy regime.
* ``gen_synthetic_ring`` -- unit-norm cluster means spread over a semicircle
  in a random 2-plane, the natural habitat of the angular layout.

The CSV format is ``f0,...,f{d-1},label`` with a mandatory header.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError


@dataclass
class LabeledDataset:
    """Feature matrix, integer labels, class count, and where it came from."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    provenance: str

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ConfigurationError(
                f"features must be 2-d, got shape {self.features.shape}"
            )
        if self.labels.ndim != 1 or self.labels.shape[0] != self.features.shape[0]:
            raise ConfigurationError(
                f"{self.features.shape[0]} feature rows but "
                f"{self.labels.shape[0]} labels"
            )
        if self.num_classes < 2:
            raise ConfigurationError(
                f"need at least 2 classes, got {self.num_classes}"
            )
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= self.num_classes
        ):
            raise ConfigurationError(
                f"labels must lie in [0, {self.num_classes})"
            )

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices, provenance: str | None = None) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            features=self.features[idx],
            labels=self.labels[idx],
            num_classes=self.num_classes,
            provenance=provenance or self.provenance,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Train/val/test fractions (each > 0, summing to 1) plus a shuffle seed."""

    train_fraction: float = 0.75
    val_fraction: float = 0.05
    test_fraction: float = 0.20
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(not f > 0.0 for f in fracs):
            raise ConfigurationError("every split fraction must be > 0")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigurationError(
                f"split fractions must sum to 1, got {sum(fracs)}"
            )


def gen_synthetic_linear(
    num_classes: int,
    n_per_class: int,
    input_dim: int,
    noise_sigma: float,
    overlap: float,
    seed: int,
) -> LabeledDataset:
    """Gaussian clusters with collinear, class-ordered means.

    Class k is centered at ``k * (1 - overlap) * u`` for a seeded random unit
    direction ``u``; overlap in [0, 1) shrinks the spacing so clusters mix.
    """
    _check_gen_args(num_classes, n_per_class, input_dim, noise_sigma)
    if not 0.0 <= overlap < 1.0:
        raise ConfigurationError(f"overlap must lie in [0, 1), got {overlap}")
    rng = np.random.default_rng(seed)
    direction = _random_unit(rng, input_dim)
    spacing = 1.0 - overlap
    features = np.empty((num_classes * n_per_class, input_dim))
    labels = np.empty(num_classes * n_per_class, dtype=np.int64)
    for k in range(num_classes):
        rows = slice(k * n_per_class, (k + 1) * n_per_class)
        mean = k * spacing * direction
        features[rows] = mean + rng.normal(0.0, noise_sigma, (n_per_class, input_dim))
        labels[rows] = k
    return LabeledDataset(features, labels, num_classes, "synthetic-linear")


def gen_synthetic_ring(
    num_classes: int,
    n_per_class: int,
    input_dim: int,
    noise_sigma: float,
    seed: int,
) -> LabeledDataset:
    """Gaussian clusters whose unit-norm means span a semicircle in class order.

    Mean k sits at angle ``k * pi / (K - 1)`` inside a seeded random 2-plane,
    so pairwise mean angles are ``|i - j| * pi / (K - 1)``.
    """
    _check_gen_args(num_classes, n_per_class, input_dim, noise_sigma)
    if input_dim < 2:
        raise ConfigurationError("ring data needs input_dim >= 2 to span a plane")
    rng = np.random.default_rng(seed)
    e0 = _random_unit(rng, input_dim)
    e1 = _random_unit_orthogonal(rng, e0)
    angles = np.arange(num_classes) * np.pi / (num_classes - 1)
    features = np.empty((num_classes * n_per_class, input_dim))
    labels = np.empty(num_classes * n_per_class, dtype=np.int64)
    for k in range(num_classes):
        rows = slice(k * n_per_class, (k + 1) * n_per_class)
        mean = np.cos(angles[k]) * e0 + np.sin(angles[k]) * e1
        features[rows] = mean + rng.normal(0.0, noise_sigma, (n_per_class, input_dim))
        labels[rows] = k
    return LabeledDataset(features, labels, num_classes, "synthetic-ring")


def _check_gen_args(num_classes, n_per_class, input_dim, noise_sigma) -> None:
    if num_classes < 2:
        raise ConfigurationError(f"need at least 2 classes, got {num_classes}")
    if n_per_class < 1:
        raise ConfigurationError(f"n_per_class must be >= 1, got {n_per_class}")
    if input_dim < 1:
        raise ConfigurationError(f"input_dim must be >= 1, got {input_dim}")
    if noise_sigma < 0.0:
        raise ConfigurationError(f"noise_sigma must be >= 0, got {noise_sigma}")


def _random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    for _ in range(100):
        v = rng.normal(size=dim)
        norm = float(np.linalg.norm(v))
        if norm > 1e-12:
            return v / norm
    raise ConfigurationError("random draws keep returning zero vectors")


def _random_unit_orthogonal(rng: np.random.Generator, e0: np.ndarray) -> np.ndarray:
    for _ in range(100):
        v = rng.normal(size=e0.shape[0])
        v = v - (v @ e0) * e0
        norm = float(np.linalg.norm(v))
        if norm > 1e-9:
            return v / norm
    raise ConfigurationError("could not draw a direction orthogonal to the first")


# ---------------------------------------------------------------------------
# CSV round-trip
# ---------------------------------------------------------------------------

def write_csv(dataset: LabeledDataset, path) -> None:
    """Write ``f0,...,f{d-1},label`` rows; floats use shortest round-trip text."""
    d = dataset.input_dim
    header = ",".join([f"f{i}" for i in range(d)] + ["label"])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row, label in zip(dataset.features, dataset.labels):
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write(f",{int(label)}\n")


def load_csv(path, num_classes: int | None = None) -> LabeledDataset:
    """Parse a dataset CSV; class count is max label + 1 unless overridden."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in lines[0].split(",")]
    d = len(header) - 1
    expected = [f"f{i}" for i in range(d)] + ["label"]
    if d < 1 or header != expected:
        raise DataError(
            f"{path} header must be f0,...,f{{d-1}},label; got {lines[0]!r}"
        )
    if len(lines) == 1:
        raise DataError(f"{path} has a header but no data rows")
    features = np.empty((len(lines) - 1, d))
    labels = np.empty(len(lines) - 1, dtype=np.int64)
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split(",")
        if len(parts) != d + 1:
            raise DataError(
                f"{path} row {i}: expected {d + 1} columns, found {len(parts)}"
            )
        try:
            features[i - 1] = [float(x) for x in parts[:d]]
        except ValueError as exc:
            raise DataError(f"{path} row {i}: bad feature value ({exc})") from exc
        try:
            labels[i - 1] = int(parts[d])
        except ValueError as exc:
            raise DataError(
                f"{path} row {i}: label must be an integer, got {parts[d]!r}"
            ) from exc
    if labels.min() < 0:
        raise DataError(f"{path} contains negative labels")
    inferred = int(labels.max()) + 1
    if num_classes is None:
        num_classes = max(inferred, 2)
    elif inferred > num_classes:
        raise DataError(
            f"{path} contains label {int(labels.max())} but only "
            f"{num_classes} classes were declared"
        )
    return LabeledDataset(features, labels, num_classes, f"csv({path})")


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

def split(dataset: LabeledDataset, spec: SplitSpec):
    """Seeded, stratified partition into (train, val, test).

    Per class, counts follow the fractions by largest remainder; whenever a
    class has at least three samples, every split receives at least one of
    them.  The three parts are disjoint and cover the dataset.
    """
    if len(dataset) == 0:
        raise ConfigurationError("cannot split an empty dataset")
    rng = np.random.default_rng(spec.seed)
    fractions = (spec.train_fraction, spec.val_fraction, spec.test_fraction)
    parts = ([], [], [])
    for k in range(dataset.num_classes):
        class_idx = np.flatnonzero(dataset.labels == k)
        if class_idx.size == 0:
            continue
        class_idx = rng.permutation(class_idx)
        counts = _largest_remainder(class_idx.size, fractions)
        offset = 0
        for part, count in zip(parts, counts):
            part.extend(class_idx[offset : offset + count].tolist())
            offset += count
    names = ("train", "val", "test")
    out = []
    for name, idx in zip(names, parts):
        if not idx:
            raise ConfigurationError(
                f"the {name} split would be empty; adjust fractions or dataset size"
            )
        out.append(dataset.subset(np.sort(np.asarray(idx))))
    return tuple(out)


def _largest_remainder(total: int, fractions) -> list:
    """Integer allocation of ``total`` by fractions, remainders break ties.

    If total >= number of parts, every part gets at least one element.
    """
    exact = [total * f for f in fractions]
    counts = [int(np.floor(e)) for e in exact]
    leftover = total - sum(counts)
    remainders = sorted(
        range(len(fractions)),
        key=lambda i: (-(exact[i] - counts[i]), i),
    )
    for i in range(leftover):
        counts[remainders[i % len(fractions)]] += 1
    if total >= len(fractions):
        while any(c == 0 for c in counts):
            empty = counts.index(0)
            donor = max(range(len(counts)), key=lambda i: (counts[i], -i))
            counts[donor] -= 1
            counts[empty] += 1
    return counts
