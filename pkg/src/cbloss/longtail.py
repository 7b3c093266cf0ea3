"""Long-tailed class-count profiles and desk-scale dataset plumbing.

A profile assigns class ``i`` (0-indexed) the count ``round(n_0 * mu**i)``,
floored at 1, with ``mu`` in (0, 1]; the imbalance factor of a dataset is
the largest class count divided by the smallest.  Synthetic data replaces
images at desk scale: classes are isotropic Gaussian clusters around
seed-deterministic means, so train and test splits built from the same spec
share the same class geometry while drawing independent noise.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.random import SeedSequence, default_rng

from cbloss.effnum import ClassCounts, as_counts

__all__ = [
    "LongTailProfile",
    "SyntheticDataSpec",
    "Dataset",
    "mu_from_imbalance",
    "build_profile",
    "imbalance_factor",
    "generate_synthetic",
    "subsample_to_profile",
    "ingest_csv",
    "write_dataset_csv",
    "write_profile_csv",
    "read_profile_csv",
]


@dataclass(frozen=True)
class LongTailProfile:
    """Exponentially decaying per-class counts; build via ``build_profile``."""

    n_classes: int
    base_count: int
    mu: float
    counts: ClassCounts

    def __post_init__(self) -> None:
        counts = as_counts(self.counts)
        object.__setattr__(self, "counts", counts)
        arr = counts.counts
        if counts.num_classes != self.n_classes:
            raise ValueError("counts length must equal n_classes")
        if np.any(arr < 1):
            raise ValueError("profile counts must be >= 1")
        if np.any(np.diff(arr) > 0):
            raise ValueError("profile counts must be non-increasing")


@dataclass(frozen=True)
class SyntheticDataSpec:
    """Geometry of the synthetic task: dimension, mean scale, noise, seed."""

    dim: int
    class_mean_scale: float = 2.5
    noise_std: float = 1.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")
        if not float(self.noise_std) > 0:
            raise ValueError("noise_std must be > 0")
        if not float(self.class_mean_scale) > 0:
            raise ValueError("class_mean_scale must be > 0")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, integer labels, and per-class counts kept in sync."""

    features: np.ndarray
    labels: np.ndarray
    class_counts: ClassCounts

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if labels.ndim != 1 or labels.size != features.shape[0]:
            raise ValueError("labels must be 1-D with one entry per feature row")
        counts = as_counts(self.class_counts)
        if labels.size and (labels.min() < 0 or labels.max() >= counts.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        observed = np.bincount(labels, minlength=counts.num_classes)
        if not np.array_equal(observed, counts.counts):
            raise ValueError("class_counts disagree with labels")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_counts", counts)

    @classmethod
    def from_arrays(cls, features, labels, num_classes: int | None = None) -> "Dataset":
        counts = ClassCounts.from_labels(np.asarray(labels), num_classes=num_classes)
        return cls(np.asarray(features), np.asarray(labels), counts)

    @property
    def num_samples(self) -> int:
        return int(self.labels.size)

    @property
    def num_classes(self) -> int:
        return self.class_counts.num_classes

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])


def mu_from_imbalance(n_classes: int, imbalance: float) -> float:
    """Decay rate giving the requested largest/smallest count ratio.

    Solves ``mu**(C-1) = 1 / imbalance`` so the last class's pre-rounding
    count is ``base_count / imbalance``.
    """
    n_classes = int(n_classes)
    imbalance = float(imbalance)
    if n_classes < 2:
        raise ValueError("need at least 2 classes to define an imbalance")
    if not imbalance >= 1.0:
        raise ValueError(f"imbalance must be >= 1, got {imbalance}")
    return imbalance ** (-1.0 / (n_classes - 1))


def build_profile(n_classes: int, base_count: int, mu: float) -> LongTailProfile:
    """Counts ``max(1, round(base_count * mu**i))``, round-half-to-even."""
    n_classes = int(n_classes)
    base_count = int(base_count)
    mu = float(mu)
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    if base_count < 1:
        raise ValueError("base_count must be >= 1")
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"mu must be in (0, 1], got {mu}")
    raw = base_count * mu ** np.arange(n_classes)
    counts = np.maximum(1, np.rint(raw).astype(np.int64))
    return LongTailProfile(n_classes, base_count, mu, ClassCounts(counts))


def imbalance_factor(counts) -> float:
    """Largest class count divided by smallest."""
    arr = as_counts(counts).counts
    if np.any(arr == 0):
        raise ValueError("imbalance factor undefined with empty classes")
    return float(arr.max()) / float(arr.min())


def _class_means(spec: SyntheticDataSpec, n_classes: int) -> np.ndarray:
    # Means live on a sphere of radius class_mean_scale; their stream is
    # independent of the noise streams so all splits share geometry.
    rng = default_rng(SeedSequence(entropy=[spec.rng_seed, 0]))
    directions = rng.standard_normal((n_classes, spec.dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return spec.class_mean_scale * directions / norms


def generate_synthetic(
    profile: LongTailProfile, spec: SyntheticDataSpec, split: str = "train"
) -> Dataset:
    """Gaussian-cluster dataset following the profile's per-class counts.

    Deterministic in (spec.rng_seed, split): the ``split`` tag keys an
    independent noise stream, so a train split and a balanced test split
    generated from the same spec share class means but not noise.
    """
    means = _class_means(spec, profile.n_classes)
    noise_key = zlib.crc32(split.encode())
    rng = default_rng(SeedSequence(entropy=[spec.rng_seed, 1, noise_key]))
    counts = profile.counts.counts
    total = int(counts.sum())
    labels = np.repeat(np.arange(profile.n_classes), counts)
    noise = rng.standard_normal((total, spec.dim))
    features = means[labels] + spec.noise_std * noise
    return Dataset(features, labels, profile.counts)


def subsample_to_profile(data: Dataset, profile: LongTailProfile, seed: int) -> Dataset:
    """Uniform per-class subsample (without replacement) matching the profile.

    Selected rows keep their original order and exact feature values.
    """
    if profile.n_classes > data.num_classes:
        raise ValueError(
            f"profile has {profile.n_classes} classes but data has {data.num_classes}"
        )
    targets = profile.counts.counts
    have = data.class_counts.counts
    short = np.flatnonzero(have[: profile.n_classes] < targets)
    if short.size:
        i = int(short[0])
        raise ValueError(
            f"class {i} has {int(have[i])} samples, profile needs {int(targets[i])}"
        )
    rng = default_rng(SeedSequence(entropy=[int(seed)]))
    keep: list[np.ndarray] = []
    for i in range(profile.n_classes):
        idx = np.flatnonzero(data.labels == i)
        chosen = rng.choice(idx, size=int(targets[i]), replace=False)
        keep.append(np.sort(chosen))
    order = np.concatenate(keep)
    return Dataset(data.features[order], data.labels[order], profile.counts)


def ingest_csv(path, expected_dim: int | None = None, num_classes: int | None = None) -> Dataset:
    """Parse ``label,feature_1,...,feature_d`` rows (header required).

    Labels are 0-indexed integers.  Ragged rows, non-numeric cells and
    negative labels are reported with their line number.
    """
    path = Path(path)
    labels: list[int] = []
    rows: list[list[float]] = []
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty dataset (no header)")
        dim = expected_dim if expected_dim is not None else len(header) - 1
        if dim < 1:
            raise ValueError(f"{path}: header must name a label and >= 1 feature")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected {dim + 1} fields, got {len(row)}"
                )
            try:
                label = int(row[0])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad label {row[0]!r}") from exc
            if label < 0:
                raise ValueError(f"{path}:{lineno}: label {label} out of range")
            if num_classes is not None and label >= num_classes:
                raise ValueError(f"{path}:{lineno}: label {label} out of range")
            try:
                rows.append([float(cell) for cell in row[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric feature") from exc
            labels.append(label)
    if not rows:
        raise ValueError(f"{path}: empty dataset")
    return Dataset.from_arrays(np.asarray(rows), np.asarray(labels), num_classes=num_classes)


def write_dataset_csv(data: Dataset, path) -> None:
    """Inverse of ``ingest_csv``; float cells use round-trippable repr."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["label"] + [f"feature_{j}" for j in range(data.dim)])
        for label, row in zip(data.labels, data.features):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])


def write_profile_csv(counts, path) -> None:
    counts = as_counts(counts)
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["class_index", "count"])
        for i, n in enumerate(counts.counts):
            writer.writerow([i, int(n)])


def read_profile_csv(path) -> ClassCounts:
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["class_index", "count"]:
            raise ValueError(f"{path}: expected header 'class_index,count'")
        pairs = [(int(row[0]), int(row[1])) for row in reader if row]
    if not pairs:
        raise ValueError(f"{path}: empty profile")
    counts = np.zeros(max(i for i, _ in pairs) + 1, dtype=np.int64)
    for i, n in pairs:
        counts[i] = n
    return ClassCounts(counts)
