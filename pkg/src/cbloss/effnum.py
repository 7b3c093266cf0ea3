"""Effective-sample-size math and class-balanced weight computation.

The marginal value of extra samples from one class decays geometrically.
With overlap parameter ``beta`` in [0, 1), the effective number of ``n``
samples is ``(1 - beta**n) / (1 - beta)``: it equals 1 when beta = 0 (a
single prototype covers the whole class) and approaches ``n`` as beta -> 1
(every sample is unique).  ``beta = (N - 1) / N`` where ``N`` is the volume
of distinct prototypes, so ``N = 1 / (1 - beta)``.

Class weights proportional to the inverse effective number, normalized to
sum to the number of classes, interpolate smoothly between no re-weighting
(beta = 0) and re-weighting by inverse class frequency (beta -> 1).
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EffNumParams",
    "ClassCounts",
    "WeightVector",
    "as_counts",
    "effective_number",
    "effective_number_recursive",
    "beta_from_prototypes",
    "prototypes_from_beta",
    "class_balanced_weights",
]


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 <= beta < 1.0 or math.isnan(beta):
        raise ValueError(f"beta must be in [0, 1), got {beta}")
    return beta


def _check_n(n: int) -> int:
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return n


@dataclass(frozen=True)
class EffNumParams:
    """Overlap parameter ``beta`` and the prototype volume it implies."""

    beta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", _check_beta(self.beta))

    @property
    def n_total_volume(self) -> float:
        """Volume of all possible data for the class, ``1 / (1 - beta)``."""
        return prototypes_from_beta(self.beta)

    @classmethod
    def from_prototypes(cls, n_prototypes: float) -> "EffNumParams":
        return cls(beta_from_prototypes(n_prototypes))


@dataclass(frozen=True)
class ClassCounts:
    """Per-class sample counts: non-negative integers, at least one positive."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("counts must be a non-empty 1-D sequence")
        if not np.issubdtype(arr.dtype, np.integer):
            rounded = np.asarray(arr, dtype=np.float64)
            if not np.all(rounded == np.floor(rounded)):
                raise ValueError("counts must be integers")
        arr = arr.astype(np.int64)
        if np.any(arr < 0):
            raise ValueError("counts must be non-negative")
        if not np.any(arr > 0):
            raise ValueError("at least one class count must be positive")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def num_classes(self) -> int:
        return int(self.counts.size)

    @classmethod
    def from_labels(cls, labels: np.ndarray, num_classes: int | None = None) -> "ClassCounts":
        labels = np.asarray(labels, dtype=np.int64)
        width = int(labels.max()) + 1 if num_classes is None else int(num_classes)
        return cls(np.bincount(labels, minlength=width))

    def __len__(self) -> int:
        return self.num_classes

    def __getitem__(self, i):
        return int(self.counts[i])


def as_counts(counts) -> ClassCounts:
    """Coerce a ClassCounts or any integer sequence into ClassCounts."""
    if isinstance(counts, ClassCounts):
        return counts
    return ClassCounts(np.asarray(counts))


@dataclass(frozen=True)
class WeightVector:
    """Normalized class-balance weights; sums to the number of classes."""

    alphas: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.alphas, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("alphas must be a non-empty 1-D vector")
        if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
            raise ValueError("alphas must be positive and finite")
        total = float(arr.sum())
        c = arr.size
        if abs(total - c) > 1e-9 * c:
            raise ValueError(f"alphas must sum to the class count {c}, got {total}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "alphas", arr)

    @property
    def num_classes(self) -> int:
        return int(self.alphas.size)

    def __getitem__(self, i) -> float:
        return float(self.alphas[i])


def effective_number(beta: float, n: int) -> float:
    """Effective number of ``n`` samples, ``(1 - beta**n) / (1 - beta)``.

    ``beta**n`` is evaluated through ``expm1(n * log1p(beta - 1))`` so that
    values of beta close to 1 (where the naive power loses all precision)
    stay accurate.  The result is confined to the mathematically valid range
    ``[1, min(n, 1 / (1 - beta))]`` to absorb the last ulp of rounding.
    """
    beta = _check_beta(beta)
    n = _check_n(n)
    if beta == 0.0:
        return 1.0
    # log(beta) via log1p(beta - 1): beta - 1 is exact for beta near 1.
    one_minus_pow = -math.expm1(n * math.log1p(beta - 1.0))
    value = one_minus_pow / (1.0 - beta)
    cap = min(float(n), 1.0 / (1.0 - beta))
    return min(max(value, 1.0), cap)


def effective_number_recursive(beta: float, n: int) -> float:
    """Effective number by iterating ``E_k = 1 + beta * E_{k-1}`` from E_1 = 1.

    Slower than the closed form but independent of it; used as an oracle.
    """
    beta = _check_beta(beta)
    n = _check_n(n)
    e = 1.0
    for _ in range(n - 1):
        e = 1.0 + beta * e
    return e


def beta_from_prototypes(n_prototypes: float) -> float:
    """Overlap parameter for a prototype volume N >= 1: ``(N - 1) / N``."""
    n_prototypes = float(n_prototypes)
    if not n_prototypes >= 1.0:
        raise ValueError(f"prototype volume must be >= 1, got {n_prototypes}")
    return (n_prototypes - 1.0) / n_prototypes


def prototypes_from_beta(beta: float) -> float:
    """Prototype volume implied by beta: ``1 / (1 - beta)``."""
    beta = _check_beta(beta)
    return 1.0 / (1.0 - beta)


def class_balanced_weights(counts, beta: float) -> WeightVector:
    """Class weights inversely proportional to each class's effective number.

    Raw weights ``(1 - beta) / (1 - beta**n_i)`` are rescaled so they sum to
    the number of classes.  ``beta = 0`` and equal counts both produce the
    exact all-ones vector, making the weighting a strict no-op in those
    cases.  Classes with zero count have no defined weight; drop or remap
    them before calling.
    """
    counts = as_counts(counts)
    beta = _check_beta(beta)
    arr = counts.counts
    if np.any(arr == 0):
        empty = np.flatnonzero(arr == 0).tolist()
        raise ValueError(
            f"cannot weight empty classes (zero count at indices {empty}); "
            "drop or remap them first"
        )
    c = counts.num_classes
    if beta == 0.0 or np.all(arr == arr[0]):
        return WeightVector(np.ones(c))
    one_minus_pow = -np.expm1(arr * math.log1p(beta - 1.0))
    raw = (1.0 - beta) / one_minus_pow
    alphas = raw * (c / raw.sum())
    return WeightVector(alphas)
