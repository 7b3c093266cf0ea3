"""Softmax, one-vs-all sigmoid and focal losses with analytic gradients.

All three families consume raw logits ``z`` of length C and a single
ground-truth label ``y``; outputs carry the scalar loss value and its exact
gradient with respect to ``z``.  The sigmoid and focal families work on the
sign-flipped logits ``z^t`` (target logit kept, all others negated), which
turns C one-vs-all terms into a uniform sum of log-sigmoids.

The class-balance term is a single positive scalar per sample: the
normalized inverse effective number of the ground-truth class.  Scaling a
loss by it never moves the argmin over logits.

Numerics: log(sigmoid(x)) is evaluated as ``-logaddexp(0, -x)`` and
``1 - sigmoid(x)`` as ``sigmoid(-x)``, so values stay exact for logits far
beyond +-1000.  The focal gradient is algebraically rearranged to

    d/dz^t [-(1-p)^gamma * log p] = gamma * p * (1-p)**gamma * log(p)
                                    - (1-p)**(gamma+1)

which contains no division by p, so the p -> 0 and p -> 1 corners are
well-defined without clamping, and gamma = 0 reproduces the sigmoid
cross-entropy bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cbloss.effnum import ClassCounts, as_counts, class_balanced_weights

__all__ = [
    "FAMILIES",
    "ClassBalance",
    "LossSpec",
    "LossOutput",
    "softmax_probs",
    "softmax_ce",
    "transform_zt",
    "sigmoid_ce",
    "focal",
    "class_balanced",
    "cb_focal_alpha_equivalence_check",
    "softmax_ce_batch",
    "sigmoid_ce_batch",
    "focal_batch",
    "loss_batch",
]

FAMILIES = ("softmax_ce", "sigmoid_ce", "focal")


@dataclass(frozen=True)
class ClassBalance:
    """Class-balance term: overlap parameter plus (optionally) the counts.

    When ``counts`` is None the consumer supplies them (the trainer uses the
    training split's own class counts).
    """

    beta: float
    counts: ClassCounts | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= float(self.beta) < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")
        object.__setattr__(self, "beta", float(self.beta))
        if self.counts is not None:
            object.__setattr__(self, "counts", as_counts(self.counts))


@dataclass(frozen=True)
class LossSpec:
    """Loss family, focal exponent, and optional class-balance term."""

    family: str
    gamma: float = 0.0
    class_balance: ClassBalance | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        gamma = float(self.gamma)
        if gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {gamma}")
        # gamma only means something for the focal family.
        object.__setattr__(self, "gamma", gamma if self.family == "focal" else 0.0)


@dataclass(frozen=True)
class LossOutput:
    """Scalar loss value and its gradient with respect to the logits."""

    value: float
    grad: np.ndarray


def _as_logits(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size < 1:
        raise ValueError("logits must be a non-empty 1-D vector")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    return z


def _check_label(y: int, num_classes: int) -> int:
    y = int(y)
    if not 0 <= y < num_classes:
        raise IndexError(f"label {y} out of range for {num_classes} classes")
    return y


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def softmax_probs(z) -> np.ndarray:
    """Probabilities ``exp(z_i) / sum_j exp(z_j)``, shift-stabilized."""
    z = _as_logits(z)
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def transform_zt(z, y: int) -> np.ndarray:
    """Sign-flip all logits except the target's: ``z^t_i = z_i if i == y else -z_i``."""
    z = _as_logits(z)
    y = _check_label(y, z.size)
    zt = -z
    zt[y] = z[y]
    return zt


def softmax_ce(z, y: int) -> LossOutput:
    """Softmax cross-entropy ``-log(exp(z_y) / sum_j exp(z_j))`` and its gradient."""
    z = _as_logits(z)
    y = _check_label(y, z.size)
    values, grads = softmax_ce_batch(z[None, :], np.array([y]))
    return LossOutput(float(values[0]), grads[0])


def sigmoid_ce(z, y: int) -> LossOutput:
    """One-vs-all sigmoid cross-entropy ``-sum_i log(sigmoid(z^t_i))``."""
    z = _as_logits(z)
    y = _check_label(y, z.size)
    values, grads = sigmoid_ce_batch(z[None, :], np.array([y]))
    return LossOutput(float(values[0]), grads[0])


def focal(z, y: int, gamma: float) -> LossOutput:
    """Focal loss ``-sum_i (1 - p^t_i)**gamma * log(p^t_i)`` with ``p^t = sigmoid(z^t)``."""
    z = _as_logits(z)
    y = _check_label(y, z.size)
    if not float(gamma) >= 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    values, grads = focal_batch(z[None, :], np.array([y]), float(gamma))
    return LossOutput(float(values[0]), grads[0])


def class_balanced(loss: LossOutput, y: int, beta: float, counts) -> LossOutput:
    """Scale a loss output by the normalized class weight of the true class."""
    counts = as_counts(counts)
    y = _check_label(y, counts.num_classes)
    if counts[y] == 0:
        raise ValueError(f"class {y} has zero count; its weight is undefined")
    w = class_balanced_weights(counts, beta)[y]
    return LossOutput(loss.value * w, loss.grad * w)


def cb_focal_alpha_equivalence_check(z, y: int, gamma: float, beta: float, counts) -> bool:
    """Check that class-balancing the focal loss equals alpha-scaled focal.

    The alpha-balanced variant multiplies the focal loss by a per-class
    scalar alpha_t; with alpha_t set to the normalized class weight the two
    must agree to relative 1e-12 in value and gradient.
    """
    counts = as_counts(counts)
    base = focal(z, y, gamma)
    balanced = class_balanced(base, y, beta, counts)
    alpha_t = class_balanced_weights(counts, beta)[y]
    value_ok = abs(balanced.value - alpha_t * base.value) <= 1e-12 * max(
        abs(balanced.value), 1e-300
    )
    scale = np.maximum(np.abs(balanced.grad), 1e-300)
    grad_ok = bool(np.all(np.abs(balanced.grad - alpha_t * base.grad) <= 1e-12 * scale))
    return value_ok and grad_ok


# ---------------------------------------------------------------------------
# Batched cores (rows = samples); the single-sample API wraps these.
# ---------------------------------------------------------------------------


def _transform_zt_batch(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rows = np.arange(logits.shape[0])
    signs = np.full_like(logits, -1.0)
    signs[rows, labels] = 1.0
    return logits * signs, signs


def softmax_ce_batch(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rows = np.arange(logits.shape[0])
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    values = lse - shifted[rows, labels]
    grads = np.exp(shifted - lse[:, None])
    grads[rows, labels] -= 1.0
    return values, grads


def sigmoid_ce_batch(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    zt, signs = _transform_zt_batch(logits, labels)
    values = -_log_sigmoid(zt).sum(axis=1)
    grads = signs * -_sigmoid(-zt)
    return values, grads


def focal_batch(
    logits: np.ndarray, labels: np.ndarray, gamma: float
) -> tuple[np.ndarray, np.ndarray]:
    zt, signs = _transform_zt_batch(logits, labels)
    p = _sigmoid(zt)
    one_minus_p = _sigmoid(-zt)
    log_p = _log_sigmoid(zt)
    mod = one_minus_p**gamma
    values = -(mod * log_p).sum(axis=1)
    grads = signs * (gamma * p * mod * log_p - mod * one_minus_p)
    return values, grads


def loss_batch(
    spec: LossSpec, logits: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample values and logit gradients for the requested loss family.

    Class-balance weighting is not applied here; callers that weight
    samples multiply values and gradient rows by the per-sample weight.
    """
    if spec.family == "softmax_ce":
        return softmax_ce_batch(logits, labels)
    if spec.family == "sigmoid_ce":
        return sigmoid_ce_batch(logits, labels)
    return focal_batch(logits, labels, spec.gamma)
