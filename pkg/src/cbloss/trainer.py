"""Mini-batch SGD-with-momentum training of small classifiers.

Models are a linear map or a one-hidden-layer ReLU network ending in C
logits.  The training conventions follow the sigmoid-loss recipe: for
sigmoid and focal losses the last-layer bias starts at ``-log((1-pi)/pi)``
with class prior ``pi = 1/C`` (avoiding the huge first-step loss of a zero
bias), and L2 weight decay is applied to every parameter except that bias.
The learning rate ramps linearly over the warmup epochs, then is multiplied
by ``decay_factor`` at each listed decay epoch.

Class-balance weights are computed once per run from the training split's
class counts and applied per sample; batches are reduced by mean.  A run is
fully determined by (seed, config, data): shuffling, init and updates all
draw from seed-derived streams.  A non-finite loss aborts the run and is
recorded on the RunRecord rather than raised.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.random import SeedSequence, default_rng

from cbloss.effnum import class_balanced_weights
from cbloss.longtail import Dataset
from cbloss.losses import LossSpec, loss_batch

__all__ = [
    "ARCHITECTURES",
    "TrainConfig",
    "ModelParams",
    "EvalResult",
    "RunRecord",
    "default_decay_epochs",
    "init_model",
    "last_layer_bias_init",
    "lr_at",
    "forward",
    "evaluate",
    "train",
    "write_metrics_csv",
]

ARCHITECTURES = ("linear", "mlp")


def default_decay_epochs(epochs: int) -> tuple[int, ...]:
    """Scale the 160/180-of-200 decay points proportionally to a run length."""
    lo = max(1, round(0.8 * epochs))
    hi = max(1, round(0.9 * epochs))
    return (lo,) if hi <= lo else (lo, hi)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    warmup_epochs: int = 5
    # None scales the 160/180-of-200 decay points to the epoch count.
    decay_epochs: tuple[int, ...] | None = None
    decay_factor: float = 0.01
    loss: LossSpec = field(default_factory=lambda: LossSpec("softmax_ce"))
    seed: int = 0
    focal_lr_multiplier: float = 1.0
    arch: str = "linear"
    hidden_size: int = 32

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be >= 0")
        raw_decay = (
            default_decay_epochs(self.epochs) if self.decay_epochs is None else self.decay_epochs
        )
        decay = tuple(int(e) for e in raw_decay)
        if any(b <= a for a, b in zip(decay, decay[1:])):
            raise ValueError("decay_epochs must be strictly increasing")
        if any(e < 1 or e > self.epochs for e in decay):
            raise ValueError("decay_epochs must lie in [1, epochs]")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ValueError("decay_factor must be in (0, 1]")
        if not self.focal_lr_multiplier > 0:
            raise ValueError("focal_lr_multiplier must be > 0")
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"arch must be one of {ARCHITECTURES}")
        if self.arch == "mlp" and self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        object.__setattr__(self, "decay_epochs", decay)

    def to_dict(self) -> dict:
        loss = self.loss
        cb = loss.class_balance
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "warmup_epochs": self.warmup_epochs,
            "decay_epochs": list(self.decay_epochs),
            "decay_factor": self.decay_factor,
            "loss": {
                "family": loss.family,
                "gamma": loss.gamma,
                "class_balance": None
                if cb is None
                else {
                    "beta": cb.beta,
                    "counts": None if cb.counts is None else cb.counts.counts.tolist(),
                },
            },
            "seed": self.seed,
            "focal_lr_multiplier": self.focal_lr_multiplier,
            "arch": self.arch,
            "hidden_size": self.hidden_size,
        }


@dataclass
class ModelParams:
    """Layer weights and biases; last entries are the classification layer."""

    arch: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def num_classes(self) -> int:
        return int(self.biases[-1].size)


def last_layer_bias_init(loss_family: str, n_classes: int) -> float:
    """Initial last-layer bias: ``-log((1-pi)/pi)`` with prior pi = 1/C.

    Sigmoid-based losses need this so every class starts near its prior
    probability instead of 0.5; softmax keeps the conventional zero bias.
    """
    if loss_family == "softmax_ce":
        return 0.0
    if n_classes == 1:
        return 0.0
    pi = 1.0 / n_classes
    return -math.log((1.0 - pi) / pi)


def init_model(
    arch: str,
    n_classes: int,
    dim: int,
    loss_family: str = "softmax_ce",
    seed: int = 0,
    hidden_size: int = 32,
) -> ModelParams:
    """Seed-keyed init: weights ~ Normal(0, 1/sqrt(fan_in)), biases per family."""
    if arch not in ARCHITECTURES:
        raise ValueError(f"arch must be one of {ARCHITECTURES}")
    rng = default_rng(SeedSequence(entropy=[int(seed), 0]))
    bias = last_layer_bias_init(loss_family, n_classes)
    if arch == "linear":
        w = rng.standard_normal((dim, n_classes)) / math.sqrt(dim)
        return ModelParams(arch, [w], [np.full(n_classes, bias)])
    w0 = rng.standard_normal((dim, hidden_size)) / math.sqrt(dim)
    w1 = rng.standard_normal((hidden_size, n_classes)) / math.sqrt(hidden_size)
    return ModelParams(arch, [w0, w1], [np.zeros(hidden_size), np.full(n_classes, bias)])


def lr_at(step: int, config: TrainConfig, steps_per_epoch: int) -> float:
    """Learning rate at a 0-indexed optimizer step.

    Linear ramp across the warmup epochs reaching the base rate on the last
    warmup step, then piecewise constant with a ``decay_factor`` multiply at
    each decay epoch; focal runs scale the whole schedule by
    ``focal_lr_multiplier``.
    """
    base = config.lr
    if config.loss.family == "focal":
        base *= config.focal_lr_multiplier
    warmup_steps = config.warmup_epochs * steps_per_epoch
    if step < warmup_steps:
        return base * (step + 1) / warmup_steps
    epoch = step // steps_per_epoch
    for boundary in config.decay_epochs:
        if epoch >= boundary:
            base *= config.decay_factor
    return base


def forward(model: ModelParams, features: np.ndarray):
    """Logits plus the activation cache needed for the backward pass."""
    if model.arch == "linear":
        return features @ model.weights[0] + model.biases[0], (features,)
    pre = features @ model.weights[0] + model.biases[0]
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ model.weights[1] + model.biases[1]
    return logits, (features, pre, hidden)


def _backward(model: ModelParams, cache, d_logits: np.ndarray):
    """Parameter gradients given d(loss)/d(logits), ordered like params."""
    if model.arch == "linear":
        (features,) = cache
        return [features.T @ d_logits], [d_logits.sum(axis=0)]
    features, pre, hidden = cache
    d_hidden = (d_logits @ model.weights[1].T) * (pre > 0)
    grads_w = [features.T @ d_hidden, hidden.T @ d_logits]
    grads_b = [d_hidden.sum(axis=0), d_logits.sum(axis=0)]
    return grads_w, grads_b


@dataclass(frozen=True)
class EvalResult:
    overall_error: float
    per_class_error: np.ndarray
    confusion: np.ndarray


def evaluate(model: ModelParams, test: Dataset) -> EvalResult:
    """Argmax-over-logits error rates and the confusion matrix (rows = truth)."""
    logits, _ = forward(model, test.features)
    if logits.shape[1] != test.num_classes:
        raise ValueError("model output width does not match dataset classes")
    pred = logits.argmax(axis=1)
    c = test.num_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (test.labels, pred), 1)
    totals = confusion.sum(axis=1)
    with np.errstate(invalid="ignore"):
        per_class = 1.0 - np.where(totals > 0, np.diag(confusion) / np.maximum(totals, 1), np.nan)
    overall = float((pred != test.labels).mean())
    return EvalResult(overall, per_class, confusion)


@dataclass
class RunRecord:
    """One training run: config snapshot, per-epoch metrics, final state."""

    config: dict
    train_loss: list
    test_error: list
    per_class_error: list
    confusion: list
    wall_seconds: float
    status: str = "ok"
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "train_loss": self.train_loss,
            "test_error": self.test_error,
            "per_class_error": self.per_class_error,
            "confusion": self.confusion,
            "wall_seconds": self.wall_seconds,
            "status": self.status,
            "note": self.note,
        }

    def comparable_dict(self) -> dict:
        """Everything except wall-clock; equal dicts mean identical runs."""
        d = self.to_dict()
        d.pop("wall_seconds")
        return d

    def outcome_dict(self) -> dict:
        """Metrics only (no config, no wall-clock), for is-a-no-op checks."""
        d = self.comparable_dict()
        d.pop("config")
        return d

    def final_test_error(self) -> float:
        return self.test_error[-1] if self.test_error else float("nan")

    def final_per_class_error(self) -> list:
        return self.per_class_error[-1] if self.per_class_error else []

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "RunRecord":
        return cls(**json.loads(Path(path).read_text()))


def write_metrics_csv(record: RunRecord, path) -> None:
    """Per-epoch metrics: epoch, train_loss, test_error, per_class_errors."""
    lines = ["epoch,train_loss,test_error,per_class_errors"]
    for e, (loss, err, per_class) in enumerate(
        zip(record.train_loss, record.test_error, record.per_class_error)
    ):
        joined = ";".join(f"{v:.6f}" for v in per_class)
        lines.append(f"{e},{loss:.10g},{err:.6f},{joined}")
    Path(path).write_text("\n".join(lines) + "\n")


def train(
    data: Dataset, test: Dataset, config: TrainConfig, return_model: bool = False
):
    """Train a model under the config's loss; returns the RunRecord.

    With ``return_model=True`` returns ``(record, model)`` so callers can
    evaluate the fitted model on extra splits.
    """
    if data.dim != test.dim:
        raise ValueError(f"train dim {data.dim} != test dim {test.dim}")
    if data.num_classes != test.num_classes:
        raise ValueError(
            f"train classes {data.num_classes} != test classes {test.num_classes}"
        )
    start = time.perf_counter()
    n_classes, dim = data.num_classes, data.dim
    model = init_model(
        config.arch, n_classes, dim, config.loss.family, config.seed, config.hidden_size
    )

    cb = config.loss.class_balance
    if cb is None:
        class_weights = None
    else:
        counts = cb.counts if cb.counts is not None else data.class_counts
        class_weights = class_balanced_weights(counts, cb.beta).alphas

    n = data.num_samples
    steps_per_epoch = max(1, math.ceil(n / config.batch_size))
    shuffle_rng = default_rng(SeedSequence(entropy=[config.seed, 1]))
    velocity_w = [np.zeros_like(w) for w in model.weights]
    velocity_b = [np.zeros_like(b) for b in model.biases]
    last_bias = len(model.biases) - 1

    record = RunRecord(
        config=config.to_dict(),
        train_loss=[],
        test_error=[],
        per_class_error=[],
        confusion=[],
        wall_seconds=0.0,
        status="ok",
        note="",
    )

    step = 0
    for epoch in range(config.epochs):
        perm = shuffle_rng.permutation(n)
        epoch_loss_sum = 0.0
        aborted = False
        # A diverging run overflows before the finiteness check aborts it;
        # those transient overflow/invalid warnings carry no information.
        with np.errstate(over="ignore", invalid="ignore"):
            for lo in range(0, n, config.batch_size):
                batch = perm[lo : lo + config.batch_size]
                x, y = data.features[batch], data.labels[batch]
                logits, cache = forward(model, x)
                values, d_logits = loss_batch(config.loss, logits, y)
                if class_weights is not None:
                    w = class_weights[y]
                    values = values * w
                    d_logits = d_logits * w[:, None]
                batch_loss = float(values.mean())
                if not math.isfinite(batch_loss):
                    record.status = "failed"
                    record.note = f"non-finite loss at epoch {epoch}, step {step}"
                    aborted = True
                    break
                epoch_loss_sum += float(values.sum())
                d_logits = d_logits / batch.size
                grads_w, grads_b = _backward(model, cache, d_logits)
                lr = lr_at(step, config, steps_per_epoch)
                for i, g in enumerate(grads_w):
                    if config.weight_decay:
                        g = g + config.weight_decay * model.weights[i]
                    velocity_w[i] = config.momentum * velocity_w[i] + g
                    model.weights[i] -= lr * velocity_w[i]
                for i, g in enumerate(grads_b):
                    # Weight decay exempts the classification layer's bias.
                    if config.weight_decay and i != last_bias:
                        g = g + config.weight_decay * model.biases[i]
                    velocity_b[i] = config.momentum * velocity_b[i] + g
                    model.biases[i] -= lr * velocity_b[i]
                step += 1
        if aborted:
            break
        result = evaluate(model, test)
        record.train_loss.append(epoch_loss_sum / n)
        record.test_error.append(result.overall_error)
        record.per_class_error.append([float(v) for v in result.per_class_error])
        record.confusion = result.confusion.tolist()

    record.wall_seconds = time.perf_counter() - start
    if return_model:
        return record, model
    return record
