"""Hyperparameter sweeps over loss family, beta, gamma, imbalance and seed.

A sweep generates one synthetic long-tailed dataset per imbalance factor
(shared class geometry across imbalances), trains every grid configuration
on a seed-keyed 80/20 train/validation split, and reports balanced-test
metrics.  Results land in ``results.csv`` with one row per run in canonical
grid order; rerunning an identical sweep reproduces the file byte for byte
apart from the wall-clock column.  Best-configuration selection for
``summary.csv`` uses the held-out validation error, standing in for the
cross-validation used to pick hyperparameters at full scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from numpy.random import SeedSequence, default_rng

from cbloss.effnum import ClassCounts
from cbloss.longtail import (
    Dataset,
    SyntheticDataSpec,
    build_profile,
    generate_synthetic,
    mu_from_imbalance,
    write_profile_csv,
)
from cbloss.losses import FAMILIES, ClassBalance, LossSpec
from cbloss.trainer import TrainConfig, evaluate, train

__all__ = [
    "RESULTS_COLUMNS",
    "SweepGrid",
    "SweepDataSpec",
    "SweepRun",
    "default_tail_k",
    "tail_error",
    "split_train_val",
    "run_sweep",
    "format_results_csv",
]

RESULTS_COLUMNS = [
    "dataset_id",
    "imbalance",
    "family",
    "beta",
    "gamma",
    "seed",
    "status",
    "overall_error",
    "tail_error",
    "per_class_errors",
    "wall_seconds",
]

SUMMARY_COLUMNS = [
    "dataset_id",
    "imbalance",
    "scope",
    "family",
    "beta",
    "gamma",
    "n_seeds",
    "mean_val_error",
    "mean_test_error",
    "std_test_error",
    "mean_tail_error",
]


@dataclass(frozen=True)
class SweepGrid:
    """Axes of the sweep; beta "none" means no class-balance term.

    Gammas apply to the focal family only; softmax and sigmoid configs
    carry a single gamma-less entry each.
    """

    families: tuple = FAMILIES
    betas: tuple = ("none", 0.9, 0.99, 0.999, 0.9999)
    gammas: tuple = (0.5, 1.0, 2.0)
    imbalances: tuple = (10.0, 100.0)
    seeds: tuple = (0,)

    def __post_init__(self) -> None:
        for name in ("families", "betas", "gammas", "imbalances", "seeds"):
            value = tuple(getattr(self, name))
            if not value:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, value)
        for family in self.families:
            if family not in FAMILIES:
                raise ValueError(f"unknown loss family {family!r}")
        for beta in self.betas:
            if beta == "none":
                continue
            if not 0.0 <= float(beta) < 1.0:
                raise ValueError(f"beta must be 'none' or in [0, 1), got {beta!r}")
        if any(float(g) < 0 for g in self.gammas):
            raise ValueError("gammas must be >= 0")
        if any(float(f) < 1 for f in self.imbalances):
            raise ValueError("imbalances must be >= 1")

    def combos(self) -> list[tuple[str, object, float | None]]:
        """(family, beta, gamma) in canonical order; gamma None when unused."""
        out = []
        for family in self.families:
            for beta in self.betas:
                if family == "focal":
                    out.extend((family, beta, float(g)) for g in self.gammas)
                else:
                    out.append((family, beta, None))
        return out

    def num_runs(self) -> int:
        return len(self.combos()) * len(self.imbalances) * len(self.seeds)


@dataclass(frozen=True)
class SweepDataSpec:
    """Shape of the synthetic datasets a sweep trains on."""

    n_classes: int = 10
    dim: int = 20
    base_count: int = 1000
    test_per_class: int = 200
    class_mean_scale: float = 2.5
    noise_std: float = 1.0
    data_seed: int = 0


@dataclass
class SweepRun:
    """One completed (or failed) grid point, plus its validation error."""

    dataset_id: str
    imbalance: float
    family: str
    beta: object
    gamma: float | None
    seed: int
    status: str
    overall_error: float
    tail_error: float
    per_class_errors: list
    wall_seconds: float
    val_error: float


def default_tail_k(n_classes: int) -> int:
    """Tail size used for the tail-error column: the smallest third."""
    return max(1, math.ceil(n_classes / 3))


def tail_error(per_class_errors, train_counts: ClassCounts, k: int | None = None) -> float:
    """Mean test error over the k classes with the fewest training samples."""
    errors = np.asarray(per_class_errors, dtype=np.float64)
    counts = train_counts.counts
    if errors.size != counts.size:
        raise ValueError("per-class errors and counts disagree in length")
    if k is None:
        k = default_tail_k(counts.size)
    tail = np.argsort(counts, kind="stable")[:k]
    return float(errors[tail].mean())


def split_train_val(data: Dataset, seed: int, val_fraction: float = 0.2):
    """Seed-keyed stratified split; every class keeps at least one fit sample."""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError("val_fraction must be in (0, 1)")
    rng = default_rng(SeedSequence(entropy=[int(seed), 17]))
    fit_idx: list[np.ndarray] = []
    val_idx: list[np.ndarray] = []
    for i in range(data.num_classes):
        idx = np.flatnonzero(data.labels == i)
        if idx.size == 0:
            continue
        take = min(idx.size - 1, int(round(val_fraction * idx.size)))
        perm = rng.permutation(idx)
        val_idx.append(np.sort(perm[:take]))
        fit_idx.append(np.sort(perm[take:]))
    fit = np.concatenate(fit_idx)
    val = np.concatenate(val_idx) if any(v.size for v in val_idx) else np.array([], dtype=np.int64)
    c = data.num_classes
    fit_ds = Dataset.from_arrays(data.features[fit], data.labels[fit], num_classes=c)
    val_ds = Dataset.from_arrays(data.features[val], data.labels[val], num_classes=c)
    return fit_ds, val_ds


def _dataset_id(spec: SweepDataSpec, imbalance: float) -> str:
    return f"synth-c{spec.n_classes}-if{imbalance:g}"


def _make_datasets(spec: SweepDataSpec, imbalance: float):
    mu = 1.0 if imbalance == 1 else mu_from_imbalance(spec.n_classes, imbalance)
    profile = build_profile(spec.n_classes, spec.base_count, mu)
    synth = SyntheticDataSpec(
        dim=spec.dim,
        class_mean_scale=spec.class_mean_scale,
        noise_std=spec.noise_std,
        rng_seed=spec.data_seed,
    )
    train_data = generate_synthetic(profile, synth, split="train")
    test_profile = build_profile(spec.n_classes, spec.test_per_class, 1.0)
    test_data = generate_synthetic(test_profile, synth, split="test")
    return profile, train_data, test_data


def run_sweep(
    grid: SweepGrid,
    data_spec: SweepDataSpec,
    base_config: TrainConfig,
    out_dir,
    val_fraction: float = 0.2,
) -> list[SweepRun]:
    """Run the full grid and write results.csv, summary.csv and profiles."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    profiles_dir = out_dir / "profiles"
    profiles_dir.mkdir(exist_ok=True)

    runs: list[SweepRun] = []
    for imbalance in grid.imbalances:
        imbalance = float(imbalance)
        profile, train_full, test_data = _make_datasets(data_spec, imbalance)
        dataset_id = _dataset_id(data_spec, imbalance)
        write_profile_csv(profile.counts, profiles_dir / f"{dataset_id}.csv")
        for family, beta, gamma in grid.combos():
            if beta == "none":
                balance = None
            else:
                balance = ClassBalance(float(beta))
            loss = LossSpec(family, gamma=0.0 if gamma is None else gamma, class_balance=balance)
            for seed in grid.seeds:
                fit, val = split_train_val(train_full, int(seed), val_fraction)
                config = replace(base_config, loss=loss, seed=int(seed))
                record, model = train(fit, test_data, config, return_model=True)
                if record.status == "ok":
                    per_class = record.final_per_class_error()
                    run = SweepRun(
                        dataset_id=dataset_id,
                        imbalance=imbalance,
                        family=family,
                        beta=beta,
                        gamma=gamma,
                        seed=int(seed),
                        status="ok",
                        overall_error=record.final_test_error(),
                        tail_error=tail_error(per_class, fit.class_counts),
                        per_class_errors=per_class,
                        wall_seconds=record.wall_seconds,
                        val_error=evaluate(model, val).overall_error,
                    )
                else:
                    run = SweepRun(
                        dataset_id=dataset_id,
                        imbalance=imbalance,
                        family=family,
                        beta=beta,
                        gamma=gamma,
                        seed=int(seed),
                        status="failed",
                        overall_error=float("nan"),
                        tail_error=float("nan"),
                        per_class_errors=[],
                        wall_seconds=record.wall_seconds,
                        val_error=float("nan"),
                    )
                runs.append(run)

    (out_dir / "results.csv").write_text(format_results_csv(runs))
    (out_dir / "summary.csv").write_text(_format_summary_csv(runs))
    return runs


def _fmt_beta(beta) -> str:
    return "none" if beta == "none" else f"{float(beta):g}"


def _fmt_gamma(gamma) -> str:
    return "-" if gamma is None else f"{float(gamma):g}"


def format_results_csv(runs: list[SweepRun]) -> str:
    lines = [",".join(RESULTS_COLUMNS)]
    for r in runs:
        per_class = ";".join(f"{v:.6f}" for v in r.per_class_errors)
        lines.append(
            ",".join(
                [
                    r.dataset_id,
                    f"{r.imbalance:g}",
                    r.family,
                    _fmt_beta(r.beta),
                    _fmt_gamma(r.gamma),
                    str(r.seed),
                    r.status,
                    f"{r.overall_error:.6f}",
                    f"{r.tail_error:.6f}",
                    per_class,
                    f"{r.wall_seconds:.3f}",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _aggregate(group: list[SweepRun]) -> dict | None:
    ok = [r for r in group if r.status == "ok"]
    if not ok:
        return None
    return {
        "n_seeds": len(ok),
        "mean_val_error": float(np.mean([r.val_error for r in ok])),
        "mean_test_error": float(np.mean([r.overall_error for r in ok])),
        "std_test_error": float(np.std([r.overall_error for r in ok])),
        "mean_tail_error": float(np.mean([r.tail_error for r in ok])),
    }


def _format_summary_csv(runs: list[SweepRun]) -> str:
    lines = [",".join(SUMMARY_COLUMNS)]
    datasets: dict[str, list[SweepRun]] = {}
    for r in runs:
        datasets.setdefault(r.dataset_id, []).append(r)

    def emit(dataset_id, imbalance, scope, key, agg):
        family, beta, gamma = key
        lines.append(
            ",".join(
                [
                    dataset_id,
                    f"{imbalance:g}",
                    scope,
                    family,
                    _fmt_beta(beta),
                    _fmt_gamma(gamma),
                    str(agg["n_seeds"]),
                    f"{agg['mean_val_error']:.6f}",
                    f"{agg['mean_test_error']:.6f}",
                    f"{agg['std_test_error']:.6f}",
                    f"{agg['mean_tail_error']:.6f}",
                ]
            )
        )

    for dataset_id, rows in datasets.items():
        imbalance = rows[0].imbalance
        configs: dict[tuple, list[SweepRun]] = {}
        for r in rows:
            configs.setdefault((r.family, r.beta, r.gamma), []).append(r)
        aggregated = []
        for key, group in configs.items():
            agg = _aggregate(group)
            if agg is not None:
                aggregated.append((key, agg))
        best_overall = None
        families_seen: dict[str, tuple] = {}
        for key, agg in aggregated:
            family = key[0]
            if family not in families_seen or agg["mean_val_error"] < families_seen[family][1]["mean_val_error"]:
                families_seen[family] = (key, agg)
            if best_overall is None or agg["mean_val_error"] < best_overall[1]["mean_val_error"]:
                best_overall = (key, agg)
        for family, (key, agg) in families_seen.items():
            emit(dataset_id, imbalance, f"best[{family}]", key, agg)
        if best_overall is not None:
            emit(dataset_id, imbalance, "best[overall]", best_overall[0], best_overall[1])
    return "\n".join(lines) + "\n"
