"""Command-line interface.

Subcommands:

* ``effnum`` — effective numbers and raw weights for one n or a range.
* ``simulate-covering`` — Monte Carlo check of the covering process.
* ``gen-data`` — write a synthetic long-tailed train/test pair plus profile.
* ``train`` — one training run from CSV datasets; emits run.json/metrics.csv.
* ``sweep`` — grid over families/betas/gammas/imbalances/seeds; results.csv.
* ``report`` — delta, best-config and effective-number tables from results.csv.

Config files are flat JSON objects; every key must belong to the
subcommand's documented key set, and explicit command-line flags override
file values.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from cbloss.covering import CoveringConfig, expected_volume, simulate_covering
from cbloss.effnum import beta_from_prototypes, effective_number
from cbloss.longtail import (
    SyntheticDataSpec,
    build_profile,
    generate_synthetic,
    imbalance_factor,
    ingest_csv,
    mu_from_imbalance,
    write_dataset_csv,
    write_profile_csv,
)
from cbloss.losses import ClassBalance, LossSpec
from cbloss.report import SchemaError, write_report
from cbloss.sweep import SweepDataSpec, SweepGrid, run_sweep
from cbloss.trainer import TrainConfig, train, write_metrics_csv

TRAINER_KEYS = (
    "epochs",
    "batch_size",
    "lr",
    "momentum",
    "weight_decay",
    "warmup_epochs",
    "decay_epochs",
    "decay_factor",
    "focal_lr_multiplier",
    "arch",
    "hidden_size",
)
LOSS_KEYS = ("family", "beta", "gamma")
GRID_KEYS = ("families", "betas", "gammas", "imbalances", "seeds")


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _parse_n_spec(text: str) -> list[int]:
    """'100' -> [100]; '1:100' -> 1..100; '1:100:5' -> stepped range."""
    parts = text.split(":")
    if len(parts) == 1:
        return [_parse_positive(parts[0], "n")]
    if len(parts) in (2, 3):
        lo = _parse_positive(parts[0], "n range start")
        hi = _parse_positive(parts[1], "n range end")
        step = _parse_positive(parts[2], "n range step") if len(parts) == 3 else 1
        if hi < lo:
            raise UsageError(f"empty n range {text!r}")
        return list(range(lo, hi + 1, step))
    raise UsageError(f"cannot parse n specification {text!r}")


def _parse_positive(text: str, what: str) -> int:
    try:
        value = int(text)
    except ValueError as exc:
        raise UsageError(f"{what} must be an integer, got {text!r}") from exc
    if value < 1:
        raise UsageError(f"{what} must be >= 1, got {value}")
    return value


def _load_config(path, allowed: tuple[str, ...]) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"{path}: config must be a flat JSON object")
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise UsageError(f"{path}: unknown config keys: {', '.join(unknown)}")
    return raw


def _emit(text: str, out_path) -> None:
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _parse_beta_arg(text: str) -> object:
    if text == "none":
        return "none"
    try:
        value = float(text)
    except ValueError as exc:
        raise UsageError(f"beta must be a number or 'none', got {text!r}") from exc
    if not 0.0 <= value < 1.0:
        raise UsageError(f"beta must be in [0, 1), got {value}")
    return value


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_effnum(args) -> int:
    if args.beta is not None:
        beta = args.beta
    else:
        beta = beta_from_prototypes(args.n_proto)
    lines = ["n,effective_number,weight"]
    for n in _parse_n_spec(args.n):
        e = effective_number(beta, n)
        lines.append(f"{n},{e:.10g},{1.0 / e:.10g}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_simulate_covering(args) -> int:
    config = CoveringConfig(
        n_prototypes=args.n_proto,
        n_samples=args.n,
        n_trials=args.trials,
        rng_seed=args.seed,
    )
    result = simulate_covering(config)
    expected = expected_volume(config.n_prototypes, config.n_samples)
    lines = [
        "n_prototypes,n_samples,trials,mean_volume,std_error,expected_volume",
        f"{config.n_prototypes:g},{config.n_samples},{config.n_trials},"
        f"{result.mean_volume:.10g},{result.std_error:.10g},{expected:.10g}",
    ]
    _emit("\n".join(lines) + "\n", args.out)
    if args.check:
        return 0 if abs(result.mean_volume - expected) <= 4 * result.std_error else 1
    return 0


def cmd_gen_data(args) -> int:
    if args.mu is not None and args.imbalance is not None:
        raise UsageError("give either --imbalance or --mu, not both")
    if args.mu is not None:
        mu = args.mu
    elif args.imbalance is None or args.imbalance == 1:
        mu = 1.0
    else:
        mu = mu_from_imbalance(args.classes, args.imbalance)
    profile = build_profile(args.classes, args.base_count, mu)
    spec = SyntheticDataSpec(
        dim=args.dim,
        class_mean_scale=args.class_mean_scale,
        noise_std=args.noise_std,
        rng_seed=args.seed,
    )
    train_data = generate_synthetic(profile, spec, split="train")
    test_data = generate_synthetic(
        build_profile(args.classes, args.test_per_class, 1.0), spec, split="test"
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(train_data, out / "train.csv")
    write_dataset_csv(test_data, out / "test.csv")
    write_profile_csv(profile.counts, out / "profile.csv")
    realized = imbalance_factor(profile.counts)
    print(
        f"wrote {out}/train.csv ({train_data.num_samples} rows), "
        f"{out}/test.csv ({test_data.num_samples} rows), "
        f"{out}/profile.csv (imbalance {realized:g})"
    )
    return 0


def _build_train_config(args) -> TrainConfig:
    settings: dict = {}
    if args.config:
        settings.update(_load_config(args.config, TRAINER_KEYS + LOSS_KEYS + ("seed",)))
    for key in TRAINER_KEYS + ("seed",):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    for key in LOSS_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value

    family = settings.pop("family", "softmax_ce")
    gamma = float(settings.pop("gamma", 0.0))
    beta = settings.pop("beta", "none")
    if isinstance(beta, str) and beta != "none":
        beta = _parse_beta_arg(beta)
    balance = None if beta == "none" else ClassBalance(float(beta))
    try:
        loss = LossSpec(family, gamma=gamma, class_balance=balance)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if "decay_epochs" in settings and settings["decay_epochs"] is not None:
        settings["decay_epochs"] = tuple(settings["decay_epochs"])
    try:
        return TrainConfig(loss=loss, **settings)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_train(args) -> int:
    config = _build_train_config(args)
    data = ingest_csv(args.train_csv)
    test = ingest_csv(args.test_csv)
    if data.num_classes != test.num_classes:
        width = max(data.num_classes, test.num_classes)
        data = ingest_csv(args.train_csv, num_classes=width)
        test = ingest_csv(args.test_csv, num_classes=width)
    record = train(data, test, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record.to_json(out / "run.json")
    write_metrics_csv(record, out / "metrics.csv")
    if record.status == "ok":
        print(
            f"status=ok final_test_error={record.final_test_error():.6f} "
            f"wall={record.wall_seconds:.2f}s -> {out}/run.json"
        )
        return 0
    print(f"status=failed note={record.note!r} -> {out}/run.json")
    return 1


def cmd_sweep(args) -> int:
    settings: dict = {}
    if args.config:
        settings.update(_load_config(args.config, GRID_KEYS + TRAINER_KEYS))
    grid_kwargs = {}
    for key in GRID_KEYS:
        if key in settings:
            grid_kwargs[key] = tuple(settings.pop(key))
    betas = grid_kwargs.get("betas")
    if betas is not None:
        grid_kwargs["betas"] = tuple(
            b if b == "none" else float(b) for b in betas
        )
    try:
        grid = SweepGrid(**grid_kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if "decay_epochs" in settings and settings["decay_epochs"] is not None:
        settings["decay_epochs"] = tuple(settings["decay_epochs"])
    try:
        base_config = TrainConfig(**settings)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    data_spec = SweepDataSpec(
        n_classes=args.classes,
        dim=args.dim,
        base_count=args.base_count,
        test_per_class=args.test_per_class,
        class_mean_scale=args.class_mean_scale,
        noise_std=args.noise_std,
        data_seed=args.data_seed,
    )
    runs = run_sweep(grid, data_spec, base_config, args.out)
    failed = sum(1 for r in runs if r.status != "ok")
    print(
        f"{len(runs)} runs ({failed} failed) -> {args.out}/results.csv, "
        f"{args.out}/summary.csv"
    )
    return 1 if failed else 0


def cmd_report(args) -> int:
    profiles = {}
    profiles_dir = args.profiles_dir
    if profiles_dir is None:
        candidate = Path(args.results).parent / "profiles"
        profiles_dir = candidate if candidate.is_dir() else None
    if profiles_dir is not None:
        for path in sorted(Path(profiles_dir).glob("*.csv")):
            profiles[path.stem] = path
    paths = write_report(args.results, args.out, profiles or None)
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return 0


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbloss",
        description="Effective-sample-size class balancing: utilities, trainer, sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("effnum", help="effective numbers and weights for n or a range")
    which = p.add_mutually_exclusive_group(required=True)
    which.add_argument("--beta", type=float, help="overlap parameter in [0, 1)")
    which.add_argument("--n-proto", type=float, help="prototype volume N >= 1")
    p.add_argument("--n", required=True, help="sample count or range lo:hi[:step]")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_effnum)

    p = sub.add_parser("simulate-covering", help="Monte Carlo covering simulation")
    p.add_argument("--n-proto", type=float, required=True, help="prototype volume N >= 1")
    p.add_argument("--n", type=_positive_int, required=True, help="samples per trial")
    p.add_argument("--trials", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--check", action="store_true",
                   help="exit nonzero unless |mean - expected| <= 4 std errors")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_simulate_covering)

    p = sub.add_parser("gen-data", help="write synthetic long-tailed train/test CSVs")
    p.add_argument("--classes", type=_positive_int, required=True)
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--base-count", type=_positive_int, required=True)
    p.add_argument("--imbalance", type=float, help="largest/smallest count ratio")
    p.add_argument("--mu", type=float, help="decay rate in (0, 1]; overrides --imbalance")
    p.add_argument("--test-per-class", type=_positive_int, default=200)
    p.add_argument("--class-mean-scale", type=float, default=2.5)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one model from CSV datasets")
    p.add_argument("--train-csv", required=True)
    p.add_argument("--test-csv", required=True)
    p.add_argument("--config", help="flat JSON config (trainer + loss keys)")
    p.add_argument("--family", choices=["softmax_ce", "sigmoid_ce", "focal"])
    p.add_argument("--beta", help="class-balance beta in [0, 1) or 'none'")
    p.add_argument("--gamma", type=float, help="focal exponent >= 0")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=_positive_int)
    p.add_argument("--batch-size", dest="batch_size", type=_positive_int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--warmup-epochs", dest="warmup_epochs", type=int)
    p.add_argument("--decay-factor", dest="decay_factor", type=float)
    p.add_argument("--focal-lr-multiplier", dest="focal_lr_multiplier", type=float)
    p.add_argument("--arch", choices=["linear", "mlp"])
    p.add_argument("--hidden-size", dest="hidden_size", type=_positive_int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run a hyperparameter grid")
    p.add_argument("--config", help="flat JSON config (grid + trainer keys)")
    p.add_argument("--classes", type=_positive_int, default=10)
    p.add_argument("--dim", type=_positive_int, default=20)
    p.add_argument("--base-count", dest="base_count", type=_positive_int, default=1000)
    p.add_argument("--test-per-class", dest="test_per_class", type=_positive_int, default=200)
    p.add_argument("--class-mean-scale", dest="class_mean_scale", type=float, default=2.5)
    p.add_argument("--noise-std", dest="noise_std", type=float, default=1.0)
    p.add_argument("--data-seed", dest="data_seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summaries from a sweep's results.csv")
    p.add_argument("--results", required=True)
    p.add_argument("--profiles-dir", help="directory with <dataset_id>.csv profiles")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
