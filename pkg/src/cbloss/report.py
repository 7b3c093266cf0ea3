"""Summaries over a sweep's results.csv.

Three plot-ready CSV tables are emitted instead of rendered figures:

* ``cb_deltas.csv`` — per-beta change in error versus the matching no-CB
  baseline run (same dataset, family, gamma, seed), averaged over seeds.
* ``best_configs.csv`` — lowest mean test error per (dataset, family) and
  per dataset overall.  Selection here uses the test error present in
  results.csv; the sweep's own summary.csv selects on validation error.
* ``effnum_curves.csv`` — per-class effective numbers and normalized
  weights for every numeric beta in the results, given a class-count
  profile per dataset.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from cbloss.effnum import ClassCounts, class_balanced_weights, effective_number
from cbloss.longtail import read_profile_csv
from cbloss.sweep import RESULTS_COLUMNS

__all__ = [
    "SchemaError",
    "load_results",
    "delta_rows",
    "best_rows",
    "effnum_curve_rows",
    "write_report",
]


class SchemaError(ValueError):
    """results.csv does not match the expected column layout."""


def load_results(path) -> list[dict]:
    """Parse results.csv, insisting on the exact canonical schema."""
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty results file")
        missing = [c for c in RESULTS_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r}")
        extra = [c for c in header if c not in RESULTS_COLUMNS]
        if extra:
            raise SchemaError(f"{path}: unexpected column {extra[0]!r}")
        if header != RESULTS_COLUMNS:
            raise SchemaError(f"{path}: columns out of order: {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RESULTS_COLUMNS):
                raise SchemaError(
                    f"{path}:{lineno}: expected {len(RESULTS_COLUMNS)} fields, got {len(row)}"
                )
            raw = dict(zip(RESULTS_COLUMNS, row))
            raw["imbalance"] = float(raw["imbalance"])
            raw["seed"] = int(raw["seed"])
            raw["overall_error"] = float(raw["overall_error"])
            raw["tail_error"] = float(raw["tail_error"])
            rows.append(raw)
    return rows


def _ok(rows):
    return [r for r in rows if r["status"] == "ok"]


def delta_rows(rows: list[dict]) -> list[dict]:
    """Mean per-beta error deltas against the beta='none' baseline.

    Rows are matched on (dataset_id, family, gamma, seed); groups without a
    baseline run are skipped.  The baseline's own delta is exactly zero.
    """
    rows = _ok(rows)
    baselines = {
        (r["dataset_id"], r["family"], r["gamma"], r["seed"]): r
        for r in rows
        if r["beta"] == "none"
    }
    grouped: dict[tuple, list[tuple[float, float]]] = {}
    order: list[tuple] = []
    for r in rows:
        base = baselines.get((r["dataset_id"], r["family"], r["gamma"], r["seed"]))
        if base is None:
            continue
        key = (r["dataset_id"], r["imbalance"], r["family"], r["gamma"], r["beta"])
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(
            (
                r["overall_error"] - base["overall_error"],
                r["tail_error"] - base["tail_error"],
            )
        )
    out = []
    for key in order:
        dataset_id, imbalance, family, gamma, beta = key
        deltas = grouped[key]
        out.append(
            {
                "dataset_id": dataset_id,
                "imbalance": imbalance,
                "family": family,
                "gamma": gamma,
                "beta": beta,
                "n_seeds": len(deltas),
                "mean_overall_delta": float(np.mean([d[0] for d in deltas])),
                "mean_tail_delta": float(np.mean([d[1] for d in deltas])),
            }
        )
    return out


def best_rows(rows: list[dict]) -> list[dict]:
    """Lowest mean test error per (dataset, family), plus per-dataset best."""
    rows = _ok(rows)
    datasets: dict[str, list[dict]] = {}
    for r in rows:
        datasets.setdefault(r["dataset_id"], []).append(r)
    out = []
    for dataset_id, dataset_rows in datasets.items():
        configs: dict[tuple, list[dict]] = {}
        for r in dataset_rows:
            configs.setdefault((r["family"], r["beta"], r["gamma"]), []).append(r)
        stats = []
        for (family, beta, gamma), group in configs.items():
            stats.append(
                {
                    "dataset_id": dataset_id,
                    "imbalance": group[0]["imbalance"],
                    "family": family,
                    "beta": beta,
                    "gamma": gamma,
                    "n_seeds": len(group),
                    "mean_overall_error": float(np.mean([g["overall_error"] for g in group])),
                    "mean_tail_error": float(np.mean([g["tail_error"] for g in group])),
                }
            )
        by_family: dict[str, dict] = {}
        for s in stats:
            cur = by_family.get(s["family"])
            if cur is None or s["mean_overall_error"] < cur["mean_overall_error"]:
                by_family[s["family"]] = s
        best_overall = min(stats, key=lambda s: s["mean_overall_error"])
        for family, s in by_family.items():
            out.append({"scope": f"best[{family}]", **s})
        out.append({"scope": "best[overall]", **best_overall})
    return out


def effnum_curve_rows(dataset_id: str, counts: ClassCounts, betas: list[float]) -> list[dict]:
    """Per-class effective number and weights for each beta."""
    out = []
    for beta in betas:
        weights = class_balanced_weights(counts, beta)
        for i, n in enumerate(counts.counts):
            out.append(
                {
                    "dataset_id": dataset_id,
                    "beta": beta,
                    "class_index": i,
                    "count": int(n),
                    "effective_number": effective_number(beta, int(n)),
                    "alpha": weights[i],
                }
            )
    return out


def _write_csv(path: Path, columns: list[str], rows: list[dict], formats: dict) -> None:
    lines = [",".join(columns)]
    for r in rows:
        cells = []
        for c in columns:
            v = r[c]
            fmt = formats.get(c)
            cells.append(fmt(v) if fmt else str(v))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def write_report(results_path, out_dir, profiles: dict | None = None) -> dict:
    """Emit the three report CSVs; returns their paths.

    ``profiles`` maps dataset_id to a ClassCounts (or a profile CSV path);
    effective-number curves are emitted for the datasets present in it.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = load_results(results_path)

    fmt6 = lambda v: f"{float(v):.6f}"
    fmtg = lambda v: f"{float(v):g}"

    deltas_path = out_dir / "cb_deltas.csv"
    _write_csv(
        deltas_path,
        ["dataset_id", "imbalance", "family", "gamma", "beta", "n_seeds",
         "mean_overall_delta", "mean_tail_delta"],
        delta_rows(rows),
        {"imbalance": fmtg, "mean_overall_delta": fmt6, "mean_tail_delta": fmt6},
    )

    best_path = out_dir / "best_configs.csv"
    _write_csv(
        best_path,
        ["dataset_id", "imbalance", "scope", "family", "beta", "gamma", "n_seeds",
         "mean_overall_error", "mean_tail_error"],
        best_rows(rows),
        {"imbalance": fmtg, "mean_overall_error": fmt6, "mean_tail_error": fmt6},
    )

    paths = {"deltas": deltas_path, "best": best_path}
    if profiles:
        betas = sorted(
            {float(r["beta"]) for r in rows if r["beta"] not in ("none",)}
        )
        curve_rows = []
        for dataset_id, counts in profiles.items():
            if not isinstance(counts, ClassCounts):
                counts = read_profile_csv(counts)
            if betas:
                curve_rows.extend(effnum_curve_rows(dataset_id, counts, betas))
        curves_path = out_dir / "effnum_curves.csv"
        _write_csv(
            curves_path,
            ["dataset_id", "beta", "class_index", "count", "effective_number", "alpha"],
            curve_rows,
            {"beta": fmtg, "effective_number": lambda v: f"{float(v):.6g}",
             "alpha": lambda v: f"{float(v):.6g}"},
        )
        paths["curves"] = curves_path
    return paths
