"""Tests for the sweep runner and the report tables."""

import numpy as np
import pytest

from cbloss.effnum import ClassCounts
from cbloss.longtail import SyntheticDataSpec, build_profile, generate_synthetic
from cbloss.report import (
    SchemaError,
    best_rows,
    delta_rows,
    effnum_curve_rows,
    load_results,
    write_report,
)
from cbloss.sweep import (
    RESULTS_COLUMNS,
    SweepDataSpec,
    SweepGrid,
    default_tail_k,
    run_sweep,
    split_train_val,
    tail_error,
)
from cbloss.trainer import TrainConfig

SMALL_GRID = SweepGrid(
    families=("softmax_ce", "sigmoid_ce", "focal"),
    betas=("none", 0.0, 0.9),
    gammas=(0.5, 1.0),
    imbalances=(10.0,),
    seeds=(0, 1),
)
SMALL_DATA = SweepDataSpec(
    n_classes=5, dim=5, base_count=60, test_per_class=20, data_seed=3
)
SMALL_CONFIG = TrainConfig(epochs=3, warmup_epochs=1, lr=0.05, seed=0)


@pytest.fixture(scope="module")
def sweep_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    runs = run_sweep(SMALL_GRID, SMALL_DATA, SMALL_CONFIG, out)
    return out, runs


def strip_wall(text: str) -> str:
    lines = text.splitlines()
    return "\n".join(",".join(line.split(",")[:-1]) for line in lines)


class TestGrid:
    def test_combos_expand_gamma_only_for_focal(self):
        combos = SMALL_GRID.combos()
        # 3 betas each for softmax and sigmoid, 3 * 2 for focal.
        assert len(combos) == 3 + 3 + 6
        assert combos[0] == ("softmax_ce", "none", None)
        focal = [c for c in combos if c[0] == "focal"]
        assert {c[2] for c in focal} == {0.5, 1.0}

    def test_num_runs(self):
        assert SMALL_GRID.num_runs() == 12 * 1 * 2

    def test_validation(self):
        with pytest.raises(ValueError):
            SweepGrid(families=())
        with pytest.raises(ValueError):
            SweepGrid(betas=("none", 1.0))
        with pytest.raises(ValueError):
            SweepGrid(families=("hinge",))
        with pytest.raises(ValueError):
            SweepGrid(imbalances=(0.5,))


class TestTailError:
    def test_picks_smallest_classes(self):
        counts = ClassCounts(np.array([100, 50, 10, 5]))
        errors = [0.1, 0.2, 0.6, 0.8]
        assert tail_error(errors, counts, k=2) == pytest.approx(0.7)

    def test_default_k_is_smallest_third(self):
        assert default_tail_k(10) == 4
        assert default_tail_k(3) == 1
        assert default_tail_k(100) == 34

    def test_ties_resolved_stably(self):
        counts = ClassCounts(np.array([5, 5, 5]))
        assert tail_error([0.3, 0.6, 0.9], counts, k=1) == pytest.approx(0.3)


class TestSplit:
    def _data(self):
        profile = build_profile(4, 40, 0.5)
        return generate_synthetic(profile, SyntheticDataSpec(dim=3, rng_seed=0))

    def test_stratified_and_complete(self):
        data = self._data()
        fit, val = split_train_val(data, seed=0, val_fraction=0.2)
        assert fit.num_samples + val.num_samples == data.num_samples
        assert np.all(fit.class_counts.counts >= 1)
        # Roughly 20 percent of each class held out.
        for i in range(4):
            total = data.class_counts[i]
            assert val.class_counts[i] == min(total - 1, round(0.2 * total))

    def test_seed_keyed(self):
        data = self._data()
        a_fit, _ = split_train_val(data, seed=0)
        b_fit, _ = split_train_val(data, seed=0)
        c_fit, _ = split_train_val(data, seed=1)
        assert np.array_equal(a_fit.features, b_fit.features)
        assert not np.array_equal(a_fit.features, c_fit.features)

    def test_tiny_class_kept_in_fit(self):
        profile = build_profile(3, 10, 0.1)  # counts [10, 1, 1]
        data = generate_synthetic(profile, SyntheticDataSpec(dim=2, rng_seed=1))
        fit, val = split_train_val(data, seed=5, val_fraction=0.5)
        assert np.all(fit.class_counts.counts >= 1)


class TestRunSweep:
    def test_rectangular_and_complete(self, sweep_out):
        out, runs = sweep_out
        assert len(runs) == SMALL_GRID.num_runs()
        lines = (out / "results.csv").read_text().splitlines()
        assert lines[0] == ",".join(RESULTS_COLUMNS)
        assert len(lines) == 1 + len(runs)
        widths = {len(line.split(",")) for line in lines}
        assert widths == {len(RESULTS_COLUMNS)}

    def test_all_ok_and_errors_in_range(self, sweep_out):
        _, runs = sweep_out
        assert all(r.status == "ok" for r in runs)
        assert all(0.0 <= r.overall_error <= 1.0 for r in runs)
        assert all(0.0 <= r.val_error <= 1.0 for r in runs)

    def test_rerun_is_byte_identical_modulo_wall(self, sweep_out, tmp_path):
        out, _ = sweep_out
        rerun_dir = tmp_path / "rerun"
        run_sweep(SMALL_GRID, SMALL_DATA, SMALL_CONFIG, rerun_dir)
        first = strip_wall((out / "results.csv").read_text())
        second = strip_wall((rerun_dir / "results.csv").read_text())
        assert first == second
        assert (out / "summary.csv").read_text() == (rerun_dir / "summary.csv").read_text()

    def test_beta_none_matches_beta_zero(self, sweep_out):
        _, runs = sweep_out
        for family in ("softmax_ce", "sigmoid_ce", "focal"):
            for seed in (0, 1):
                rows = [r for r in runs if r.family == family and r.seed == seed]
                nones = {r.gamma: r for r in rows if r.beta == "none"}
                zeros = {r.gamma: r for r in rows if r.beta == 0.0}
                assert nones and set(nones) == set(zeros)
                for gamma, none_row in nones.items():
                    zero_row = zeros[gamma]
                    assert none_row.overall_error == zero_row.overall_error
                    assert none_row.tail_error == zero_row.tail_error
                    assert none_row.per_class_errors == zero_row.per_class_errors

    def test_profiles_written(self, sweep_out):
        out, _ = sweep_out
        profile = out / "profiles" / "synth-c5-if10.csv"
        assert profile.exists()
        assert profile.read_text().splitlines()[0] == "class_index,count"

    def test_summary_has_best_rows(self, sweep_out):
        out, _ = sweep_out
        lines = (out / "summary.csv").read_text().splitlines()
        scopes = {line.split(",")[2] for line in lines[1:]}
        assert scopes == {
            "best[softmax_ce]",
            "best[sigmoid_ce]",
            "best[focal]",
            "best[overall]",
        }

    def test_minimal_grid_gives_single_baseline_row(self, tmp_path):
        grid = SweepGrid(
            families=("softmax_ce",), betas=("none",), gammas=(0.5,),
            imbalances=(1.0,), seeds=(0,),
        )
        runs = run_sweep(grid, SMALL_DATA, SMALL_CONFIG, tmp_path / "baseline")
        assert len(runs) == 1
        assert runs[0].beta == "none" and runs[0].status == "ok"
        assert runs[0].dataset_id == "synth-c5-if1"
        lines = (tmp_path / "baseline" / "results.csv").read_text().splitlines()
        assert len(lines) == 2


class TestReport:
    def test_load_validates_schema(self, sweep_out, tmp_path):
        out, _ = sweep_out
        rows = load_results(out / "results.csv")
        assert len(rows) == SMALL_GRID.num_runs()

        broken = tmp_path / "broken.csv"
        text = (out / "results.csv").read_text().splitlines()
        header = text[0].replace(",tail_error", "")
        broken.write_text("\n".join([header] + text[1:]))
        with pytest.raises(SchemaError, match="tail_error"):
            load_results(broken)

    def test_baseline_deltas_are_zero(self, sweep_out):
        out, _ = sweep_out
        rows = load_results(out / "results.csv")
        deltas = delta_rows(rows)
        for d in deltas:
            if d["beta"] == "none":
                assert d["mean_overall_delta"] == 0.0
            if d["beta"] == "0":
                # beta=0 training is bit-identical to the baseline.
                assert d["mean_overall_delta"] == 0.0
                assert d["mean_tail_delta"] == 0.0

    def test_baseline_only_file_gives_all_zero(self, sweep_out, tmp_path):
        out, _ = sweep_out
        text = (out / "results.csv").read_text().splitlines()
        keep = [text[0]] + [l for l in text[1:] if l.split(",")[3] == "none"]
        path = tmp_path / "baselines.csv"
        path.write_text("\n".join(keep) + "\n")
        deltas = delta_rows(load_results(path))
        assert deltas
        assert all(d["mean_overall_delta"] == 0.0 for d in deltas)

    def test_best_rows_cover_families_and_overall(self, sweep_out):
        out, _ = sweep_out
        rows = load_results(out / "results.csv")
        best = best_rows(rows)
        scopes = {b["scope"] for b in best}
        assert "best[overall]" in scopes
        assert "best[softmax_ce]" in scopes
        overall = [b for b in best if b["scope"] == "best[overall]"][0]
        assert overall["mean_overall_error"] == min(
            b["mean_overall_error"] for b in best
        )

    def test_effnum_curves(self):
        counts = ClassCounts(np.array([100, 10]))
        rows = effnum_curve_rows("d", counts, [0.9])
        assert len(rows) == 2
        assert rows[0]["effective_number"] == pytest.approx(9.999734, abs=1e-5)
        alphas = [r["alpha"] for r in rows]
        assert sum(alphas) == pytest.approx(2.0)

    def test_write_report_files(self, sweep_out, tmp_path):
        out, _ = sweep_out
        report_dir = tmp_path / "report"
        paths = write_report(
            out / "results.csv",
            report_dir,
            profiles={"synth-c5-if10": out / "profiles" / "synth-c5-if10.csv"},
        )
        assert paths["deltas"].exists()
        assert paths["best"].exists()
        assert paths["curves"].exists()
        header = paths["curves"].read_text().splitlines()[0]
        assert header == "dataset_id,beta,class_index,count,effective_number,alpha"
