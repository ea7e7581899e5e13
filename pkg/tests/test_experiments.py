"""Tests for the experiment runner: sweeps, aggregation, and exports."""

import csv
import json

import numpy as np
import pytest

from futurefit.autodiff import UsageError
from futurefit.data import DataError, gen_rotated_moons, save_temporal_csv
from futurefit.experiments import (
    aggregate_rows,
    build_dataset,
    default_model_cfg,
    export_decision_boundary,
    export_weight_curves,
    run_comparison,
    run_delta_ablation,
    run_k_ablation,
    run_single,
    run_trelu_ablation,
    write_results_csv,
)
from futurefit.nets import PerFeatureTimeModel

TINY_MOONS = {"name": "moons", "n_domains": 4, "n_per_domain": 24}
FAST_TRAIN = {"pretrain_epochs": 1, "finetune_epochs": 1, "batch_size": 12,
              "loss": {"ascent_steps": 2}}


# ---------------------------------------------------------------------------
# aggregation and the results table
# ---------------------------------------------------------------------------


def test_aggregate_rows_mean_std_and_single_seed_marker():
    cells = [
        {"method": "a", "dataset": "d", "metric": 1.0},
        {"method": "a", "dataset": "d", "metric": 3.0},
        {"method": "b", "dataset": "d", "metric": 5.0},
    ]
    rows = {r["method"]: r for r in aggregate_rows(cells)}
    assert rows["a"]["metric_mean"] == 2.0
    assert rows["a"]["metric_std"] == pytest.approx(np.sqrt(2.0))
    assert rows["a"]["n_seeds"] == 2
    assert rows["b"]["metric_std"] == "n/a"
    assert rows["b"]["n_seeds"] == 1


def test_results_csv_schema(tmp_path):
    rows = aggregate_rows([{"method": "b", "dataset": "d", "metric": 5.0}])
    path = tmp_path / "results.csv"
    write_results_csv(rows, path)
    text = path.read_text().splitlines()
    assert text[0] == "method,dataset,metric_mean,metric_std,n_seeds"
    assert text[1] == "b,d,5.0,n/a,1"


# ---------------------------------------------------------------------------
# dataset and model construction rules
# ---------------------------------------------------------------------------


def test_build_dataset_seeding_and_errors(tmp_path):
    a = build_dataset(dict(TINY_MOONS), seed=5)
    b = build_dataset(dict(TINY_MOONS), seed=5)
    np.testing.assert_array_equal(a.snapshots[0].x, b.snapshots[0].x)
    # a seed pinned in the config wins over the run seed
    pinned = {**TINY_MOONS, "seed": 1}
    c = build_dataset(dict(pinned), seed=7)
    d = build_dataset(dict(pinned), seed=9)
    np.testing.assert_array_equal(c.snapshots[0].x, d.snapshots[0].x)
    assert not np.array_equal(a.snapshots[0].x, c.snapshots[0].x)

    csv_path = tmp_path / "data.csv"
    save_temporal_csv(gen_rotated_moons(n_domains=2, n_per_domain=10), csv_path)
    loaded = build_dataset({"name": "csv", "path": str(csv_path)})
    assert len(loaded.snapshots) == 2

    with pytest.raises(DataError):
        build_dataset({"n_domains": 3})
    with pytest.raises(DataError):
        build_dataset({"name": "bogus"})


def test_default_model_rules():
    boolean = build_dataset({"name": "boolean", "n_per_time": 10}, seed=0)
    moons = build_dataset(dict(TINY_MOONS), seed=0)

    per_feat = default_model_cfg(boolean, "gi")
    assert per_feat == {"arch": "per_feature", "d": 5, "widths": [50, 20]}
    probe = default_model_cfg(boolean, "time_invariant")
    assert probe["zero_time"] is True

    aware = default_model_cfg(moons, "gi")
    assert aware["time_features"] is True and aware["trelu_layers"] == "all"
    assert aware["d_out"] == 2
    oblivious = default_model_cfg(moons, "baseline")
    assert oblivious["time_features"] is False and oblivious["trelu_layers"] == "none"


# ---------------------------------------------------------------------------
# the single-cell runner
# ---------------------------------------------------------------------------


def test_run_single_row_shape_and_artifacts(tmp_path):
    cell = run_single(dict(TINY_MOONS), "gi", 0, train_overrides=dict(FAST_TRAIN),
                      out_dir=str(tmp_path / "cell"))
    assert set(cell) == {"method", "dataset", "seed", "metric", "train_metrics",
                         "test_metrics", "model", "report"}
    assert cell["metric"] == cell["test_metrics"]["error_pct"]
    assert cell["report"].config["pretrain_epochs"] == 1
    assert (tmp_path / "cell" / "model.npz").exists()
    with open(tmp_path / "cell" / "report.json") as fh:
        saved = json.load(fh)
    assert saved["metrics"]["test"] == cell["test_metrics"]
    # the held-out snapshot never contributes to the time scaler
    assert cell["model"].scaler.t_max == 2.0


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def test_sweep_rejects_unknown_config_keys():
    with pytest.raises(UsageError, match="data"):
        run_comparison({"data": TINY_MOONS, "seeds": [0]})


def test_comparison_applies_per_method_overrides(tmp_path):
    config = {
        "dataset": TINY_MOONS, "seeds": [0], "methods": ["baseline", "gi"],
        "train": dict(FAST_TRAIN),
        "per_method": {"baseline": {"train": {"pretrain_epochs": 2}}},
    }
    result = run_comparison(config, out_dir=str(tmp_path / "cmp"), quiet=True)
    assert result.ok
    by_method = {c["method"]: c for c in result.cells}
    assert by_method["baseline"]["report"].config["pretrain_epochs"] == 2
    assert by_method["gi"]["report"].config["pretrain_epochs"] == 1
    assert (tmp_path / "cmp" / "results.csv").exists()
    assert (tmp_path / "cmp" / "results.png").exists()


def test_failed_cells_are_isolated_and_logged(tmp_path):
    config = {"dataset": TINY_MOONS, "seeds": [0], "train": dict(FAST_TRAIN),
              "k_values": [1, 99]}
    result = run_k_ablation(config, out_dir=str(tmp_path / "kabl"), quiet=True)
    assert not result.ok
    assert [r["method"] for r in result.rows] == ["gi_k1"]
    assert result.failures[0]["method"] == "gi_k99"
    assert "UsageError" in result.failures[0]["error"]
    with open(tmp_path / "kabl" / "report.json") as fh:
        detail = json.load(fh)
    assert {"sweep", "config_input", "cells", "rows", "failures"} <= set(detail)
    assert len(detail["failures"]) == 1


def test_ablation_variant_labels(tmp_path):
    delta = run_delta_ablation(
        {"dataset": TINY_MOONS, "seeds": [0], "train": dict(FAST_TRAIN),
         "delta_modes": ["random"]}, quiet=True)
    assert [r["method"] for r in delta.rows] == ["gi_random"]

    trelu = run_trelu_ablation(
        {"dataset": TINY_MOONS, "seeds": [0], "train": dict(FAST_TRAIN),
         "trelu_variants": ["none"]}, quiet=True)
    assert [r["method"] for r in trelu.rows] == ["erm_trelu_none"]
    assert trelu.cells[0]["model"].spec["time_features"] is True
    assert trelu.cells[0]["model"].spec["trelu_layers"] == [False, False]


def test_wider_finetune_window_stays_close_to_narrow(tmp_path):
    result = run_k_ablation({"dataset": {"name": "moons"}, "seeds": [0],
                             "k_values": [1, 2]}, quiet=True)
    assert result.ok
    by = {r["method"]: r["metric_mean"] for r in result.rows}
    assert by["gi_k2"] <= by["gi_k1"] + 2.0


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def test_weight_curve_export_grid_and_schema(tmp_path, boolean_gi_cell):
    model = boolean_gi_cell["model"]
    path = export_weight_curves(model, str(tmp_path / "wc"), points=5)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    assert header == ["t"] + [f"w{j}" for j in range(6)]
    # default grid: training range [0, 2] extended by half a span
    assert [float(r[0]) for r in rows] == [0.0, 0.75, 1.5, 2.25, 3.0]
    assert (tmp_path / "wc" / "weights.png").exists()

    explicit = export_weight_curves(model, str(tmp_path / "wc2"), t_min=0.0,
                                    t_max=2.0, points=3)
    with open(explicit, newline="") as fh:
        next(fh)
        assert [float(line.split(",")[0]) for line in fh] == [0.0, 1.0, 2.0]


def test_weight_curves_require_the_per_feature_model(tmp_path, moons_gi_cell):
    with pytest.raises(DataError):
        export_weight_curves(moons_gi_cell["model"], str(tmp_path))


def test_learned_weight_curves_track_the_drift(boolean_gi_cell, boolean_erm_cell):
    # the drifting feature's weight should grow with time under the
    # extrapolation-aware objective, and the transient features should carry
    # less weight than they do under plain ERM (which exploits them freely)
    grid = np.linspace(0.0, 1.5, 31)  # normalized train range plus the test time
    gi = boolean_gi_cell["model"].weight_curves(grid)
    erm = boolean_erm_cell["model"].weight_curves(grid)
    assert gi[-1, 1] > gi[0, 1]
    gi_transient = np.abs(gi[:, 3:]).max()
    erm_transient = np.abs(erm[:, 3:]).max()
    assert erm_transient > gi_transient


def test_boundary_export_schema_and_pred_consistency(tmp_path, moons_gi_cell):
    model = moons_gi_cell["model"]
    path = export_decision_boundary(model, 9.0, str(tmp_path / "bd"), resolution=10)
    assert path.endswith("boundary_9.csv")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        assert next(reader) == ["x0", "x1", "pred", "score"]
        rows = list(reader)
    assert len(rows) == 100
    for row in rows:
        assert int(row[2]) == (1 if float(row[3]) >= 0.0 else 0)
    assert (tmp_path / "bd" / "boundary_9.png").exists()


def test_constant_model_exports_a_uniform_grid(tmp_path):
    model = PerFeatureTimeModel(d=2, widths=(4, 3), seed=0)
    for name in ("W1", "b1", "W2", "b2", "W3"):
        getattr(model, name).data[:] = 0.0
    model.b3.data[:] = 0.0
    model.b3.data[0, 0, 0] = 1.0  # constant positive bias, zero feature weights
    path = export_decision_boundary(model, 0.0, str(tmp_path), resolution=5)
    with open(path, newline="") as fh:
        next(fh)
        rows = list(csv.reader(fh))
    assert all(int(r[2]) == 1 and float(r[3]) == 1.0 for r in rows)


def test_boundary_grid_agrees_with_direct_evaluation(tmp_path, moons_gi_cell):
    # scoring the held-out snapshot through the exported grid (nearest cell)
    # must land within two points of the exact test error
    model = moons_gi_cell["model"]
    data = gen_rotated_moons(seed=0)
    test_snap = data.snapshots[-1]
    res = 200
    path = export_decision_boundary(model, test_snap.t, str(tmp_path / "grid"),
                                    bounds=(-3.0, 4.0, -3.0, 4.0), resolution=res)
    preds = np.loadtxt(path, delimiter=",", skiprows=1, usecols=2)
    ix = np.clip(np.rint((test_snap.x[:, 0] + 3.0) / 7.0 * (res - 1)), 0, res - 1).astype(int)
    iy = np.clip(np.rint((test_snap.x[:, 1] + 3.0) / 7.0 * (res - 1)), 0, res - 1).astype(int)
    grid_pred = preds[iy * res + ix]
    err_grid = 100.0 * float(np.mean(grid_pred != test_snap.y))
    err_exact = moons_gi_cell["metric"]
    assert abs(err_grid - err_exact) <= 2.0
