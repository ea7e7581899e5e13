"""End-to-end tests for every CLI verb, on tiny configurations."""

import csv
import json

import pytest
import yaml

from futurefit.cli import main

TINY_MOONS = {"name": "moons", "n_domains": 3, "n_per_domain": 12}
FAST_TRAIN = {"pretrain_epochs": 1, "finetune_epochs": 1, "batch_size": 12,
              "loss": {"ascent_steps": 2}}


def _write_yaml(path, payload):
    with open(path, "w") as fh:
        yaml.safe_dump(payload, fh)
    return str(path)


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """One dataset CSV and one trained run, shared by the verb tests."""
    root = tmp_path_factory.mktemp("cli")
    gen_cfg = _write_yaml(root / "gen.yaml",
                          {"dataset": {"n_domains": 3, "n_per_domain": 12}})
    assert main(["gen-data", "--dataset", "moons", "--config", gen_cfg,
                 "--out", str(root / "data"), "--quiet"]) == 0
    train_cfg = _write_yaml(root / "train.yaml",
                            {"dataset": TINY_MOONS, "method": "gi",
                             "train": FAST_TRAIN})
    assert main(["train", "--config", train_cfg,
                 "--out", str(root / "run"), "--quiet"]) == 0
    return {
        "root": root,
        "data_csv": root / "data" / "moons.csv",
        "checkpoint": root / "run" / "model.npz",
    }


def test_cli_requires_a_verb():
    with pytest.raises(SystemExit):
        main([])


def test_gen_data_writes_csv_and_preview(ws):
    assert ws["data_csv"].exists()
    assert (ws["root"] / "data" / "moons.png").exists()
    with open(ws["data_csv"], newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x0", "x1", "y"]
    assert len(rows) == 1 + 3 * 12


def test_gen_data_requires_a_dataset_name(tmp_path):
    with pytest.raises(SystemExit):
        main(["gen-data", "--out", str(tmp_path), "--quiet"])


def test_train_writes_run_artifacts(ws):
    run = ws["root"] / "run"
    for name in ("model.npz", "report.json", "config_echo.yaml",
                 "loss_curves.png", "delta_trace.csv", "delta_trace.png"):
        assert (run / name).exists(), name
    with open(run / "config_echo.yaml") as fh:
        echoed = yaml.safe_load(fh)
    assert echoed["method"] == "gi"
    assert echoed["seed"] == 0
    assert echoed["dataset"] == TINY_MOONS


def test_eval_scores_each_snapshot(ws, tmp_path):
    rc = main(["eval", "--checkpoint", str(ws["checkpoint"]),
               "--data", str(ws["data_csv"]), "--out", str(tmp_path), "--quiet"])
    assert rc == 0
    with open(tmp_path / "eval.json") as fh:
        payload = json.load(fh)
    assert [r["t"] for r in payload["rows"]] == [0.0, 1.0, 2.0]
    assert all({"error_pct", "accuracy_pct", "n"} <= set(r) for r in payload["rows"])
    assert (tmp_path / "eval.png").exists()


def test_compare_tabulates_and_echoes_config(tmp_path, capsys):
    cfg = _write_yaml(tmp_path / "cmp.yaml",
                      {"dataset": TINY_MOONS, "seeds": [0, 1],
                       "methods": ["baseline"], "train": FAST_TRAIN})
    rc = main(["compare", "--config", cfg, "--out", str(tmp_path / "cmp"), "--seed", "3"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "baseline:" in out
    with open(tmp_path / "cmp" / "results.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and rows[0]["method"] == "baseline"
    # --seed narrows the sweep to that single seed
    with open(tmp_path / "cmp" / "report.json") as fh:
        assert json.load(fh)["seeds"] == [3]
    assert (tmp_path / "cmp" / "results.png").exists()
    assert (tmp_path / "cmp" / "config_echo.yaml").exists()


def test_failed_sweep_cell_sets_exit_code(tmp_path, capsys):
    cfg = _write_yaml(tmp_path / "k.yaml",
                      {"dataset": TINY_MOONS, "seeds": [0], "train": FAST_TRAIN,
                       "k_values": [1, 99]})
    rc = main(["ablate-k", "--config", cfg, "--out", str(tmp_path / "k"), "--quiet"])
    assert rc == 1
    assert "FAILED gi_k99" in capsys.readouterr().err
    with open(tmp_path / "k" / "results.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["gi_k1"]


def test_delta_and_trelu_ablations_run(tmp_path):
    d_cfg = _write_yaml(tmp_path / "d.yaml",
                        {"dataset": TINY_MOONS, "seeds": [0], "train": FAST_TRAIN,
                         "delta_modes": ["random"]})
    assert main(["ablate-delta", "--config", d_cfg, "--out", str(tmp_path / "d"),
                 "--quiet"]) == 0
    with open(tmp_path / "d" / "results.csv", newline="") as fh:
        assert [r["method"] for r in csv.DictReader(fh)] == ["gi_random"]

    t_cfg = _write_yaml(tmp_path / "t.yaml",
                        {"dataset": TINY_MOONS, "seeds": [0], "train": FAST_TRAIN,
                         "trelu_variants": ["none"]})
    assert main(["ablate-trelu", "--config", t_cfg, "--out", str(tmp_path / "t"),
                 "--quiet"]) == 0
    with open(tmp_path / "t" / "results.csv", newline="") as fh:
        assert [r["method"] for r in csv.DictReader(fh)] == ["erm_trelu_none"]


def test_export_boundary_explicit_and_default_times(ws, tmp_path):
    rc = main(["export-boundary", "--checkpoint", str(ws["checkpoint"]),
               "--t", "2", "--resolution", "8", "--out", str(tmp_path / "b"), "--quiet"])
    assert rc == 0
    with open(tmp_path / "b" / "boundary_2.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x0", "x1", "pred", "score"]
    assert len(rows) == 1 + 64
    assert (tmp_path / "b" / "boundary_2.png").exists()

    # without --t: the last training time and one extrapolated half-span step
    rc = main(["export-boundary", "--checkpoint", str(ws["checkpoint"]),
               "--resolution", "4", "--out", str(tmp_path / "bd"), "--quiet"])
    assert rc == 0
    assert (tmp_path / "bd" / "boundary_1.csv").exists()
    assert (tmp_path / "bd" / "boundary_1.5.csv").exists()

    with pytest.raises(SystemExit):
        main(["export-boundary", "--checkpoint", str(ws["checkpoint"]),
              "--bounds", "1,2,3", "--out", str(tmp_path / "bad"), "--quiet"])


def test_export_weights_from_a_boolean_run(tmp_path):
    cfg = _write_yaml(tmp_path / "btrain.yaml",
                      {"dataset": {"name": "boolean", "n_per_time": 12},
                       "method": "gi", "train": FAST_TRAIN})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "brun"),
                 "--quiet"]) == 0
    rc = main(["export-weights", "--checkpoint", str(tmp_path / "brun" / "model.npz"),
               "--points", "4", "--out", str(tmp_path / "w"), "--quiet"])
    assert rc == 0
    with open(tmp_path / "w" / "weights.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "w0", "w1", "w2", "w3", "w4", "w5"]
    assert len(rows) == 1 + 4
    assert (tmp_path / "w" / "weights.png").exists()


def test_quiet_flag_suppresses_progress(tmp_path, capsys):
    cfg = _write_yaml(tmp_path / "g.yaml", {"dataset": {"n_domains": 2, "n_per_domain": 8}})
    main(["gen-data", "--dataset", "moons", "--config", cfg,
          "--out", str(tmp_path / "q"), "--quiet"])
    assert capsys.readouterr().out == ""
    main(["gen-data", "--dataset", "moons", "--config", cfg,
          "--out", str(tmp_path / "loud")])
    assert "wrote" in capsys.readouterr().out
