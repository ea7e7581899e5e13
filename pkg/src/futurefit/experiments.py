"""Experiment orchestration: build, train, score, aggregate, export.

A run is (dataset config, method, seed). The comparison and ablation
runners fan runs out over methods/variants and seeds, aggregate the test
metric per row, and write three artifact kinds into the output directory:

- ``results.csv`` with columns method,dataset,metric_mean,metric_std,n_seeds
  (the metric is test error percent for classification, MAE for regression;
  std is the sample standard deviation, or ``n/a`` with a single seed)
- ``report.json`` echoing the input config, the resolved config, per-seed
  numbers, and any per-cell failures
- a rendered PNG next to every delimited artifact

Individual cells that raise are recorded as failures and do not stop the
sweep; callers decide what a nonzero failure count means (the CLI exits 1).
"""

from __future__ import annotations

import copy
import dataclasses
import json
import os

import numpy as np

from futurefit.autodiff import UsageError
from futurefit.data import (
    DataError,
    TemporalDataset,
    gen_boolean_drift,
    gen_rotated_moons,
    load_temporal_csv,
    train_test_split,
)
from futurefit.losses import LossSpec
from futurefit.nets import PerFeatureTimeModel, TimeModel
from futurefit.training import TrainConfig, evaluate, train
from futurefit import plots

COMPARISON_METHODS = ("baseline", "last_domain", "inc_finetune", "grad_reg", "time_perturb", "gi")

# Methods that never look at the time input train the plain architecture.
_TIME_OBLIVIOUS = ("baseline", "last_domain", "inc_finetune")

_TRAIN_DEFAULTS = {
    "moons": dict(pretrain_epochs=30, pretrain_lr=5e-3, finetune_epochs=25,
                  finetune_lr=5e-4, finetune_snapshots=2, batch_size=32),
    "boolean": dict(pretrain_epochs=120, pretrain_lr=5e-3, finetune_epochs=60,
                    finetune_lr=1e-3, finetune_snapshots=2, batch_size=50),
}

# Method-specific schedule tweaks layered over the dataset defaults. The
# boolean extrapolation methods want a short pretrain (so the finetune
# gradients are still alive), a long hot finetune, full batches, and no
# early stopping (validation is the last train snapshot, which the
# objective deliberately stops fitting perfectly).
_TRAIN_METHOD_DEFAULTS = {
    # Full-batch for the one-domain baseline: with mini-batches it overfits
    # the 200-point snapshot well past the drift-limited regime.
    ("moons", "last_domain"): dict(batch_size=200),
    # Early stopping scores the plain base loss, which always prefers the
    # least-flattened epoch, so it silently vetoes the time-gradient penalty;
    # the regularized objective has to run to completion to mean anything.
    ("moons", "grad_reg"): dict(early_stop=False),
    ("boolean", "gi"): dict(pretrain_epochs=20, finetune_epochs=400,
                            finetune_lr=2e-3, batch_size=100, early_stop=False),
    ("boolean", "time_perturb"): dict(pretrain_epochs=20, finetune_epochs=400,
                                      finetune_lr=2e-3, batch_size=100,
                                      early_stop=False),
}

_LOSS_DEFAULTS = {
    ("moons", "gi"): dict(base="cross_entropy", lam=0.1, delta_max=0.5,
                          ascent_steps=10, ascent_rate=0.05, delta_mode="adversarial_ws"),
    ("moons", "grad_reg"): dict(base="cross_entropy", lam=0.01),
    ("moons", "time_perturb"): dict(base="cross_entropy", lam=0.5, delta_max=0.5,
                                    ascent_steps=10, ascent_rate=0.05,
                                    delta_mode="adversarial_ws"),
    ("boolean", "gi"): dict(base="cross_entropy", lam=3.0, delta_max=0.75,
                            ascent_steps=10, ascent_rate=1.0, delta_mode="adversarial_ws"),
    ("boolean", "grad_reg"): dict(base="cross_entropy", lam=10.0),
    ("boolean", "time_perturb"): dict(base="cross_entropy", lam=1.0, delta_max=1.0,
                                      ascent_steps=10, ascent_rate=1.0,
                                      delta_mode="adversarial_ws"),
}


def _deep_merge(base: dict, override: dict | None) -> dict:
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def build_dataset(data_cfg: dict, seed: int | None = None) -> TemporalDataset:
    """Instantiate a dataset from its config dict.

    ``seed`` (the run seed) is used unless the config pins its own, so by
    default every seed resamples the data as well as the model init.
    """
    cfg = dict(data_cfg)
    name = cfg.pop("name", None)
    if name is None:
        raise DataError("dataset config needs a 'name' (moons, boolean, or csv)")
    if "seed" not in cfg and seed is not None and name in ("moons", "boolean"):
        cfg["seed"] = seed
    if name == "moons":
        return gen_rotated_moons(**cfg)
    if name == "boolean":
        return gen_boolean_drift(**cfg)
    if name == "csv":
        return load_temporal_csv(**cfg)
    raise DataError(f"unknown dataset {name!r}")


def default_model_cfg(dataset: TemporalDataset, method: str) -> dict:
    """Architecture defaults: the per-feature scorer for the boolean task,
    the TReLU MLP otherwise, stripped of time inputs for oblivious methods."""
    if dataset.name == "boolean":
        if method == "time_invariant":
            return {"arch": "per_feature", "d": dataset.d, "zero_time": True}
        return {"arch": "per_feature", "d": dataset.d, "widths": [50, 20]}
    cfg = {
        "arch": "time_model", "d_in": dataset.d,
        "d_out": max(dataset.n_classes, 1) if dataset.task == "classification" else 1,
        "hidden": [50, 50], "m": 8, "m_lin": 2,
    }
    if method in _TIME_OBLIVIOUS:
        cfg.update(time_features=False, trelu_layers="none")
    else:
        cfg.update(time_features=True, trelu_layers="all")
    return cfg


def build_model(model_cfg: dict, seed: int):
    cfg = dict(model_cfg)
    arch = cfg.pop("arch", "time_model")
    cfg.setdefault("seed", seed)
    if arch == "per_feature":
        return PerFeatureTimeModel(**cfg)
    if arch == "time_model":
        return TimeModel(**cfg)
    raise DataError(f"unknown model arch {arch!r}")


def default_train_cfg(dataset_name: str, method: str, seed: int) -> TrainConfig:
    base = dict(_TRAIN_DEFAULTS.get(dataset_name, _TRAIN_DEFAULTS["moons"]))
    train_method = "baseline" if method == "time_invariant" else method
    base.update(_TRAIN_METHOD_DEFAULTS.get((dataset_name, train_method), {}))
    loss = dict(_LOSS_DEFAULTS.get((dataset_name, train_method), {"base": "cross_entropy"}))
    return TrainConfig(method=train_method, loss=LossSpec(**loss), seed=seed, **base)


def _apply_train_overrides(cfg: TrainConfig, overrides: dict | None) -> TrainConfig:
    if not overrides:
        return cfg
    d = cfg.to_dict()
    merged = _deep_merge(d, overrides)
    merged["loss"] = LossSpec(**{k: v for k, v in merged["loss"].items()})
    return TrainConfig(**merged)


def run_single(data_cfg: dict, method: str, seed: int, *, train_overrides: dict | None = None,
               model_overrides: dict | None = None, out_dir: str | None = None) -> dict:
    """Train one (dataset, method, seed) cell and score it on the held-out
    final snapshot. Returns a flat result row plus the full report."""
    dataset = build_dataset(data_cfg, seed)
    train_snaps, _, test_snaps = train_test_split(dataset, n_test=1)
    model_cfg = _deep_merge(default_model_cfg(dataset, method), model_overrides)
    model = build_model(model_cfg, seed)
    cfg = _apply_train_overrides(default_train_cfg(dataset.name, method, seed), train_overrides)
    cfg = dataclasses.replace(cfg, seed=seed)
    report = train(model, train_snaps, cfg, out_dir=out_dir)

    test = evaluate(model, test_snaps[0], dataset.task)
    n_total = sum(s.n for s in train_snaps)
    if dataset.task == "classification":
        train_err = sum(evaluate(model, s, dataset.task)["error_pct"] * s.n
                        for s in train_snaps) / n_total
        train_metrics = {"error_pct": train_err, "accuracy_pct": 100.0 - train_err, "n": n_total}
        metric = test["error_pct"]
    else:
        train_mae = sum(evaluate(model, s, dataset.task)["mae"] * s.n
                        for s in train_snaps) / n_total
        train_metrics = {"mae": train_mae, "n": n_total}
        metric = test["mae"]
    report.metrics = {"train": train_metrics, "test": test}
    if out_dir is not None:
        report.save(os.path.join(out_dir, "report.json"))
    return {
        "method": method, "dataset": dataset.name, "seed": seed, "metric": metric,
        "train_metrics": train_metrics, "test_metrics": test,
        "model": model, "report": report,
    }


def aggregate_rows(cells: list) -> list:
    """Group per-seed cells by (method, dataset) into results.csv rows."""
    groups: dict = {}
    for c in cells:
        groups.setdefault((c["method"], c["dataset"]), []).append(c["metric"])
    rows = []
    for (method, ds), vals in groups.items():
        arr = np.asarray(vals, dtype=np.float64)
        rows.append({
            "method": method, "dataset": ds,
            "metric_mean": float(arr.mean()),
            "metric_std": float(arr.std(ddof=1)) if arr.size > 1 else "n/a",
            "n_seeds": int(arr.size),
        })
    return rows


def write_results_csv(rows: list, path) -> None:
    import csv as _csv
    with open(path, "w", newline="") as fh:
        writer = _csv.DictWriter(
            fh, fieldnames=["method", "dataset", "metric_mean", "metric_std", "n_seeds"])
        writer.writeheader()
        writer.writerows(rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


class SweepResult:
    """Rows, per-seed cells, and failures of one sweep, plus artifact paths."""

    def __init__(self, rows, cells, failures, out_dir):
        self.rows = rows
        self.cells = cells
        self.failures = failures
        self.out_dir = out_dir

    @property
    def ok(self) -> bool:
        return not self.failures


def _run_sweep(variants: list, data_cfg: dict, seeds: list, out_dir: str | None,
               config_input: dict, quiet: bool, sweep_name: str) -> SweepResult:
    """Shared fan-out: ``variants`` are (method_label, method, train_ov, model_ov)."""
    cells, failures = [], []
    for label, method, train_ov, model_ov in variants:
        for seed in seeds:
            try:
                cell = run_single(data_cfg, method, seed,
                                  train_overrides=train_ov, model_overrides=model_ov)
                cell = dict(cell, method=label)
                cells.append(cell)
                if not quiet:
                    print(f"[{sweep_name}] {label} seed={seed}: metric={cell['metric']:.2f}")
            except Exception as exc:  # noqa: BLE001 - cell isolation is the point
                failures.append({"method": label, "seed": seed,
                                 "error": f"{type(exc).__name__}: {exc}"})
                if not quiet:
                    print(f"[{sweep_name}] {label} seed={seed}: FAILED ({exc})")
    rows = aggregate_rows(cells)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "results.csv")
        write_results_csv(rows, csv_path)
        plots.render_results(rows, os.path.join(out_dir, "results.png"))
        detail = {
            "sweep": sweep_name,
            "config_input": _jsonable(config_input),
            "dataset": _jsonable(data_cfg),
            "seeds": list(seeds),
            "cells": [
                {"method": c["method"], "seed": c["seed"], "metric": c["metric"],
                 "train_metrics": _jsonable(c["train_metrics"]),
                 "test_metrics": _jsonable(c["test_metrics"])}
                for c in cells
            ],
            "rows": _jsonable(rows),
            "failures": failures,
        }
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(detail, fh, indent=2)
    return SweepResult(rows, cells, failures, out_dir)


_SWEEP_KEYS = {"dataset", "seeds", "train", "model", "per_method", "methods",
               "delta_modes", "k_values", "trelu_variants"}


def _sweep_frame(config: dict, default_methods=None):
    unknown = set(config) - _SWEEP_KEYS
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)}; "
                         f"expected a subset of {sorted(_SWEEP_KEYS)}")
    data_cfg = config.get("dataset") or {"name": "moons"}
    seeds = config.get("seeds", [0])
    train_ov = config.get("train")
    model_ov = config.get("model")
    per_method = config.get("per_method", {})
    methods = config.get("methods", list(default_methods or COMPARISON_METHODS))
    return data_cfg, seeds, train_ov, model_ov, per_method, methods


def run_comparison(config: dict, out_dir: str | None = None, quiet: bool = False) -> SweepResult:
    """Train every requested method across seeds and tabulate test metrics."""
    data_cfg, seeds, train_ov, model_ov, per_method, methods = _sweep_frame(config)
    variants = []
    for m in methods:
        m_train = _deep_merge(train_ov or {}, per_method.get(m, {}).get("train"))
        m_model = _deep_merge(model_ov or {}, per_method.get(m, {}).get("model"))
        variants.append((m, m, m_train or None, m_model or None))
    return _run_sweep(variants, data_cfg, seeds, out_dir, config, quiet, "compare")


def run_delta_ablation(config: dict, out_dir: str | None = None, quiet: bool = False) -> SweepResult:
    """The main method with the three shift-selection strategies."""
    data_cfg, seeds, train_ov, model_ov, _, _ = _sweep_frame(config)
    modes = config.get("delta_modes", ["random", "adversarial", "adversarial_ws"])
    variants = [
        (f"gi_{mode}", "gi", _deep_merge(train_ov or {}, {"loss": {"delta_mode": mode}}), model_ov)
        for mode in modes
    ]
    return _run_sweep(variants, data_cfg, seeds, out_dir, config, quiet, "ablate-delta")


def run_k_ablation(config: dict, out_dir: str | None = None, quiet: bool = False) -> SweepResult:
    """The main method finetuned on the last k snapshots for several k."""
    data_cfg, seeds, train_ov, model_ov, _, _ = _sweep_frame(config)
    ks = config.get("k_values", [1, 2, 3])
    variants = [
        (f"gi_k{k}", "gi", _deep_merge(train_ov or {}, {"finetune_snapshots": int(k)}), model_ov)
        for k in ks
    ]
    return _run_sweep(variants, data_cfg, seeds, out_dir, config, quiet, "ablate-k")


def run_trelu_ablation(config: dict, out_dir: str | None = None, quiet: bool = False) -> SweepResult:
    """Time-aware architectures with 0..all thresholded-time activations,
    all trained with plain pooled ERM so only the architecture varies."""
    data_cfg, seeds, train_ov, model_ov, _, _ = _sweep_frame(config)
    variants_cfg = config.get("trelu_variants", ["none", "last", "all"])
    variants = []
    for v in variants_cfg:
        m_ov = _deep_merge(model_ov or {}, {"time_features": True, "trelu_layers": v})
        variants.append((f"erm_trelu_{v}", "baseline", train_ov, m_ov))
    return _run_sweep(variants, data_cfg, seeds, out_dir, config, quiet, "ablate-trelu")


def export_weight_curves(model, out_dir: str, t_min: float | None = None,
                         t_max: float | None = None, points: int = 121) -> str:
    """Write w_j(t) curves of a per-feature model over a raw-time grid.

    Defaults to the training range extended by half a span, which covers
    one extrapolated snapshot beyond the end.
    """
    if not isinstance(model, PerFeatureTimeModel):
        raise DataError("weight curves are defined for the per-feature model")
    scaler = model.scaler
    if t_min is None:
        t_min = scaler.t_min if scaler else 0.0
    if t_max is None:
        t_max = scaler.t_max + 0.5 * scaler.span if scaler else 1.0
    grid = np.linspace(float(t_min), float(t_max), int(points))
    norm = scaler.transform(grid) if scaler else grid
    curves = model.weight_curves(norm)  # (points, d+1)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "weights.csv")
    import csv as _csv
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["t"] + [f"w{j}" for j in range(curves.shape[1])])
        for t, row in zip(grid, curves):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    plots.render_weight_curves(grid, curves, os.path.join(out_dir, "weights.png"))
    return path


def export_decision_boundary(model, t: float, out_dir: str, bounds=(-3.0, 4.0, -3.0, 4.0),
                             resolution: int = 200) -> str:
    """Write the model's score over a 2-d grid at raw time ``t``.

    The score is the class-1 minus class-0 logit (or the single logit), so
    the decision boundary is its zero level set.
    """
    x0_min, x0_max, x1_min, x1_max = (float(b) for b in bounds)
    xs = np.linspace(x0_min, x0_max, int(resolution))
    ys = np.linspace(x1_min, x1_max, int(resolution))
    xx, yy = np.meshgrid(xs, ys)
    grid = np.column_stack([xx.ravel(), yy.ravel()])
    tt = float(model.scaler.transform(t)) if model.scaler is not None else float(t)
    logits = model.forward(grid, tt).primal.data
    score = logits[:, 1] - logits[:, 0] if logits.ndim == 2 and logits.shape[1] >= 2 \
        else logits.reshape(-1)
    pred = (score >= 0.0).astype(int)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"boundary_{t:g}.csv")
    import csv as _csv
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["x0", "x1", "pred", "score"])
        for (a, b), p, s in zip(grid, pred, score):
            writer.writerow([repr(float(a)), repr(float(b)), int(p), repr(float(s))])
    plots.render_boundary(xs, ys, score.reshape(len(ys), len(xs)),
                          os.path.join(out_dir, f"boundary_{t:g}.png"), t=t)
    return path
