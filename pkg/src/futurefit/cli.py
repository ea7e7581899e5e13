"""Command line entry point.

Verbs:

- gen-data          write a synthetic dataset CSV (plus a preview figure)
- train             train one method on one dataset, write report/checkpoint
- eval              score a checkpoint on a dataset CSV, per snapshot
- compare           train several methods across seeds, tabulate
- ablate-delta      shift-selection strategies for the main method
- ablate-k          number of finetuning snapshots
- ablate-trelu      count of time-thresholded activation layers
- export-boundary   decision-boundary grid of a checkpoint at given times
- export-weights    weight-over-time curves of a per-feature checkpoint

Every verb accepts --config (YAML), --seed, --out, --quiet. Sweeps exit
nonzero when any (method, seed) cell fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import yaml

from futurefit import experiments, plots
from futurefit.data import load_temporal_csv, save_temporal_csv
from futurefit.nets import load_checkpoint
from futurefit.training import evaluate


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, default=None, help="override the run seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    return common


def _load_config(args) -> dict:
    if not args.config:
        return {}
    with open(args.config) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise SystemExit(f"config {args.config} must be a YAML mapping")
    return cfg


def _echo_config(cfg: dict, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config_echo.yaml"), "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=False)


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _cmd_gen_data(args) -> int:
    cfg = _load_config(args)
    data_cfg = cfg.get("dataset") or {}
    if args.dataset:
        data_cfg = dict(data_cfg, name=args.dataset)
    if "name" not in data_cfg:
        raise SystemExit("gen-data needs a dataset name (--dataset or config)")
    dataset = experiments.build_dataset(data_cfg, args.seed if args.seed is not None else 0)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{dataset.name}.csv")
    save_temporal_csv(dataset, path)
    plots.render_snapshots(dataset, os.path.join(out_dir, f"{dataset.name}.png"))
    _say(args, f"wrote {path} ({sum(s.n for s in dataset.snapshots)} rows, "
               f"{len(dataset.snapshots)} snapshots)")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    data_cfg = cfg.get("dataset") or {"name": "moons"}
    method = args.method or cfg.get("method", "gi")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    out_dir = args.out
    cell = experiments.run_single(
        data_cfg, method, seed,
        train_overrides=cfg.get("train"), model_overrides=cfg.get("model"),
        out_dir=out_dir)
    report = cell["report"]
    if out_dir:
        _echo_config({**cfg, "method": method, "seed": seed}, out_dir)
        plots.render_loss_curves(report.to_dict(), os.path.join(out_dir, "loss_curves.png"))
        if report.delta_trace_path:
            plots.render_delta_trace(report.delta_trace_path,
                                     os.path.join(out_dir, "delta_trace.png"))
    _say(args, f"{method} seed={seed}: test={cell['test_metrics']} "
               f"train={cell['train_metrics']}")
    return 0


def _cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = load_temporal_csv(args.data, task=args.task)
    rows = []
    for snap in dataset.snapshots:
        metrics = evaluate(model, snap, args.task)
        rows.append({"t": snap.t, **metrics})
        _say(args, f"t={snap.t:g}: {metrics}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "eval.json"), "w") as fh:
            json.dump({"checkpoint": args.checkpoint, "data": args.data, "rows": rows}, fh,
                      indent=2)
        key = "error_pct" if args.task == "classification" else "mae"
        plots.render_metrics_over_time(
            [r["t"] for r in rows], [r[key] for r in rows], key,
            os.path.join(args.out, "eval.png"))
    return 0


def _sweep_cmd(runner):
    def handler(args) -> int:
        cfg = _load_config(args)
        if args.seed is not None:
            cfg["seeds"] = [args.seed]
        result = runner(cfg, out_dir=args.out, quiet=args.quiet)
        if args.out:
            _echo_config(cfg, args.out)
        for row in result.rows:
            _say(args, f"{row['method']}: {row['metric_mean']:.2f} "
                       f"(std {row['metric_std']}, n={row['n_seeds']})")
        if result.failures:
            for f in result.failures:
                print(f"FAILED {f['method']} seed={f['seed']}: {f['error']}", file=sys.stderr)
            return 1
        return 0
    return handler


def _cmd_export_boundary(args) -> int:
    model = load_checkpoint(args.checkpoint)
    out_dir = args.out or "."
    times = args.t
    if not times:
        if model.scaler is None:
            raise SystemExit("checkpoint has no time scaler; pass --t explicitly")
        last = model.scaler.t_max
        times = [last, last + 0.5 * model.scaler.span]
    bounds = tuple(float(v) for v in args.bounds.split(","))
    if len(bounds) != 4:
        raise SystemExit("--bounds needs four comma-separated numbers: x0min,x0max,x1min,x1max")
    for t in times:
        path = experiments.export_decision_boundary(
            model, float(t), out_dir, bounds=bounds, resolution=args.resolution)
        _say(args, f"wrote {path}")
    return 0


def _cmd_export_weights(args) -> int:
    model = load_checkpoint(args.checkpoint)
    path = experiments.export_weight_curves(
        model, args.out or ".", t_min=args.t_min, t_max=args.t_max, points=args.points)
    _say(args, f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="futurefit",
        description="Train prediction models that hold up slightly into the future.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="write a synthetic dataset CSV")
    p.add_argument("--dataset", choices=["moons", "boolean"], help="generator to use")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train one method on one dataset")
    p.add_argument("--method", help="training method (default from config, else gi)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint on a dataset CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset CSV path")
    p.add_argument("--task", choices=["classification", "regression"],
                   default="classification")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("compare", parents=[common], help="train several methods across seeds")
    p.set_defaults(func=_sweep_cmd(experiments.run_comparison))

    p = sub.add_parser("ablate-delta", parents=[common],
                       help="shift-selection strategies for the main method")
    p.set_defaults(func=_sweep_cmd(experiments.run_delta_ablation))

    p = sub.add_parser("ablate-k", parents=[common], help="number of finetuning snapshots")
    p.set_defaults(func=_sweep_cmd(experiments.run_k_ablation))

    p = sub.add_parser("ablate-trelu", parents=[common],
                       help="count of time-thresholded activation layers")
    p.set_defaults(func=_sweep_cmd(experiments.run_trelu_ablation))

    p = sub.add_parser("export-boundary", parents=[common],
                       help="decision-boundary grid of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--t", action="append", type=float,
                   help="raw time to render (repeatable; default: last train time "
                        "and one extrapolated step)")
    p.add_argument("--bounds", default="-3,4,-3,4")
    p.add_argument("--resolution", type=int, default=200)
    p.set_defaults(func=_cmd_export_boundary)

    p = sub.add_parser("export-weights", parents=[common],
                       help="weight-over-time curves of a per-feature checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--t-min", type=float, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--points", type=int, default=121)
    p.set_defaults(func=_cmd_export_weights)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
