"""Figure rendering for the experiment artifacts.

Every delimited artifact the runners write has a matching PNG renderer
here. Rendering is headless (Agg) and deliberately plain: these are
working figures for eyeballing a run, not publication output.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def render_results(rows: list, path) -> None:
    """Bar chart of metric_mean with std whiskers, one bar per method."""
    if not rows:
        return
    labels = [r["method"] for r in rows]
    means = [float(r["metric_mean"]) for r in rows]
    errs = [0.0 if r["metric_std"] == "n/a" else float(r["metric_std"]) for r in rows]
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(rows), 3.6))
    ax.bar(range(len(rows)), means, yerr=errs, capsize=4, color="#4878a8")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("test metric")
    ax.set_title(f"dataset: {rows[0]['dataset']}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_weight_curves(grid: np.ndarray, curves: np.ndarray, path) -> None:
    """Per-feature weights against time; w0 is the bias term."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for j in range(curves.shape[1]):
        label = "bias" if j == 0 else f"w{j}"
        ax.plot(grid, curves[:, j], label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("weight")
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_boundary(xs: np.ndarray, ys: np.ndarray, score: np.ndarray, path, t=None) -> None:
    """Filled score field with the zero level set drawn on top."""
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    lim = max(1e-9, float(np.max(np.abs(score))))
    mesh = ax.pcolormesh(xs, ys, score, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="auto")
    ax.contour(xs, ys, score, levels=[0.0], colors="k", linewidths=1.2)
    fig.colorbar(mesh, ax=ax, label="score")
    if t is not None:
        ax.set_title(f"decision boundary at t={t:g}")
    ax.set_xlabel("x0")
    ax.set_ylabel("x1")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_delta_trace(csv_path, path) -> None:
    """Chosen shift per inner solve, in solve order."""
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return
    stars = [float(r["delta_star"]) for r in rows]
    starts = [float(r["delta0"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5.2, 3.2))
    ax.plot(starts, ".", ms=3, alpha=0.5, label="start")
    ax.plot(stars, ".", ms=3, label="accepted")
    ax.set_xlabel("solve")
    ax.set_ylabel("shift")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_loss_curves(report: dict, path) -> None:
    """Pretraining loss and per-phase finetune validation losses."""
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    pre = report.get("pretrain_losses") or []
    if pre:
        ax.plot(range(len(pre)), pre, label="pretrain")
    offset = len(pre)
    for i, phase in enumerate(report.get("finetune_phases") or []):
        vals = phase.get("val_losses") or phase.get("train_losses") or []
        xs = range(offset, offset + len(vals))
        ts = phase.get("snapshots", phase.get("snapshot_t", "?"))
        ax.plot(xs, vals, label=f"phase {i} (t={ts})")
        chosen = phase.get("chosen_epoch")
        if chosen is not None and phase.get("val_losses"):
            ax.axvline(offset + chosen, color="gray", lw=0.8, ls=":")
        offset += len(vals)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_snapshots(dataset, path, max_panels: int = 4) -> None:
    """Scatter a few snapshots of a 2-d classification dataset."""
    snaps = dataset.snapshots
    if not snaps or snaps[0].d != 2:
        return
    take = snaps if len(snaps) <= max_panels else \
        [snaps[int(round(i))] for i in np.linspace(0, len(snaps) - 1, max_panels)]
    fig, axes = plt.subplots(1, len(take), figsize=(3.0 * len(take), 3.0),
                             sharex=True, sharey=True)
    axes = np.atleast_1d(axes)
    for ax, snap in zip(axes, take):
        for cls, color in ((0.0, "#d65f5f"), (1.0, "#4878a8")):
            mask = snap.y == cls
            ax.scatter(snap.x[mask, 0], snap.x[mask, 1], s=6, color=color)
        ax.set_title(f"t={snap.t:g}", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_metrics_over_time(ts: list, values: list, ylabel: str, path) -> None:
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    ax.plot(ts, values, "o-")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
