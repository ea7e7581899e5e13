"""Training procedures and evaluation.

The main recipe follows a two-stage schedule: fit the model on every
training snapshot in time order (pretraining), then finetune on the last k
snapshots with a time-robustness objective, early-stopping each finetune
phase on the following snapshot's plain loss. Reference methods reuse the
same plumbing:

- baseline: one ERM fit on all snapshots pooled and shuffled
- last_domain: ERM on the final training snapshot only
- inc_finetune: ERM on the first snapshot, then sequential per-snapshot
  finetuning at a lower rate
- grad_reg / time_perturb / gi: pretrain + finetune with that objective

Timestamps are affinely normalized so training spans [0, 1]; the fitted
scaler travels with the model so later (extrapolated) timestamps are mapped
consistently at evaluation time.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field

import numpy as np

from futurefit.autodiff import Adam, NumericError, SGD, UsageError
from futurefit.data import Snapshot
from futurefit.losses import DeltaState, LossSpec, objective
from futurefit.nets import TimeScaler, save_checkpoint

METHODS = ("baseline", "last_domain", "inc_finetune", "grad_reg", "time_perturb", "gi")

_METHOD_LOSS_KIND = {
    "baseline": "erm",
    "last_domain": "erm",
    "inc_finetune": "erm",
    "grad_reg": "grad_reg",
    "time_perturb": "time_perturb",
    "gi": "gi",
}


@dataclass
class TrainConfig:
    """Knobs for one training run. Epoch counts are exact, not maxima."""

    method: str = "gi"
    loss: LossSpec = field(default_factory=LossSpec)
    pretrain_epochs: int = 30
    pretrain_lr: float = 5e-3
    finetune_epochs: int = 25
    finetune_lr: float = 5e-4
    finetune_snapshots: int = 2
    batch_size: int = 32
    optimizer: str = "adam"
    early_stop: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.optimizer not in ("adam", "sgd"):
            raise UsageError(f"unknown optimizer {self.optimizer!r}")
        self.loss = dataclasses.replace(self.loss, kind=_METHOD_LOSS_KIND[self.method])

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["loss"] = self.loss.to_dict()
        return d


@dataclass
class TrainReport:
    """What a training run did, in JSON-friendly form."""

    method: str
    config: dict
    pretrain_losses: list = field(default_factory=list)
    finetune_phases: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    checkpoint_path: str | None = None
    delta_trace_path: str | None = None
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "TrainReport":
        with open(path) as fh:
            return cls(**json.load(fh))


def _make_optimizer(cfg: TrainConfig, params, lr: float):
    return Adam(params, lr) if cfg.optimizer == "adam" else SGD(params, lr)


def _shuffled_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    size = n if batch_size <= 0 else min(batch_size, n)
    for start in range(0, n, size):
        yield order[start:start + size]


def _train_batch(model, opt, x, y, t, spec, state, delta_rng, epoch, batch_idx) -> float:
    opt.zero_grad()
    try:
        loss, info = objective(model, x, y, t, spec, state, delta_rng)
        loss.backward()
    except NumericError as exc:
        raise NumericError(
            "train", f"diverged at epoch {epoch}, batch {batch_idx}: {exc}") from exc
    opt.step()
    if info is not None:
        state.record(epoch, batch_idx, **info)
    return loss.item()


def _run_epoch(model, opt, batch_size, snapshots, spec, state, shuffle_rng, delta_rng,
               epoch) -> float:
    """One pass over the given snapshots in time order; returns mean batch loss."""
    total, count = 0.0, 0
    batch_idx = 0
    for snap in snapshots:
        for idx in _shuffled_batches(snap.n, batch_size, shuffle_rng):
            total += _train_batch(model, opt, snap.x[idx], snap.y[idx], snap.t,
                                  spec, state, delta_rng, epoch, batch_idx)
            count += 1
            batch_idx += 1
    return total / max(count, 1)


def _pooled_epoch(model, opt, batch_size, snapshots, spec, state, shuffle_rng, delta_rng,
                  epoch) -> float:
    """One pass over all snapshots pooled and shuffled together."""
    x = np.concatenate([s.x for s in snapshots])
    y = np.concatenate([s.y for s in snapshots])
    t = np.concatenate([np.full(s.n, s.t) for s in snapshots])
    total, count = 0.0, 0
    for batch_idx, idx in enumerate(_shuffled_batches(x.shape[0], batch_size, shuffle_rng)):
        total += _train_batch(model, opt, x[idx], y[idx], t[idx],
                              spec, state, delta_rng, epoch, batch_idx)
        count += 1
    return total / max(count, 1)


def _erm_spec(cfg: TrainConfig) -> LossSpec:
    return dataclasses.replace(cfg.loss, kind="erm", lam=0.0)


def _eval_loss(model, snap: Snapshot, base: str) -> float:
    from futurefit.losses import base_loss
    pred = model.forward(snap.x, snap.t).primal
    return base_loss(pred, snap.y, base).item()


def pretrain(model, snapshots, cfg: TrainConfig, shuffle_rng, delta_rng) -> list:
    """ERM over every snapshot, earliest first, for pretrain_epochs."""
    opt = _make_optimizer(cfg, model.params, cfg.pretrain_lr)
    spec = _erm_spec(cfg)
    state = DeltaState()
    return [
        _run_epoch(model, opt, cfg.batch_size, snapshots, spec, state, shuffle_rng,
                   delta_rng, epoch)
        for epoch in range(cfg.pretrain_epochs)
    ]


def finetune(model, snapshots, cfg: TrainConfig, shuffle_rng, delta_rng,
             state: DeltaState) -> list:
    """Joint finetune over the last k snapshots with the configured objective.

    Every epoch sweeps the k snapshots in time order, solving for a fresh
    shift per minibatch, so the extrapolation terms of all k snapshots
    shape the model together instead of the last snapshot overwriting the
    earlier ones. Validation follows the next-domain rule: after each
    epoch the base loss is measured on the successor of every finetuned
    snapshot (the final snapshot, whose successor is the deployment
    target, falls back to itself — i.e. tuning on the last train
    snapshot). With early stopping the best-validated epoch's parameters
    are restored; epoch 0 (the incoming parameters) participates, so a
    finetune that only hurts is fully undone.
    """
    k = cfg.finetune_snapshots
    if k < 1:
        return []
    if k > len(snapshots):
        raise UsageError(
            f"cannot finetune on the last {k} snapshots; only {len(snapshots)} available")
    n = len(snapshots)
    tail = snapshots[-k:]
    val_idx = sorted({min(n - k + pos + 1, n - 1) for pos in range(k)})
    val_snaps = [snapshots[i] for i in val_idx]

    def val_loss() -> float:
        total = sum(_eval_loss(model, s, cfg.loss.base) * s.n for s in val_snaps)
        return total / sum(s.n for s in val_snaps)

    opt = _make_optimizer(cfg, model.params, cfg.finetune_lr)
    val_losses = [val_loss()]
    train_losses = []
    best_val, best_state, best_epoch = val_losses[0], model.params.state_dict(), 0
    for epoch in range(1, cfg.finetune_epochs + 1):
        train_losses.append(
            _run_epoch(model, opt, cfg.batch_size, tail, cfg.loss, state,
                       shuffle_rng, delta_rng, epoch))
        val = val_loss()
        val_losses.append(val)
        if val < best_val:
            best_val, best_state, best_epoch = val, model.params.state_dict(), epoch
    if cfg.early_stop:
        model.params.load_state_dict(best_state)
    return [{
        "snapshots": [float(s.t) for s in tail],
        "val_snapshots": [float(s.t) for s in val_snaps],
        "train_losses": train_losses,
        "val_losses": val_losses,
        "chosen_epoch": best_epoch if cfg.early_stop else cfg.finetune_epochs,
    }]


def train(model, train_snapshots, cfg: TrainConfig, out_dir=None) -> TrainReport:
    """Run the configured method on the given snapshots (raw timestamps).

    Fits the time scaler, trains, optionally writes the checkpoint, shift
    trace, and report into ``out_dir``, and returns the report.
    """
    t0 = time.perf_counter()
    if not train_snapshots:
        raise UsageError("no training snapshots")
    seq = np.random.SeedSequence(cfg.seed)
    shuffle_rng, delta_rng = (np.random.default_rng(s) for s in seq.spawn(2))
    scaler = TimeScaler.fit([s.t for s in train_snapshots])
    model.scaler = scaler
    snaps = [Snapshot(t=float(scaler.transform(s.t)), x=s.x, y=s.y) for s in train_snapshots]
    state = DeltaState()
    report = TrainReport(method=cfg.method, config=cfg.to_dict())

    if cfg.method == "baseline":
        opt = _make_optimizer(cfg, model.params, cfg.pretrain_lr)
        spec = _erm_spec(cfg)
        report.pretrain_losses = [
            _pooled_epoch(model, opt, cfg.batch_size, snaps, spec, state, shuffle_rng,
                          delta_rng, e)
            for e in range(cfg.pretrain_epochs)
        ]
    elif cfg.method == "last_domain":
        opt = _make_optimizer(cfg, model.params, cfg.pretrain_lr)
        spec = _erm_spec(cfg)
        report.pretrain_losses = [
            _run_epoch(model, opt, cfg.batch_size, snaps[-1:], spec, state, shuffle_rng,
                       delta_rng, e)
            for e in range(cfg.pretrain_epochs)
        ]
    elif cfg.method == "inc_finetune":
        opt = _make_optimizer(cfg, model.params, cfg.pretrain_lr)
        spec = _erm_spec(cfg)
        report.pretrain_losses = [
            _run_epoch(model, opt, cfg.batch_size, snaps[:1], spec, state, shuffle_rng,
                       delta_rng, e)
            for e in range(cfg.pretrain_epochs)
        ]
        for snap in snaps[1:]:
            opt = _make_optimizer(cfg, model.params, cfg.finetune_lr)
            losses = [
                _run_epoch(model, opt, cfg.batch_size, [snap], spec, state, shuffle_rng,
                           delta_rng, e)
                for e in range(cfg.finetune_epochs)
            ]
            report.finetune_phases.append({
                "snapshot_t": float(snap.t), "train_losses": losses,
                "val_losses": [], "chosen_epoch": cfg.finetune_epochs,
            })
    else:  # gi, grad_reg, time_perturb
        report.pretrain_losses = pretrain(model, snaps, cfg, shuffle_rng, delta_rng)
        report.finetune_phases = finetune(model, snaps, cfg, shuffle_rng, delta_rng, state)

    report.wall_time_s = time.perf_counter() - t0
    if out_dir is not None:
        import os
        os.makedirs(out_dir, exist_ok=True)
        report.checkpoint_path = save_checkpoint(
            model, os.path.join(out_dir, "model.npz"), extra={"method": cfg.method})
        if state.history:
            trace = os.path.join(out_dir, "delta_trace.csv")
            state.export_csv(trace)
            report.delta_trace_path = trace
        report.save(os.path.join(out_dir, "report.json"))
    return report


def evaluate(model, snapshot: Snapshot, task: str = "classification") -> dict:
    """Score a model on one raw-timestamp snapshot.

    Classification reports error/accuracy in percent (binary models output
    one logit, multi-class one per class); regression reports MAE.
    """
    t = float(model.scaler.transform(snapshot.t)) if model.scaler is not None else snapshot.t
    logits = model.forward(snapshot.x, t).primal.data
    if task == "classification":
        pred = (logits >= 0.0).astype(np.float64) if logits.ndim == 1 \
            else np.argmax(logits, axis=1).astype(np.float64)
        err = 100.0 * float(np.mean(pred != snapshot.y))
        return {"error_pct": err, "accuracy_pct": 100.0 - err, "n": snapshot.n}
    mae = float(np.mean(np.abs(logits.reshape(snapshot.y.shape) - snapshot.y)))
    return {"mae": mae, "n": snapshot.n}


def time_invariant_diagnostic(train_snapshots, test_snapshot, d: int,
                              cfg: TrainConfig | None = None, seed: int = 0) -> dict:
    """Fit the per-feature model with its time input zeroed and score it.

    The weights then cannot move with t, so the result shows how much of
    the task survives a time-invariant representation: near chance means
    drift carries essentially all the signal, well above chance means a
    static predictor keeps real signal.
    """
    from futurefit.nets import PerFeatureTimeModel
    if cfg is None:
        cfg = TrainConfig(method="baseline", seed=seed,
                          loss=LossSpec(kind="erm", base="cross_entropy"))
    else:
        cfg = dataclasses.replace(cfg, method="baseline")
    model = PerFeatureTimeModel(d=d, seed=seed, zero_time=True)
    report = train(model, train_snapshots, cfg)
    metrics = evaluate(model, test_snapshot)
    report.metrics = {"test": metrics}
    return {"model": model, "report": report, "test_accuracy_pct": metrics["accuracy_pct"]}
