"""Synthetic drift datasets and the snapshot CSV format.

A dataset is a list of labeled snapshots, one per timestamp, sorted by time.
On disk that is a single CSV with header ``t,x0,...,x{d-1},y``; rows sharing
a ``t`` value form one snapshot. Generators are deterministic functions of
their seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class DataError(Exception):
    """Malformed dataset input (bad schema, bad cell, impossible config)."""


@dataclass
class Snapshot:
    """All labeled examples observed at one timestamp."""

    t: float
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.ndim != 2:
            raise DataError(f"snapshot features must be 2-d, got shape {self.x.shape}")
        if self.y.shape != (self.x.shape[0],):
            raise DataError(
                f"snapshot labels shape {self.y.shape} does not match {self.x.shape[0]} rows")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass
class TemporalDataset:
    """Snapshots in time order plus task metadata."""

    snapshots: list = field(default_factory=list)
    task: str = "classification"
    name: str = ""

    def __post_init__(self):
        if self.task not in ("classification", "regression"):
            raise DataError(f"unknown task {self.task!r}")
        self.snapshots = sorted(self.snapshots, key=lambda s: s.t)
        dims = {s.d for s in self.snapshots}
        if len(dims) > 1:
            raise DataError(f"snapshots disagree on feature count: {sorted(dims)}")

    @property
    def timestamps(self) -> list:
        return [s.t for s in self.snapshots]

    @property
    def d(self) -> int:
        return self.snapshots[0].d if self.snapshots else 0

    @property
    def n_classes(self) -> int:
        if self.task != "classification":
            return 0
        labels = np.concatenate([s.y for s in self.snapshots])
        return int(labels.max()) + 1 if labels.size else 0


def train_test_split(dataset: TemporalDataset, n_test: int = 1,
                     n_val: int = 0) -> tuple[list, list, list]:
    """Split snapshots by position: the final ones are held out as test,
    the ones just before those (optionally) as validation."""
    snaps = dataset.snapshots
    if n_test < 1 or n_val < 0 or n_test + n_val >= len(snaps):
        raise DataError(
            f"cannot split {len(snaps)} snapshots into train/{n_val} val/{n_test} test")
    cut_val = len(snaps) - n_test - n_val
    cut_test = len(snaps) - n_test
    return snaps[:cut_val], snaps[cut_val:cut_test], snaps[cut_test:]


def rotate_points(points: np.ndarray, degrees: float, center) -> np.ndarray:
    """Rotate 2-d points counter-clockwise by ``degrees`` about ``center``."""
    rad = np.deg2rad(degrees)
    c, s = np.cos(rad), np.sin(rad)
    rot = np.array([[c, -s], [s, c]])
    center = np.asarray(center, dtype=np.float64)
    return (np.asarray(points, dtype=np.float64) - center) @ rot.T + center


def gen_rotated_moons(n_domains: int = 10, n_per_domain: int = 200, step_deg: float = 18.0,
                      noise: float = 0.1, seed: int = 0) -> TemporalDataset:
    """Two interleaved half-circles rotated a fixed angle per timestamp.

    One cloud of ``n_per_domain`` points is sampled once (half on the upper
    unit arc labeled 1, half on the lower offset arc labeled 0, plus
    isotropic Gaussian noise) and domain i is that same cloud rotated by
    ``step_deg * i`` degrees counter-clockwise about the cloud's centroid.
    Timestamps are 0, 1, ..., n_domains - 1.
    """
    if n_domains < 1 or n_per_domain < 2:
        raise DataError("need at least one domain and two points per domain")
    rng = np.random.default_rng(seed)
    n_upper = n_per_domain // 2
    n_lower = n_per_domain - n_upper
    ang_u = rng.uniform(0.0, np.pi, size=n_upper)
    ang_l = rng.uniform(0.0, np.pi, size=n_lower)
    upper = np.column_stack([np.cos(ang_u), np.sin(ang_u)])
    lower = np.column_stack([1.0 - np.cos(ang_l), 0.5 - np.sin(ang_l)])
    base = np.vstack([upper, lower])
    if noise > 0:
        base = base + rng.normal(0.0, noise, size=base.shape)
    labels = np.concatenate([np.ones(n_upper), np.zeros(n_lower)])
    center = base.mean(axis=0)
    snaps = [
        Snapshot(t=float(i), x=rotate_points(base, step_deg * i, center), y=labels.copy())
        for i in range(n_domains)
    ]
    return TemporalDataset(snapshots=snaps, task="classification", name="moons")


def boolean_feature_probs(d: int, t: float) -> np.ndarray:
    """P(x_j agrees with y) at time t for the boolean drift construction.

    Feature 1 drifts linearly (0.6 + 0.1 t), feature 2 stays at 0.6, and
    every later feature j is a transient that is informative only in the
    single time step t = j - 3 and coin-flip noise otherwise.
    """
    p = np.full(d, 0.5)
    p[0] = 0.6 + 0.1 * t
    if d >= 2:
        p[1] = 0.6
    for j in range(3, d + 1):
        p[j - 1] = 0.5 + (0.49 if t == j - 3 else 0.0)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise DataError(f"agreement probabilities leave [0, 1] at t={t}: {p}")
    return p


def gen_boolean_drift(d: int = 5, n_per_time: int = 100, times=(0, 1, 2, 3),
                      seed: int = 0) -> TemporalDataset:
    """Binary labels with features that agree with the label at drifting rates.

    y is a fair coin; each feature copies y with probability p_j(t) and
    flips it otherwise (see ``boolean_feature_probs``). The default times
    include t = 3, where every transient feature has gone quiet.
    """
    if d < 2:
        raise DataError("the construction needs at least the two persistent features")
    rng = np.random.default_rng(seed)
    snaps = []
    for t in times:
        p = boolean_feature_probs(d, t)
        y = rng.integers(0, 2, size=n_per_time).astype(np.float64)
        agree = rng.uniform(size=(n_per_time, d)) < p[None, :]
        x = np.where(agree, y[:, None], 1.0 - y[:, None])
        snaps.append(Snapshot(t=float(t), x=x, y=y))
    return TemporalDataset(snapshots=snaps, task="classification", name="boolean")


def save_temporal_csv(dataset: TemporalDataset, path) -> None:
    """Write snapshots as ``t,x0,...,x{d-1},y`` rows in time order."""
    d = dataset.d
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{j}" for j in range(d)] + ["y"])
        for snap in dataset.snapshots:
            for i in range(snap.n):
                writer.writerow(
                    [repr(float(snap.t))]
                    + [repr(float(v)) for v in snap.x[i]]
                    + [repr(float(snap.y[i]))])


def load_temporal_csv(path, task: str = "classification", name: str = "",
                      time_col: str = "t", target_col: str = "y",
                      n_bins: int | None = None) -> TemporalDataset:
    """Read a snapshot CSV back into a dataset.

    Rows are grouped by their exact time value, or, with ``n_bins``, bucketed
    into equal-width bins over the observed time range with the bin midpoint
    as the snapshot timestamp (for sources whose raw timestamps are all
    distinct). Errors name the offending row.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if time_col not in header or target_col not in header:
            raise DataError(f"{path}: header must contain {time_col!r} and {target_col!r}, got {header}")
        t_idx = header.index(time_col)
        y_idx = header.index(target_col)
        feat_idx = [i for i in range(len(header)) if i not in (t_idx, y_idx)]
        if not feat_idx:
            raise DataError(f"{path}: no feature columns")
        times, feats, targets = [], [], []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {row_no}: expected {len(header)} cells, got {len(row)}")
            try:
                times.append(float(row[t_idx]))
                targets.append(float(row[y_idx]))
                feats.append([float(row[i]) for i in feat_idx])
            except ValueError as exc:
                raise DataError(f"{path}: row {row_no}: {exc}") from None
    if not times:
        raise DataError(f"{path}: no data rows")
    times_arr = np.asarray(times)
    feats_arr = np.asarray(feats)
    targets_arr = np.asarray(targets)
    if n_bins is not None:
        if n_bins < 1:
            raise DataError("n_bins must be positive")
        lo, hi = times_arr.min(), times_arr.max()
        width = (hi - lo) / n_bins if hi > lo else 1.0
        idx = np.clip(((times_arr - lo) / width).astype(int), 0, n_bins - 1)
        keys = lo + (idx + 0.5) * width
    else:
        keys = times_arr
    snaps = []
    for t in np.unique(keys):
        mask = keys == t
        snaps.append(Snapshot(t=float(t), x=feats_arr[mask], y=targets_arr[mask]))
    return TemporalDataset(snapshots=snaps, task=task, name=name or str(path))
