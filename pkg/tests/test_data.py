"""Tests for the synthetic drift generators and the snapshot CSV format."""

import numpy as np
import pytest

from futurefit.data import (
    DataError,
    Snapshot,
    TemporalDataset,
    boolean_feature_probs,
    gen_boolean_drift,
    gen_rotated_moons,
    load_temporal_csv,
    rotate_points,
    save_temporal_csv,
    train_test_split,
)

# ---------------------------------------------------------------------------
# containers and splitting
# ---------------------------------------------------------------------------


def _toy_dataset(n_snaps, n_rows=4, d=2):
    snaps = [
        Snapshot(t=float(i), x=np.full((n_rows, d), float(i)), y=np.zeros(n_rows))
        for i in range(n_snaps)
    ]
    return TemporalDataset(snapshots=snaps, task="classification", name="toy")


def test_snapshot_validation():
    with pytest.raises(DataError):
        Snapshot(t=0.0, x=np.zeros(4), y=np.zeros(4))
    with pytest.raises(DataError):
        Snapshot(t=0.0, x=np.zeros((4, 2)), y=np.zeros(3))
    snap = Snapshot(t=0.0, x=np.zeros((4, 2)), y=np.zeros(4))
    assert snap.n == 4 and snap.d == 2


def test_dataset_sorts_snapshots_and_validates():
    a = Snapshot(t=2.0, x=np.zeros((2, 2)), y=np.array([1.0, 0.0]))
    b = Snapshot(t=0.0, x=np.zeros((2, 2)), y=np.zeros(2))
    ds = TemporalDataset(snapshots=[a, b])
    assert ds.timestamps == [0.0, 2.0]
    assert ds.d == 2
    assert ds.n_classes == 2
    with pytest.raises(DataError):
        TemporalDataset(snapshots=[a], task="bogus")
    with pytest.raises(DataError):
        TemporalDataset(snapshots=[a, Snapshot(t=1.0, x=np.zeros((2, 3)), y=np.zeros(2))])
    assert TemporalDataset(snapshots=[a], task="regression").n_classes == 0


def test_split_holds_out_the_final_snapshots():
    train, val, test = train_test_split(_toy_dataset(10))
    assert [s.t for s in train] == [float(i) for i in range(9)]
    assert val == []
    assert [s.t for s in test] == [9.0]

    train, val, test = train_test_split(_toy_dataset(2))
    assert len(train) == 1 and len(test) == 1

    train, val, test = train_test_split(_toy_dataset(10), n_test=2, n_val=1)
    assert [s.t for s in train] == [float(i) for i in range(7)]
    assert [s.t for s in val] == [7.0]
    assert [s.t for s in test] == [8.0, 9.0]


def test_split_rejects_impossible_requests():
    with pytest.raises(DataError):
        train_test_split(_toy_dataset(1))
    with pytest.raises(DataError):
        train_test_split(_toy_dataset(3), n_test=2, n_val=1)
    with pytest.raises(DataError):
        train_test_split(_toy_dataset(3), n_test=0)


# ---------------------------------------------------------------------------
# rotated two-moons
# ---------------------------------------------------------------------------


def test_rotate_points_quarter_arc_about_origin():
    out = rotate_points(np.array([[1.0, 0.0]]), 18.0, center=(0.0, 0.0))
    rad = np.deg2rad(18.0)
    np.testing.assert_allclose(out, [[np.cos(rad), np.sin(rad)]], atol=1e-12)
    # full turn is the identity
    back = rotate_points(out, 342.0, center=(0.0, 0.0))
    np.testing.assert_allclose(back, [[1.0, 0.0]], atol=1e-12)


def test_moons_shape_balance_and_timestamps():
    ds = gen_rotated_moons()
    assert len(ds.snapshots) == 10
    assert ds.timestamps == [float(i) for i in range(10)]
    for snap in ds.snapshots:
        assert snap.n == 200 and snap.d == 2
        assert snap.y.sum() == 100  # exact class balance
    odd = gen_rotated_moons(n_domains=1, n_per_domain=201)
    assert odd.snapshots[0].y.sum() == 100  # the extra point goes to class 0


def test_noiseless_moons_lie_on_the_two_arcs():
    ds = gen_rotated_moons(n_domains=1, n_per_domain=50, noise=0.0, seed=1)
    snap = ds.snapshots[0]
    upper = snap.x[snap.y == 1]
    lower = snap.x[snap.y == 0]
    np.testing.assert_allclose(np.sum(upper**2, axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(
        (1.0 - lower[:, 0]) ** 2 + (0.5 - lower[:, 1]) ** 2, 1.0, atol=1e-9)
    assert np.all(upper[:, 1] >= -1e-9)


def test_each_domain_is_the_base_cloud_rotated():
    ds = gen_rotated_moons(n_domains=6, n_per_domain=80, step_deg=18.0, seed=5)
    base = ds.snapshots[0]
    center = base.x.mean(axis=0)
    for i, snap in enumerate(ds.snapshots):
        undone = rotate_points(snap.x, -18.0 * i, center)
        np.testing.assert_allclose(undone, base.x, atol=1e-9)
        np.testing.assert_array_equal(snap.y, base.y)


def test_moons_generator_reproducibility():
    a, b = gen_rotated_moons(seed=3), gen_rotated_moons(seed=3)
    for sa, sb in zip(a.snapshots, b.snapshots):
        np.testing.assert_array_equal(sa.x, sb.x)
        np.testing.assert_array_equal(sa.y, sb.y)
    other = gen_rotated_moons(seed=4)
    assert not np.array_equal(a.snapshots[0].x, other.snapshots[0].x)


def test_moons_rejects_degenerate_sizes():
    with pytest.raises(DataError):
        gen_rotated_moons(n_domains=0)
    with pytest.raises(DataError):
        gen_rotated_moons(n_per_domain=1)


# ---------------------------------------------------------------------------
# boolean drift
# ---------------------------------------------------------------------------


def test_agreement_probability_table():
    np.testing.assert_allclose(boolean_feature_probs(5, 0), [0.6, 0.6, 0.99, 0.5, 0.5])
    np.testing.assert_allclose(boolean_feature_probs(5, 1), [0.7, 0.6, 0.5, 0.99, 0.5])
    np.testing.assert_allclose(boolean_feature_probs(5, 2), [0.8, 0.6, 0.5, 0.5, 0.99])
    # at the held-out time every transient has gone quiet
    np.testing.assert_allclose(boolean_feature_probs(5, 3), [0.9, 0.6, 0.5, 0.5, 0.5])
    with pytest.raises(DataError):
        boolean_feature_probs(5, 5)  # drifting feature would pass 1.0


def test_boolean_samples_match_their_agreement_rates():
    n = 100_000
    ds = gen_boolean_drift(n_per_time=n, seed=0)
    for snap in ds.snapshots:
        p = boolean_feature_probs(5, snap.t)
        agree = (snap.x == snap.y[:, None]).mean(axis=0)
        tol = 3.0 * np.sqrt(p * (1.0 - p) / n) + 1e-12
        assert np.all(np.abs(agree - p) <= tol), (snap.t, agree, p)
        assert abs(snap.y.mean() - 0.5) <= 3.0 * np.sqrt(0.25 / n)
        assert set(np.unique(snap.x)) <= {0.0, 1.0}


def test_boolean_defaults_and_reproducibility():
    ds = gen_boolean_drift(seed=2)
    assert ds.timestamps == [0.0, 1.0, 2.0, 3.0]
    assert all(s.n == 100 and s.d == 5 for s in ds.snapshots)
    again = gen_boolean_drift(seed=2)
    for sa, sb in zip(ds.snapshots, again.snapshots):
        np.testing.assert_array_equal(sa.x, sb.x)
    assert not np.array_equal(ds.snapshots[0].x, gen_boolean_drift(seed=3).snapshots[0].x)
    with pytest.raises(DataError):
        gen_boolean_drift(d=1)


# ---------------------------------------------------------------------------
# CSV round trips
# ---------------------------------------------------------------------------


def test_csv_round_trip_is_bit_exact(tmp_path):
    ds = gen_rotated_moons(n_domains=3, n_per_domain=20, seed=7)
    path = tmp_path / "moons.csv"
    save_temporal_csv(ds, path)
    loaded = load_temporal_csv(path, name="moons")
    assert loaded.name == "moons"
    assert loaded.timestamps == ds.timestamps
    for sa, sb in zip(ds.snapshots, loaded.snapshots):
        np.testing.assert_array_equal(sa.x, sb.x)
        np.testing.assert_array_equal(sa.y, sb.y)


def test_loader_bins_distinct_timestamps(tmp_path):
    path = tmp_path / "cont.csv"
    path.write_text("t,x0,y\n0.0,1.0,0\n0.1,2.0,1\n0.9,3.0,0\n1.0,4.0,1\n")
    ds = load_temporal_csv(path, n_bins=2)
    assert ds.timestamps == [0.25, 0.75]
    assert [s.n for s in ds.snapshots] == [2, 2]
    np.testing.assert_array_equal(ds.snapshots[1].x.ravel(), [3.0, 4.0])
    with pytest.raises(DataError):
        load_temporal_csv(path, n_bins=0)


def test_loader_respects_custom_column_names(tmp_path):
    path = tmp_path / "custom.csv"
    path.write_text("when,a,b,target\n0,1.0,2.0,3.5\n1,4.0,5.0,6.5\n")
    ds = load_temporal_csv(path, task="regression", time_col="when", target_col="target")
    assert ds.timestamps == [0.0, 1.0]
    np.testing.assert_array_equal(ds.snapshots[0].x, [[1.0, 2.0]])
    assert ds.snapshots[1].y[0] == 6.5


def test_loader_errors_name_the_offending_row(tmp_path):
    missing = tmp_path / "missing.csv"
    missing.write_text("t,x0\n0,1\n")
    with pytest.raises(DataError, match="'y'"):
        load_temporal_csv(missing)

    bad_cell = tmp_path / "badcell.csv"
    bad_cell.write_text("t,x0,y\n0,1.0,0\n0,abc,1\n")
    with pytest.raises(DataError, match="row 3"):
        load_temporal_csv(bad_cell)

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("t,x0,y\n0,1.0,0\n0,1.0\n")
    with pytest.raises(DataError, match="row 3"):
        load_temporal_csv(ragged)

    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DataError, match="empty"):
        load_temporal_csv(empty)

    header_only = tmp_path / "header.csv"
    header_only.write_text("t,x0,y\n")
    with pytest.raises(DataError, match="no data rows"):
        load_temporal_csv(header_only)

    no_features = tmp_path / "nofeat.csv"
    no_features.write_text("t,y\n0,1\n")
    with pytest.raises(DataError, match="no feature columns"):
        load_temporal_csv(no_features)
