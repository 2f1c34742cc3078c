"""Synthetic IMU generation, the on-disk dataset format, and windowing."""

import json
import math

import numpy as np
import pytest

from imot.datasets import (
    DatasetError,
    MotionProfile,
    NoiseSpec,
    PROFILE_KINDS,
    generate_dataset,
    generate_sequence,
    load_dataset,
    read_normalization,
    save_dataset,
    window_dataset,
    window_sequence,
    world_frame_channels,
    write_normalization,
)
from imot.metrics import ate
from imot.odometry import integrate_velocities, sins_reconstruct

RATE = 100


def make(kind="straight", duration=10.0, rng_seed=0, **kw):
    profile = MotionProfile(kind, duration=duration, **kw)
    return generate_sequence(profile, RATE, np.random.default_rng(rng_seed))


# --- generation -------------------------------------------------------------

def test_sample_count_and_time_grid():
    seq = make(duration=10.0)
    assert len(seq) == 10 * RATE + 1
    assert seq.times[0] == 0.0
    assert seq.times[-1] == pytest.approx(10.0, abs=1e-12)
    assert np.all(np.diff(seq.times) > 0)


def test_straight_endpoint_accounts_for_start_ramp():
    # The half-second cosine ramp from rest costs a quarter of the cruise
    # speed in distance: 10 s at 1 m/s ends at x = 9.75.
    seq = make(duration=10.0, speed=1.0)
    assert seq.positions[0].tolist() == [0.0, 0.0]
    assert abs(seq.positions[-1, 0] - 9.75) < 1e-9
    assert abs(seq.positions[-1, 1]) < 1e-12


def test_straight_sequence_channel_content():
    seq = make(duration=4.0, speed=1.0)
    # Level, heading east: identity orientation, gyro silent.
    np.testing.assert_allclose(seq.orientation, np.tile([1.0, 0, 0, 0], (len(seq), 1)))
    assert np.abs(seq.gyro).max() == 0.0
    # Vertical channel carries gravity plus the gait bounce; at whole seconds
    # the 2 Hz bounce is at a zero crossing.
    idx = 2 * RATE
    assert seq.accel[idx, 2] == pytest.approx(9.81, abs=1e-12)
    assert seq.accel[:, 2].max() <= 9.81 + 2.0 + 1e-9


def test_arc_gyro_is_exactly_turn_rate():
    seq = make("arc", duration=8.0, turn_rate=0.5)
    np.testing.assert_array_equal(seq.gyro[:, 2], np.full(len(seq), 0.5))
    assert np.abs(seq.gyro[:, :2]).max() == 0.0


def test_stop_go_is_still_during_stop_phase():
    # Cycle is 3 s go / 2 s stop; speed is identically zero on [3.4, 4.6].
    seq = make("stop_go", duration=10.0)
    i, j = int(3.5 * RATE), int(4.5 * RATE)
    np.testing.assert_array_equal(seq.positions[i], seq.positions[j])


def test_figure_eight_returns_near_start_heading():
    seq = make("figure_eight", duration=20.0, turn_rate=0.8)
    # Heading is a pure sine: net rotation over each period is zero, so the
    # gyro integral over a period vanishes.
    period = int(10.0 * RATE)
    turned = np.trapezoid(seq.gyro[: period + 1, 2], seq.times[: period + 1])
    assert abs(turned) < 1e-6


def test_noiseless_sins_recovers_every_profile():
    # u_turn has a heading-rate step at the turn boundaries, which costs the
    # trapezoid integrator a few centimetres; the smooth kinds stay tighter.
    for kind in PROFILE_KINDS:
        seq = make(kind, duration=10.0, rng_seed=3, turn_rate=0.5)
        traj = sins_reconstruct(seq.times, seq.accel, seq.orientation)
        err = np.linalg.norm(traj.positions[-1] - seq.positions[-1])
        bound = 5e-2 if kind == "u_turn" else 2e-2
        assert err < bound, f"{kind}: endpoint error {err}"


def test_noise_changes_channels_but_not_ground_truth():
    quiet = make(duration=4.0, rng_seed=7)
    noisy_profile = MotionProfile(
        "straight", duration=4.0,
        noise=NoiseSpec(accel_sigma=0.1, gyro_sigma=0.01, accel_bias=0.05),
    )
    noisy = generate_sequence(noisy_profile, RATE, np.random.default_rng(7))
    np.testing.assert_array_equal(quiet.positions, noisy.positions)
    np.testing.assert_array_equal(quiet.orientation, noisy.orientation)
    assert np.abs(noisy.accel - quiet.accel).max() > 0.01
    assert np.abs(noisy.gyro - quiet.gyro).max() > 0.001


def test_same_seed_is_bit_reproducible():
    profile = MotionProfile(
        "random_walk", duration=6.0, noise=NoiseSpec(accel_sigma=0.2)
    )
    a = generate_sequence(profile, RATE, np.random.default_rng([4, 0]))
    b = generate_sequence(profile, RATE, np.random.default_rng([4, 0]))
    np.testing.assert_array_equal(a.accel, b.accel)
    np.testing.assert_array_equal(a.positions, b.positions)
    c = generate_sequence(profile, RATE, np.random.default_rng([5, 0]))
    assert np.abs(a.positions - c.positions).max() > 0.01


def test_generate_dataset_ids_and_rate_check(tmp_path):
    profiles = [MotionProfile("straight", duration=2.0), MotionProfile("arc", duration=2.0)]
    seqs = generate_dataset(profiles, RATE, seed=1)
    assert [s.seq_id for s in seqs] == ["000_straight", "001_arc"]
    with pytest.raises(DatasetError) as excinfo:
        generate_dataset(profiles, 123, seed=1)
    assert "unsupported sample rate" in str(excinfo.value)


# --- on-disk format ----------------------------------------------------------

def test_save_load_round_trip_is_exact(tmp_path):
    profiles = [
        MotionProfile("straight", duration=2.0,
                      noise=NoiseSpec(accel_sigma=0.05, gyro_sigma=0.01)),
        MotionProfile("u_turn", duration=3.0, turn_rate=0.7),
    ]
    saved = generate_dataset(profiles, RATE, seed=9, out_dir=tmp_path)
    loaded, rate = load_dataset(tmp_path)
    assert rate == RATE
    assert [s.seq_id for s in loaded] == [s.seq_id for s in saved]
    for a, b in zip(saved, loaded):
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.accel, b.accel)
        np.testing.assert_array_equal(a.gyro, b.gyro)
        np.testing.assert_array_equal(a.orientation, b.orientation)
        np.testing.assert_array_equal(a.positions, b.positions)
        assert a.profile == b.profile


def test_saved_files_are_deterministic(tmp_path):
    profiles = [MotionProfile("arc", duration=2.0, noise=NoiseSpec(accel_sigma=0.1))]
    generate_dataset(profiles, RATE, seed=2, out_dir=tmp_path / "a")
    generate_dataset(profiles, RATE, seed=2, out_dir=tmp_path / "b")
    for name in ("manifest.json", "000_arc/imu.csv", "000_arc/ori.csv",
                 "000_arc/gt.csv", "000_arc/manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def corrupt(path, line_index, fn):
    lines = path.read_text().splitlines()
    lines[line_index] = fn(lines[line_index])
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def saved(tmp_path):
    generate_dataset([MotionProfile("straight", duration=1.0)], RATE, seed=0,
                     out_dir=tmp_path)
    return tmp_path


def test_load_rejects_bad_header(saved):
    corrupt(saved / "000_straight" / "imu.csv", 0, lambda l: l.replace("t,", "time,"))
    with pytest.raises(DatasetError) as excinfo:
        load_dataset(saved)
    msg = str(excinfo.value)
    assert "imu.csv" in msg and "header" in msg


def test_load_rejects_short_row_with_line_number(saved):
    # File line 6 (data row 5) loses its last column.
    corrupt(saved / "000_straight" / "imu.csv", 5,
            lambda l: ",".join(l.split(",")[:-1]))
    with pytest.raises(DatasetError) as excinfo:
        load_dataset(saved)
    msg = str(excinfo.value)
    assert "imu.csv" in msg and "line 6" in msg and "columns" in msg


def test_load_rejects_non_numeric_cell(saved):
    corrupt(saved / "000_straight" / "gt.csv", 3,
            lambda l: l.rsplit(",", 1)[0] + ",oops")
    with pytest.raises(DatasetError) as excinfo:
        load_dataset(saved)
    msg = str(excinfo.value)
    assert "gt.csv" in msg and "line 4" in msg


def test_load_rejects_non_monotone_times(saved):
    path = saved / "000_straight" / "imu.csv"
    lines = path.read_text().splitlines()
    earlier_time = lines[3].split(",")[0]
    corrupt(path, 4, lambda l: earlier_time + "," + l.split(",", 1)[1])
    with pytest.raises(DatasetError) as excinfo:
        load_dataset(saved)
    msg = str(excinfo.value)
    assert "imu.csv" in msg and "line 5" in msg and "monotone" in msg


def test_load_rejects_denormalized_quaternion(saved):
    corrupt(saved / "000_straight" / "ori.csv", 7,
            lambda l: l.split(",")[0] + ",2,0,0,0")
    with pytest.raises(DatasetError) as excinfo:
        load_dataset(saved)
    msg = str(excinfo.value)
    assert "ori.csv" in msg and "line 8" in msg and "norm" in msg


def test_load_rejects_row_count_mismatch(saved):
    path = saved / "000_straight" / "gt.csv"
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(DatasetError) as excinfo:
        load_dataset(saved)
    assert "row counts differ" in str(excinfo.value)


def test_load_rejects_manifest_listing_missing_dir(saved):
    manifest = saved / "manifest.json"
    doc = json.loads(manifest.read_text())
    doc["sequences"].append("zzz")
    manifest.write_text(json.dumps(doc))
    with pytest.raises(DatasetError) as excinfo:
        load_dataset(saved)
    assert "zzz" in str(excinfo.value)


def test_load_rejects_rate_disagreement(saved):
    manifest = saved / "manifest.json"
    doc = json.loads(manifest.read_text())
    doc["sample_rate"] = 200
    manifest.write_text(json.dumps(doc))
    with pytest.raises(DatasetError) as excinfo:
        load_dataset(saved)
    assert "differs from dataset rate" in str(excinfo.value)


def test_load_empty_directory_fails(tmp_path):
    with pytest.raises(DatasetError) as excinfo:
        load_dataset(tmp_path)
    assert "no sequences" in str(excinfo.value)


def test_load_explicit_empty_manifest_is_allowed(tmp_path):
    (tmp_path / "manifest.json").write_text(
        json.dumps({"format_version": 1, "sample_rate": 100,
                    "sequences": [], "normalization": None})
    )
    sequences, rate = load_dataset(tmp_path)
    assert sequences == []
    assert rate == 100.0


def test_normalization_round_trip(saved):
    assert read_normalization(saved) is None
    mean, std = np.arange(6.0), np.arange(1.0, 7.0)
    write_normalization(saved, mean, std)
    got_mean, got_std = read_normalization(saved)
    np.testing.assert_array_equal(got_mean, mean)
    np.testing.assert_array_equal(got_std, std)
    # The rest of the manifest survives.
    doc = json.loads((saved / "manifest.json").read_text())
    assert doc["sequences"] == ["000_straight"]
    before = (saved / "manifest.json").read_bytes()
    write_normalization(saved, mean, std)
    assert (saved / "manifest.json").read_bytes() == before


# --- profiles ----------------------------------------------------------------

def test_profile_dict_round_trip():
    profile = MotionProfile("u_turn", duration=12.0, speed=1.3, turn_rate=0.9,
                            noise=NoiseSpec(accel_sigma=0.2, gyro_bias=0.01))
    assert MotionProfile.from_dict(profile.to_dict()) == profile


def test_profile_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError) as excinfo:
        MotionProfile.from_dict({"kind": "straight", "walk_speed": 2.0})
    assert "unknown profile keys: walk_speed" in str(excinfo.value)
    with pytest.raises(ValueError) as excinfo:
        MotionProfile.from_dict({"kind": "straight", "noise": {"sigma": 0.1}})
    assert "unknown noise keys: sigma" in str(excinfo.value)
    with pytest.raises(ValueError) as excinfo:
        MotionProfile.from_dict({"kind": "straight", "noise": 3})
    assert "object" in str(excinfo.value)


def test_profile_validation():
    with pytest.raises(ValueError):
        MotionProfile("moonwalk")
    with pytest.raises(ValueError) as excinfo:
        MotionProfile("arc", turn_rate=0.0)
    assert "turn_rate" in str(excinfo.value)
    with pytest.raises(ValueError):
        MotionProfile("straight", duration=0.0)
    with pytest.raises(ValueError):
        NoiseSpec(accel_sigma=-0.1)


# --- windowing ---------------------------------------------------------------

def test_window_count_matches_formula():
    seq = make(duration=10.0)
    length = len(seq)
    for stride in (7, 25, 100, 1000):
        X, y, t0 = window_sequence(seq, RATE, stride)
        expected = (length - RATE) // stride + 1
        assert X.shape == (expected, 6, RATE)
        assert y.shape == (expected, 2)
        assert t0.shape == (expected,)


def test_window_shorter_than_token_is_empty():
    seq = make(duration=0.5)
    X, y, t0 = window_sequence(seq, RATE, 10)
    assert X.shape == (0, 6, RATE)
    assert y.shape == (0, 2)
    assert t0.shape == (0,)


def test_window_rejects_token_rate_mismatch():
    seq = make(duration=2.0)
    with pytest.raises(DatasetError) as excinfo:
        window_sequence(seq, 200, 10)
    msg = str(excinfo.value)
    assert "200" in msg and "100" in msg


def test_cruise_window_target_is_exact():
    # After the start ramp a straight walk at 1 m/s has mean velocity (1, 0).
    seq = make(duration=5.0, speed=1.0)
    X, y, t0 = window_sequence(seq, RATE, RATE)
    cruise = t0 >= 0.5
    assert cruise.sum() >= 3
    np.testing.assert_allclose(y[cruise], np.tile([1.0, 0.0], (cruise.sum(), 1)),
                               atol=1e-12)


def test_window_inputs_are_world_frame_slices():
    seq = make("arc", duration=3.0, turn_rate=0.6, rng_seed=5)
    X, _, _ = window_sequence(seq, RATE, 50)
    world = world_frame_channels(seq).T
    np.testing.assert_array_equal(X[1], world[:, 50 : 50 + RATE])
    # Yaw-only rotation leaves the vertical accelerometer row unchanged.
    np.testing.assert_allclose(world[2], seq.accel[:, 2], atol=1e-12)


def test_window_dataset_groups_by_sequence():
    seqs = [make(duration=2.0), make("arc", duration=3.0, turn_rate=0.5)]
    X, y, groups, t0s = window_dataset(seqs, RATE, 50)
    n0 = (len(seqs[0]) - RATE) // 50 + 1
    n1 = (len(seqs[1]) - RATE) // 50 + 1
    assert X.shape[0] == n0 + n1
    assert groups.tolist() == [0] * n0 + [1] * n1
    assert t0s.shape == (n0 + n1,)


def test_integrated_targets_track_ground_truth():
    # Chaining the per-second targets telescopes to the exact ground-truth
    # displacement at whole seconds; only inter-node curvature remains.
    seq = make("arc", duration=30.0, turn_rate=0.5)
    _, y, t0 = window_sequence(seq, RATE, RATE)
    traj = integrate_velocities(y, t0=t0[0])
    assert ate(seq.ground_truth(), traj) < 0.05
    node = seq.positions[10 * RATE]
    np.testing.assert_allclose(traj.positions[10], node, atol=1e-9)
