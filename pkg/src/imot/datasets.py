"""Synthetic IMU sequences with exact ground truth, plus the on-disk format.

Trajectories come from closed-form speed and heading profiles, so world-frame
acceleration is analytic and the body-frame channels follow by rotating
through the (yaw-only) orientation and adding gravity.  Every profile starts
from rest through a short cosine ramp so that dead reckoning from rest is
consistent with the ground truth.  Noise and bias are applied to the sensor
channels only; ground truth stays clean.

On disk a dataset is one directory per sequence holding imu.csv
("t,ax,ay,az,gx,gy,gz"), ori.csv ("t,qw,qx,qy,qz"), gt.csv ("t,x,y") and a
manifest.json, plus a root manifest listing the sequences, the sample rate,
and (once a model has been trained on it) the normalization statistics.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import check_unit_quaternions, yaw_to_quat
from .types import Trajectory

FORMAT_VERSION = 1
SUPPORTED_RATES = (100, 200)
PROFILE_KINDS = ("straight", "arc", "u_turn", "stop_go", "figure_eight", "random_walk")

START_RAMP_S = 0.5       # rest-to-cruise ramp at the start of every profile
GAIT_BOUNCE = 2.0        # vertical bounce amplitude at nominal speed, m/s^2
GRAVITY_Z = 9.81


class DatasetError(ValueError):
    """Malformed dataset file or directory."""


@dataclass(frozen=True)
class NoiseSpec:
    accel_sigma: float = 0.0     # white noise, m/s^2
    gyro_sigma: float = 0.0      # white noise, rad/s
    accel_bias: float = 0.0      # per-sequence constant bias scale, m/s^2
    gyro_bias: float = 0.0       # rad/s

    def __post_init__(self):
        for name in ("accel_sigma", "gyro_sigma", "accel_bias", "gyro_bias"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class MotionProfile:
    kind: str
    duration: float = 60.0       # s
    speed: float = 1.0           # m/s nominal
    turn_rate: float = 0.5       # rad/s
    gait_freq: float = 2.0       # Hz; 0 disables the vertical bounce
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}; expected one of {PROFILE_KINDS}")
        if self.duration <= 0:
            raise ValueError(f"duration must be > 0, got {self.duration}")
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        if self.turn_rate < 0:
            raise ValueError(f"turn_rate must be >= 0, got {self.turn_rate}")
        if self.gait_freq < 0:
            raise ValueError(f"gait_freq must be >= 0, got {self.gait_freq}")
        if self.kind in ("arc", "u_turn", "figure_eight") and self.turn_rate == 0:
            raise ValueError(f"{self.kind} profile requires turn_rate > 0")

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "MotionProfile":
        doc = dict(doc)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"unknown profile keys: {', '.join(unknown)}")
        noise = doc.pop("noise", None)
        if noise is not None:
            if not isinstance(noise, dict):
                raise ValueError("profile noise must be an object")
            noise_known = {f.name for f in dataclasses.fields(NoiseSpec)}
            bad = sorted(set(noise) - noise_known)
            if bad:
                raise ValueError(f"unknown noise keys: {', '.join(bad)}")
            doc["noise"] = NoiseSpec(**noise)
        return cls(**doc)


@dataclass
class ImuSequence:
    """One recording: body-frame channels, orientation, and ground truth."""

    seq_id: str
    times: np.ndarray        # [L]
    accel: np.ndarray        # [L, 3] body frame, includes gravity
    gyro: np.ndarray         # [L, 3] body frame
    orientation: np.ndarray  # [L, 4] unit quaternions, body to world
    positions: np.ndarray    # [L, 2] ground-truth planar positions
    rate: float
    profile: Optional[MotionProfile] = None

    def __len__(self):
        return self.times.size

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def ground_truth(self) -> Trajectory:
        return Trajectory(self.times, self.positions)


# --------------------------------------------------------------------------
# Closed-form kinematics


def _ramp(t, width):
    t = np.asarray(t, dtype=np.float64)
    x = np.clip(t / width, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * x))


def _dramp(t, width):
    t = np.asarray(t, dtype=np.float64)
    inside = (t > 0) & (t < width)
    return np.where(inside, 0.5 * np.pi / width * np.sin(np.pi * t / width), 0.0)


def _kinematics(profile: MotionProfile, rng: np.random.Generator):
    """Return vectorized closures (speed, dspeed, heading, dheading) of time."""
    s0 = profile.speed
    w = profile.turn_rate
    dur = profile.duration
    ramp = min(START_RAMP_S, 0.5 * dur)

    def base_speed(t):
        return s0 * _ramp(t, ramp)

    def base_dspeed(t):
        return s0 * _dramp(t, ramp)

    if profile.kind == "straight":
        return (base_speed, base_dspeed,
                lambda t: np.zeros_like(np.asarray(t, dtype=np.float64)),
                lambda t: np.zeros_like(np.asarray(t, dtype=np.float64)))

    if profile.kind == "arc":
        return (base_speed, base_dspeed,
                lambda t: w * np.asarray(t, dtype=np.float64),
                lambda t: np.full_like(np.asarray(t, dtype=np.float64), w))

    if profile.kind == "u_turn":
        turn_span = min(np.pi / w, 0.5 * dur)
        rate = np.pi / turn_span
        start = 0.5 * (dur - turn_span)

        def heading(t):
            t = np.asarray(t, dtype=np.float64)
            return np.clip((t - start) * rate, 0.0, np.pi)

        def dheading(t):
            t = np.asarray(t, dtype=np.float64)
            return np.where((t >= start) & (t < start + turn_span), rate, 0.0)

        return base_speed, base_dspeed, heading, dheading

    if profile.kind == "stop_go":
        go, stop, edge = 3.0, 2.0, 0.4
        cycle = go + stop

        def gate(t):
            tau = np.asarray(t, dtype=np.float64) % cycle
            return _ramp(tau, edge) * _ramp(go - tau, edge)

        def dgate(t):
            tau = np.asarray(t, dtype=np.float64) % cycle
            return (_dramp(tau, edge) * _ramp(go - tau, edge)
                    - _ramp(tau, edge) * _dramp(go - tau, edge))

        def speed(t):
            return base_speed(t) * gate(t)

        def dspeed(t):
            return base_dspeed(t) * gate(t) + base_speed(t) * dgate(t)

        zero = lambda t: np.zeros_like(np.asarray(t, dtype=np.float64))
        return speed, dspeed, zero, zero

    if profile.kind == "figure_eight":
        period = 0.5 * dur
        amp = w * period / (2.0 * np.pi)

        def heading(t):
            return amp * np.sin(2.0 * np.pi * np.asarray(t, dtype=np.float64) / period)

        def dheading(t):
            return w * np.cos(2.0 * np.pi * np.asarray(t, dtype=np.float64) / period)

        return base_speed, base_dspeed, heading, dheading

    # random_walk: a seeded sum of low-frequency heading oscillations with a
    # mild speed modulation; everything stays analytic.
    amps = w * rng.uniform(0.4, 1.0, size=4)
    freqs = rng.uniform(0.05, 0.25, size=4)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=4)
    mod_freq = rng.uniform(0.05, 0.15)
    mod_phase = rng.uniform(0.0, 2.0 * np.pi)
    mod_depth = 0.25

    def heading(t):
        t = np.asarray(t, dtype=np.float64)[..., None]
        return np.sum(amps * np.sin(2.0 * np.pi * freqs * t + phases), axis=-1)

    def dheading(t):
        t = np.asarray(t, dtype=np.float64)[..., None]
        return np.sum(amps * 2.0 * np.pi * freqs * np.cos(2.0 * np.pi * freqs * t + phases), axis=-1)

    def speed(t):
        t = np.asarray(t, dtype=np.float64)
        mod = 1.0 - mod_depth + mod_depth * np.sin(2.0 * np.pi * mod_freq * t + mod_phase)
        return base_speed(t) * mod

    def dspeed(t):
        t = np.asarray(t, dtype=np.float64)
        mod = 1.0 - mod_depth + mod_depth * np.sin(2.0 * np.pi * mod_freq * t + mod_phase)
        dmod = mod_depth * 2.0 * np.pi * mod_freq * np.cos(2.0 * np.pi * mod_freq * t + mod_phase)
        return base_dspeed(t) * mod + base_speed(t) * dmod

    return speed, dspeed, heading, dheading


def _integrate_positions(velocity: Callable, times: np.ndarray) -> np.ndarray:
    """Per-step Simpson integration of an analytic velocity function."""
    lo, hi = times[:-1], times[1:]
    mid = 0.5 * (lo + hi)
    inc = (hi - lo)[:, None] / 6.0 * (velocity(lo) + 4.0 * velocity(mid) + velocity(hi))
    out = np.zeros((times.size, 2), dtype=np.float64)
    np.cumsum(inc, axis=0, out=out[1:])
    return out


def generate_sequence(profile: MotionProfile, rate: float, rng: np.random.Generator,
                      seq_id: str = "seq") -> ImuSequence:
    """Realize one profile at the given sample rate (endpoint included)."""
    samples = int(round(profile.duration * rate)) + 1
    times = np.arange(samples, dtype=np.float64) / rate
    speed, dspeed, heading, dheading = _kinematics(profile, rng)

    def velocity(t):
        psi = heading(t)
        return (speed(t)[..., None] * np.stack([np.cos(psi), np.sin(psi)], axis=-1))

    positions = _integrate_positions(velocity, times)

    s, ds = speed(times), dspeed(times)
    psi, dpsi = heading(times), dheading(times)
    cos_p, sin_p = np.cos(psi), np.sin(psi)
    acc_wx = ds * cos_p - s * dpsi * sin_p
    acc_wy = ds * sin_p + s * dpsi * cos_p

    if profile.gait_freq > 0 and profile.speed > 0:
        bounce = GAIT_BOUNCE * (s / profile.speed) * np.sin(2.0 * np.pi * profile.gait_freq * times)
    else:
        bounce = np.zeros_like(times)

    # Yaw-only rotation into the body frame; the z row is untouched.
    accel = np.stack([
        cos_p * acc_wx + sin_p * acc_wy,
        -sin_p * acc_wx + cos_p * acc_wy,
        GRAVITY_Z + bounce,
    ], axis=1)
    gyro = np.stack([np.zeros_like(dpsi), np.zeros_like(dpsi), dpsi], axis=1)
    orientation = yaw_to_quat(psi)

    noise = profile.noise
    if noise.accel_bias > 0:
        accel = accel + rng.normal(0.0, noise.accel_bias, size=3)
    if noise.gyro_bias > 0:
        gyro = gyro + rng.normal(0.0, noise.gyro_bias, size=3)
    if noise.accel_sigma > 0:
        accel = accel + rng.normal(0.0, noise.accel_sigma, size=accel.shape)
    if noise.gyro_sigma > 0:
        gyro = gyro + rng.normal(0.0, noise.gyro_sigma, size=gyro.shape)

    return ImuSequence(seq_id, times, accel, gyro, orientation, positions,
                       rate=float(rate), profile=profile)


def generate_dataset(profiles, rate, seed, out_dir=None):
    """Generate one sequence per profile; optionally persist to out_dir."""
    if int(rate) not in SUPPORTED_RATES:
        raise DatasetError(f"unsupported sample rate {rate}; expected one of {SUPPORTED_RATES}")
    sequences = []
    for index, profile in enumerate(profiles):
        rng = np.random.default_rng([seed, index])
        seq_id = f"{index:03d}_{profile.kind}"
        sequences.append(generate_sequence(profile, rate, rng, seq_id))
    if out_dir is not None:
        save_dataset(sequences, float(rate), out_dir)
    return sequences


# --------------------------------------------------------------------------
# On-disk format

_IMU_HEADER = "t,ax,ay,az,gx,gy,gz"
_ORI_HEADER = "t,qw,qx,qy,qz"
_GT_HEADER = "t,x,y"


def _write_csv(path, header, columns):
    rows = np.column_stack(columns)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _read_csv(path, header):
    name = os.path.basename(path)
    ncols = len(header.split(","))
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != header:
            raise DatasetError(f"{name}: malformed header {first!r}, expected {header!r}")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != ncols:
                raise DatasetError(
                    f"{name}: line {lineno}: expected {ncols} columns, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise DatasetError(f"{name}: line {lineno}: {exc}") from exc
    if not rows:
        raise DatasetError(f"{name}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def save_dataset(sequences, rate, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    ids = []
    for seq in sequences:
        ids.append(seq.seq_id)
        seq_dir = os.path.join(out_dir, seq.seq_id)
        os.makedirs(seq_dir, exist_ok=True)
        t = seq.times
        _write_csv(os.path.join(seq_dir, "imu.csv"), _IMU_HEADER,
                   [t] + [seq.accel[:, i] for i in range(3)] + [seq.gyro[:, i] for i in range(3)])
        _write_csv(os.path.join(seq_dir, "ori.csv"), _ORI_HEADER,
                   [t] + [seq.orientation[:, i] for i in range(4)])
        _write_csv(os.path.join(seq_dir, "gt.csv"), _GT_HEADER,
                   [t, seq.positions[:, 0], seq.positions[:, 1]])
        manifest = {
            "format_version": FORMAT_VERSION,
            "id": seq.seq_id,
            "sample_rate": rate,
            "duration": seq.duration,
            "samples": len(seq),
            "profile": seq.profile.to_dict() if seq.profile else None,
        }
        with open(os.path.join(seq_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
    root = {
        "format_version": FORMAT_VERSION,
        "sample_rate": rate,
        "sequences": ids,
        "normalization": None,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(root, fh, indent=2)
        fh.write("\n")


def _load_sequence_dir(seq_dir) -> ImuSequence:
    seq_id = os.path.basename(seq_dir.rstrip("/"))
    imu = _read_csv(os.path.join(seq_dir, "imu.csv"), _IMU_HEADER)
    ori = _read_csv(os.path.join(seq_dir, "ori.csv"), _ORI_HEADER)
    gt = _read_csv(os.path.join(seq_dir, "gt.csv"), _GT_HEADER)
    if not (len(imu) == len(ori) == len(gt)):
        raise DatasetError(
            f"{seq_id}: imu.csv/ori.csv/gt.csv row counts differ "
            f"({len(imu)}/{len(ori)}/{len(gt)})"
        )
    times = imu[:, 0]
    diffs = np.diff(times)
    if np.any(diffs <= 0):
        lineno = int(np.argmax(diffs <= 0)) + 3  # header + 1-based + next row
        raise DatasetError(f"imu.csv: line {lineno}: non-monotone timestamp")
    quats = ori[:, 1:5]
    norms = np.linalg.norm(quats, axis=1)
    bad = np.abs(norms - 1.0) > 1e-3
    if np.any(bad):
        lineno = int(np.argmax(bad)) + 2
        raise DatasetError(
            f"ori.csv: line {lineno}: quaternion norm {norms[np.argmax(bad)]:.6f} is not 1"
        )
    manifest_path = os.path.join(seq_dir, "manifest.json")
    rate, profile = None, None
    if os.path.exists(manifest_path):
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        rate = manifest.get("sample_rate")
        if manifest.get("profile"):
            profile = MotionProfile.from_dict(manifest["profile"])
    if rate is None:
        rate = 1.0 / float(np.median(diffs))
    return ImuSequence(seq_id, times, imu[:, 1:4], imu[:, 4:7],
                       check_unit_quaternions(quats, tol=1e-3), gt[:, 1:3],
                       rate=float(rate), profile=profile)


def load_dataset(path):
    """Load every sequence under a dataset root; returns (sequences, rate)."""
    root_manifest = os.path.join(path, "manifest.json")
    if os.path.exists(root_manifest):
        with open(root_manifest, "r", encoding="utf-8") as fh:
            root = json.load(fh)
        ids = root.get("sequences", [])
        rate = root.get("sample_rate")
    else:
        ids = sorted(
            d for d in os.listdir(path)
            if os.path.isdir(os.path.join(path, d))
            and os.path.exists(os.path.join(path, d, "imu.csv"))
        )
        rate = None
    if not ids and not os.path.exists(root_manifest):
        raise DatasetError(f"no sequences found under {path}")
    sequences = []
    for seq_id in ids:
        seq_dir = os.path.join(path, seq_id)
        if not os.path.isdir(seq_dir):
            raise DatasetError(f"manifest lists missing sequence {seq_id!r}")
        seq = _load_sequence_dir(seq_dir)
        if rate is not None and abs(seq.rate - rate) > 1e-9:
            raise DatasetError(
                f"{seq_id}: sample rate {seq.rate} differs from dataset rate {rate}"
            )
        sequences.append(seq)
    if rate is None and sequences:
        rate = sequences[0].rate
    return sequences, (float(rate) if rate is not None else None)


def read_normalization(dataset_dir):
    """Normalization stats from the root manifest, or None."""
    with open(os.path.join(dataset_dir, "manifest.json"), "r", encoding="utf-8") as fh:
        root = json.load(fh)
    block = root.get("normalization")
    if block is None:
        return None
    return np.asarray(block["mean"], dtype=np.float64), np.asarray(block["std"], dtype=np.float64)


def write_normalization(dataset_dir, mean, std) -> None:
    """Record train-split channel statistics in the root manifest."""
    path = os.path.join(dataset_dir, "manifest.json")
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8") as fh:
            root = json.load(fh)
    else:
        ids = sorted(
            d for d in os.listdir(dataset_dir)
            if os.path.isdir(os.path.join(dataset_dir, d))
            and os.path.exists(os.path.join(dataset_dir, d, "imu.csv"))
        )
        root = {"format_version": FORMAT_VERSION, "sample_rate": None, "sequences": ids}
    root["normalization"] = {
        "mean": [float(v) for v in np.asarray(mean).ravel()],
        "std": [float(v) for v in np.asarray(std).ravel()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(root, fh, indent=2)
        fh.write("\n")


# --------------------------------------------------------------------------
# Windowing

def world_frame_channels(seq: ImuSequence) -> np.ndarray:
    """Rotate body channels into the world frame: the [L, 6] model input.

    This is the single place where the orientation touches the inputs; the
    targets live in the same gravity-aligned world frame.
    """
    from .geometry import rotate_vectors

    accel_w = rotate_vectors(seq.orientation, seq.accel)
    gyro_w = rotate_vectors(seq.orientation, seq.gyro)
    return np.concatenate([accel_w, gyro_w], axis=1)


def _position_at(seq: ImuSequence, t):
    """Ground-truth position interpolated at arbitrary times.

    Beyond the final sample the last segment's slope is extended, so a
    window whose 1-second horizon ends a hair past the recording still gets
    a finite target.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.stack([
        np.interp(t, seq.times, seq.positions[:, 0]),
        np.interp(t, seq.times, seq.positions[:, 1]),
    ], axis=1)
    over = t > seq.times[-1]
    if np.any(over):
        slope = (seq.positions[-1] - seq.positions[-2]) / (seq.times[-1] - seq.times[-2])
        out[over] = seq.positions[-1] + np.outer(t[over] - seq.times[-1], slope)
    return out


def window_sequence(seq: ImuSequence, token_len: int, stride: int):
    """Slice one sequence into (X [n, 6, T], v_gt [n, 2], start times [n]).

    Each window spans exactly 1 s, so token_len must equal the sample rate.
    The target is the mean world-frame velocity over the window's horizon:
    position(t0 + 1) - position(t0).  A sequence shorter than one window
    yields empty arrays.
    """
    if token_len != int(round(seq.rate)):
        raise DatasetError(
            f"token length {token_len} does not match sample rate {seq.rate:g} "
            f"(windows must span exactly 1 s)"
        )
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    length = len(seq)
    if length < token_len:
        empty = np.zeros((0, 6, token_len))
        return empty, np.zeros((0, 2)), np.zeros((0,))
    channels = world_frame_channels(seq).T      # [6, L]
    starts = np.arange(0, length - token_len + 1, stride)
    X = np.stack([channels[:, s : s + token_len] for s in starts])
    t0 = seq.times[starts]
    targets = _position_at(seq, t0 + 1.0) - _position_at(seq, t0)
    return X, targets, t0


def window_dataset(sequences, token_len: int, stride: int):
    """Windows across sequences; returns (X, y, groups, t0s)."""
    xs, ys, groups, t0s = [], [], [], []
    for index, seq in enumerate(sequences):
        X, y, t0 = window_sequence(seq, token_len, stride)
        xs.append(X)
        ys.append(y)
        t0s.append(t0)
        groups.append(np.full(len(X), index, dtype=np.int64))
    return (np.concatenate(xs), np.concatenate(ys),
            np.concatenate(groups), np.concatenate(t0s))
