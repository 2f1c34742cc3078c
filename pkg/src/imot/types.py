"""Core value types passed between the data, model, and evaluation layers.

All arrays are float64 numpy.  Invariants are enforced at construction so a
malformed object cannot travel far from its origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import check_unit_quaternions

GRAVITY = np.array([0.0, 0.0, 9.81])


def _as_float_array(x, name, shape=None):
    arr = np.asarray(x, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass
class ImuWindow:
    """One second of IMU samples: a [3, T] accelerometer block and a [3, T]
    gyroscope block, with the window start time and the sample spacing.

    orientation, when present, holds per-sample unit quaternions [T, 4]
    (scalar-first, body to world).
    """

    accel: np.ndarray
    gyro: np.ndarray
    dt: float
    t0: float = 0.0
    orientation: Optional[np.ndarray] = None

    def __post_init__(self):
        self.accel = np.asarray(self.accel, dtype=np.float64)
        if self.accel.ndim != 2 or self.accel.shape[0] != 3:
            raise ValueError(f"accel must have shape [3, T], got {self.accel.shape}")
        T = self.accel.shape[1]
        self.gyro = _as_float_array(self.gyro, "gyro", (3, T))
        self.accel = _as_float_array(self.accel, "accel", (3, T))
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if abs(T * self.dt - 1.0) > 1e-9:
            raise ValueError(f"window span must be 1 s: T={T}, dt={self.dt} gives {T * self.dt}")
        if self.orientation is not None:
            self.orientation = _as_float_array(self.orientation, "orientation", (T, 4))
            check_unit_quaternions(self.orientation)

    @property
    def token_len(self) -> int:
        return self.accel.shape[1]

    def stacked(self) -> np.ndarray:
        """The [6, T] channel stack (accelerometer rows first)."""
        return np.vstack([self.accel, self.gyro])


@dataclass
class VariateTokens:
    """Per-channel token block for one window batch entry.

    base holds one row per channel, [2D, T].  After decomposition, seasonal
    and trend hold the same layout and base == seasonal + trend.  augmented
    is the [6D, T] concatenation (accel base/seasonal/trend, then gyro
    base/seasonal/trend).
    """

    base: np.ndarray
    seasonal: Optional[np.ndarray] = None
    trend: Optional[np.ndarray] = None
    augmented: Optional[np.ndarray] = None
    pos_embed: Optional[np.ndarray] = None

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=np.float64)
        if self.base.ndim != 2 or self.base.shape[0] % 2 != 0:
            raise ValueError(f"base must have shape [2D, T] with even 2D, got {self.base.shape}")
        _as_float_array(self.base, "base")
        shape = self.base.shape
        if self.seasonal is not None:
            self.seasonal = _as_float_array(self.seasonal, "seasonal", shape)
        if self.trend is not None:
            self.trend = _as_float_array(self.trend, "trend", shape)
        if self.seasonal is not None and self.trend is not None:
            if not np.allclose(self.base, self.seasonal + self.trend, atol=1e-9):
                raise ValueError("seasonal + trend must reconstruct base")
        if self.augmented is not None:
            self.augmented = _as_float_array(
                self.augmented, "augmented", (3 * shape[0], shape[1])
            )
        if self.pos_embed is not None and self.augmented is not None:
            self.pos_embed = _as_float_array(self.pos_embed, "pos_embed", self.augmented.shape)


@dataclass
class ParticleSet:
    """Decoder state: P velocity hypotheses with their content features."""

    velocities: np.ndarray          # [P, 2]
    content: np.ndarray             # [P, T]
    scores: Optional[np.ndarray] = None

    def __post_init__(self):
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.velocities.ndim != 2 or self.velocities.shape[1] != 2:
            raise ValueError(f"velocities must have shape [P, 2], got {self.velocities.shape}")
        _as_float_array(self.velocities, "velocities")
        P = self.velocities.shape[0]
        self.content = np.asarray(self.content, dtype=np.float64)
        if self.content.ndim != 2 or self.content.shape[0] != P:
            raise ValueError(f"content must have shape [P, T], got {self.content.shape}")
        _as_float_array(self.content, "content")
        if self.scores is not None:
            self.scores = _as_float_array(self.scores, "scores")


@dataclass
class Trajectory:
    """A planar track: strictly increasing timestamps and [n, 2] positions."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.times.ndim != 1 or self.times.size < 1:
            raise ValueError(f"times must be a non-empty 1-d array, got shape {self.times.shape}")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        self.positions = _as_float_array(
            self.positions, "positions", (self.times.size, 2)
        )
        _as_float_array(self.times, "times")

    def __len__(self):
        return self.times.size

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def path_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.positions, axis=0), axis=1)))

    def resampled(self, times) -> "Trajectory":
        """Linear interpolation onto new timestamps (clamped at the ends)."""
        times = np.asarray(times, dtype=np.float64)
        x = np.interp(times, self.times, self.positions[:, 0])
        y = np.interp(times, self.times, self.positions[:, 1])
        return Trajectory(times, np.stack([x, y], axis=1))

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,x,y\n")
            for t, (x, y) in zip(self.times, self.positions):
                fh.write(f"{t:.9g},{x:.9g},{y:.9g}\n")

    @classmethod
    def load_csv(cls, path) -> "Trajectory":
        data = np.genfromtxt(path, delimiter=",", skip_header=1, dtype=np.float64)
        data = np.atleast_2d(data)
        if data.shape[1] != 3:
            raise ValueError(f"trajectory CSV must have columns t,x,y, got {data.shape[1]} columns")
        return cls(data[:, 0], data[:, 1:3])
