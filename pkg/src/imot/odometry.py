"""Velocity integration and the two classical dead-reckoning baselines.

SINS rotates body accelerations into the world frame with the recorded
orientation, removes gravity, and double-integrates from rest.  PDR counts
steps on the low-passed acceleration magnitude and advances a fixed stride
along the instantaneous heading.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import butter, filtfilt, find_peaks

from .geometry import rotate_vectors, yaw_from_quat
from .types import GRAVITY, Trajectory


def integrate_velocities(velocities, dt=1.0, t0=0.0, origin=(0.0, 0.0)) -> Trajectory:
    """Chain velocity segments of equal duration into a planar track.

    n segment velocities produce n + 1 trajectory points starting at origin.
    """
    velocities = np.asarray(velocities, dtype=np.float64)
    if velocities.ndim != 2 or velocities.shape[1] != 2:
        raise ValueError(f"velocities must have shape [n, 2], got {velocities.shape}")
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    n = velocities.shape[0]
    positions = np.zeros((n + 1, 2), dtype=np.float64)
    positions[0] = origin
    np.cumsum(velocities * dt, axis=0, out=positions[1:])
    positions[1:] += np.asarray(origin, dtype=np.float64)
    times = t0 + dt * np.arange(n + 1, dtype=np.float64)
    return Trajectory(times, positions)


def sins_reconstruct(times, accel_body, orientation, origin=(0.0, 0.0)) -> Trajectory:
    """Strap-down reconstruction: gravity-compensated double integration.

    Starts from rest at the origin; both integrations use the midpoint of
    the two samples bounding each interval.  Only the horizontal components
    are returned.
    """
    times = np.asarray(times, dtype=np.float64)
    accel_world = rotate_vectors(orientation, accel_body) - GRAVITY
    dt = np.diff(times)[:, None]
    velocity = np.zeros((times.size, 3), dtype=np.float64)
    velocity[1:] = np.cumsum(0.5 * (accel_world[:-1] + accel_world[1:]) * dt, axis=0)
    positions = np.zeros((times.size, 3), dtype=np.float64)
    positions[1:] = np.cumsum(0.5 * (velocity[:-1] + velocity[1:]) * dt, axis=0)
    return Trajectory(times, positions[:, :2] + np.asarray(origin, dtype=np.float64))


def detect_steps(times, accel_body, rate, cutoff_hz=4.0, min_gap_s=0.3, prominence=0.5):
    """Indices of gait peaks in the low-passed acceleration magnitude."""
    if cutoff_hz >= rate / 2:
        raise ValueError(
            f"low-pass cutoff {cutoff_hz} Hz must be below the Nyquist rate {rate / 2} Hz"
        )
    magnitude = np.linalg.norm(np.asarray(accel_body, dtype=np.float64), axis=1)
    magnitude = magnitude - magnitude.mean()
    b, a = butter(2, cutoff_hz / (rate / 2.0), btype="low")
    pad = 3 * max(len(a), len(b))
    if magnitude.size > pad:
        magnitude = filtfilt(b, a, magnitude)
    peaks, _ = find_peaks(
        magnitude,
        distance=max(1, int(round(min_gap_s * rate))),
        prominence=prominence,
    )
    return peaks


def pdr_reconstruct(times, accel_body, orientation, rate, stride_m=0.67,
                    cutoff_hz=4.0, min_gap_s=0.3, prominence=0.5,
                    origin=(0.0, 0.0)) -> Trajectory:
    """Step-and-heading reconstruction with a fixed stride length.

    Each detected step advances stride_m along the heading at the step
    instant.  With no detected steps the track is a single point at origin.
    """
    times = np.asarray(times, dtype=np.float64)
    peaks = detect_steps(times, accel_body, rate, cutoff_hz, min_gap_s, prominence)
    yaw = yaw_from_quat(np.asarray(orientation, dtype=np.float64)[peaks])
    deltas = stride_m * np.stack([np.cos(yaw), np.sin(yaw)], axis=1)
    origin = np.asarray(origin, dtype=np.float64)
    if peaks.size == 0:
        return Trajectory(times[:1], origin[None, :])
    positions = np.vstack([origin, origin + np.cumsum(deltas, axis=0)])
    step_times = times[peaks]
    if peaks[0] == 0:
        track_times = np.concatenate([[times[0] - 1.0 / rate], step_times])
    else:
        track_times = np.concatenate([[times[0]], step_times])
    return Trajectory(track_times, positions)
