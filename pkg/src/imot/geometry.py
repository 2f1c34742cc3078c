"""Quaternion helpers shared by the data generator and the dead-reckoning baselines.

Quaternions are Hamilton convention, scalar first ``(w, x, y, z)``, and encode
the body-to-world rotation: ``v_world = R(q) @ v_body``.
"""

from __future__ import annotations

import numpy as np


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise ValueError("zero-norm quaternion")
    return q / norm


def quat_to_matrix(q):
    """Rotation matrices for an array of unit quaternions, shape [..., 3, 3]."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def rotate_vectors(q, v):
    """Rotate body-frame vectors into the world frame.

    q: [..., 4] unit quaternions, v: [..., 3].  Shapes broadcast on the
    leading axes.
    """
    m = quat_to_matrix(q)
    return np.einsum("...ij,...j->...i", m, np.asarray(v, dtype=np.float64))


def yaw_from_quat(q):
    """Heading angle (rotation of body x-axis about world z), in radians."""
    m = quat_to_matrix(q)
    return np.arctan2(m[..., 1, 0], m[..., 0, 0])


def yaw_to_quat(psi):
    """Unit quaternion for a pure rotation about the world z-axis."""
    psi = np.asarray(psi, dtype=np.float64)
    half = psi / 2.0
    q = np.zeros(psi.shape + (4,), dtype=np.float64)
    q[..., 0] = np.cos(half)
    q[..., 3] = np.sin(half)
    return q


def check_unit_quaternions(q, tol=1e-6):
    q = np.asarray(q, dtype=np.float64)
    if q.ndim < 1 or q.shape[-1] != 4:
        raise ValueError(f"expected quaternion array [..., 4], got shape {q.shape}")
    norms = np.linalg.norm(q, axis=-1)
    bad = np.abs(norms - 1.0) > tol
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise ValueError(f"quaternion {idx} has norm {norms.flat[idx]:.6f}, expected 1")
    return q
