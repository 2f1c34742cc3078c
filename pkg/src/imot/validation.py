"""Input-validation helpers for the estimator and model entry points."""

from __future__ import annotations

import numpy as np


def check_windows(X, token_len=None, channels=6):
    """Validate a window batch and return it as a float64 array [n, C, T].

    A single window [C, T] is promoted to a batch of one.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"expected windows of shape [n, {channels}, T], got {X.shape}")
    if X.shape[1] != channels:
        raise ValueError(f"expected {channels} channels, got {X.shape[1]}")
    if token_len is not None and X.shape[2] != token_len:
        raise ValueError(f"expected token length {token_len}, got {X.shape[2]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("windows contain non-finite values")
    return X


def check_velocities(y, n=None):
    """Validate velocity targets and return them as float64 [n, 2]."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[None]
    if y.ndim != 2 or y.shape[1] != 2:
        raise ValueError(f"expected targets of shape [n, 2], got {y.shape}")
    if n is not None and y.shape[0] != n:
        raise ValueError(f"got {y.shape[0]} targets for {n} windows")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets contain non-finite values")
    return y


def check_groups(groups, n):
    """Validate per-window group labels (sequence ids) for splitting."""
    groups = np.asarray(groups)
    if groups.ndim != 1 or groups.shape[0] != n:
        raise ValueError(f"groups must be a length-{n} 1-d array, got shape {groups.shape}")
    return groups


def check_fitted(estimator, attr="model_"):
    if not hasattr(estimator, attr):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted; call fit before predict"
        )
