"""Scikit-learn estimator facade over the window-to-velocity model.

X is a batch of world-frame IMU windows [n, 6, T] (accelerometer rows then
gyroscope rows), y the mean velocities [n, 2].  Pass per-window sequence
labels through ``groups`` to make the validation split leak-free; without
them whole windows are split at random.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import torch
from sklearn.base import BaseEstimator, RegressorMixin

from .config import RunConfig, validate_config
from .model import MotionTransformer
from .training import fit_model, normalization_stats, predict_windows, split_groups
from .validation import check_fitted, check_groups, check_velocities, check_windows

_CONFIG_FIELDS = (
    "token_len", "particle_count", "encoder_layers", "decoder_layers",
    "k1", "k2", "gamma", "attention_heads", "ffn_hidden", "mlp_hidden",
    "psd", "asc", "ape", "particles", "dsm", "normalize_legacy_weights",
    "learning_rate", "batch_size", "seed", "max_epochs", "patience",
    "grad_clip", "val_fraction",
)


class MotionTransformerRegressor(BaseEstimator, RegressorMixin):
    def __init__(self, token_len=100, particle_count=128, encoder_layers=2,
                 decoder_layers=2, k1=9, k2=3, gamma=2.0, attention_heads=4,
                 ffn_hidden=None, mlp_hidden=64, psd=True, asc=True, ape=True,
                 particles=True, dsm=True, normalize_legacy_weights=False,
                 learning_rate=1e-4, batch_size=128, seed=0, max_epochs=50,
                 patience=10, grad_clip=1.0, val_fraction=0.1):
        self.token_len = token_len
        self.particle_count = particle_count
        self.encoder_layers = encoder_layers
        self.decoder_layers = decoder_layers
        self.k1 = k1
        self.k2 = k2
        self.gamma = gamma
        self.attention_heads = attention_heads
        self.ffn_hidden = ffn_hidden
        self.mlp_hidden = mlp_hidden
        self.psd = psd
        self.asc = asc
        self.ape = ape
        self.particles = particles
        self.dsm = dsm
        self.normalize_legacy_weights = normalize_legacy_weights
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.max_epochs = max_epochs
        self.patience = patience
        self.grad_clip = grad_clip
        self.val_fraction = val_fraction

    def _config(self) -> RunConfig:
        return validate_config(RunConfig(**{f: getattr(self, f) for f in _CONFIG_FIELDS}))

    def fit(self, X, y, groups=None):
        cfg = self._config()
        X = check_windows(X, token_len=cfg.token_len)
        y = check_velocities(y, len(X))
        rng = np.random.default_rng(cfg.seed)
        if groups is not None:
            groups = check_groups(groups, len(X))
            train_idx, val_idx = split_groups(groups, cfg.val_fraction, rng)
        elif cfg.val_fraction > 0 and len(X) > 1:
            order = rng.permutation(len(X))
            n_val = min(max(int(round(cfg.val_fraction * len(X))), 1), len(X) - 1)
            val_idx, train_idx = order[:n_val], order[n_val:]
        else:
            train_idx, val_idx = np.arange(len(X)), np.zeros(0, dtype=np.int64)
        mean, std = normalization_stats(X[train_idx])
        torch.manual_seed(cfg.seed)
        model = MotionTransformer(cfg)
        model.set_normalization(mean, std)
        result = fit_model(model, cfg, X[train_idx], y[train_idx], X[val_idx], y[val_idx])
        self.model_ = model
        self.config_ = cfg
        self.history_ = result.history
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    def predict(self, X):
        check_fitted(self)
        X = check_windows(X, token_len=self.config_.token_len)
        return predict_windows(self.model_, X, batch_size=max(1, self.config_.batch_size))
