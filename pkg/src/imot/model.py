"""The full window-to-velocity model.

Pipeline: normalize the raw [B, 2D, T] channel stack with stored statistics,
encode it as variate tokens, then either refine a particle population and mix
it into one velocity, or (with particles disabled) pool the tokens through a
small regression head.  All parameters and buffers are float64.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import torch
from torch import nn

from .attention import mlp
from .config import RunConfig, validate_config
from .decoder import Decoder
from .encoder import Encoder
from .scoring import (
    DynamicScorer,
    entropy_loss,
    legacy_mixture,
    softmax_scores,
    velocity_loss,
)


class ModelOutput(NamedTuple):
    velocity: torch.Tensor                     # [B, 2] mixed / regressed estimate
    particles: Optional[torch.Tensor]          # [B, P, 2] or None
    content: Optional[torch.Tensor]            # [B, P, T] or None
    scores: Optional[torch.Tensor]             # learned per-axis scores or None


class MotionTransformer(nn.Module):
    def __init__(self, cfg: RunConfig):
        super().__init__()
        validate_config(cfg)
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        rows = 2 * cfg.channels
        self.register_buffer("input_mean", torch.zeros(rows, 1, dtype=torch.float64))
        self.register_buffer("input_std", torch.ones(rows, 1, dtype=torch.float64))
        if cfg.particles:
            self.decoder = Decoder(cfg)
            self.scorer = DynamicScorer(cfg.particle_count, cfg.mlp_hidden) if cfg.dsm else None
            self.head = None
        else:
            self.decoder = None
            self.scorer = None
            self.head = mlp(cfg.token_len, cfg.mlp_hidden, 2)
        self.double()

    def set_normalization(self, mean, std) -> None:
        """Install per-channel statistics computed on the training split."""
        mean = torch.as_tensor(mean, dtype=torch.float64).reshape(-1, 1)
        std = torch.as_tensor(std, dtype=torch.float64).reshape(-1, 1)
        if mean.shape != self.input_mean.shape or std.shape != self.input_std.shape:
            raise ValueError(
                f"normalization stats must have {self.input_mean.shape[0]} channels"
            )
        if torch.any(std <= 0):
            raise ValueError("normalization std must be positive")
        self.input_mean.copy_(mean)
        self.input_std.copy_(std)

    def forward(self, x: torch.Tensor, need_weights=False) -> ModelOutput:
        """x: raw window stack [B, 2D, T] (accelerometer rows first)."""
        z = (x - self.input_mean) / self.input_std
        enc = self.encoder(z, need_weights=need_weights)
        if self.decoder is None:
            pooled = torch.cat([enc.tokens_accel, enc.tokens_gyro], dim=-2).mean(dim=-2)
            return ModelOutput(self.head(pooled), None, None, None)
        particles, content, _ = self.decoder(enc, need_weights=need_weights)
        if self.scorer is not None:
            scores, mixed = self.scorer(particles)
        else:
            # Legacy inference: plain average over the population.
            scores, mixed = None, particles.mean(dim=-2)
        return ModelOutput(mixed, particles, content, scores)

    def predict_velocity(self, x: torch.Tensor) -> torch.Tensor:
        return self.forward(x).velocity

    def training_losses(self, x: torch.Tensor, target: torch.Tensor):
        """Return (velocity loss, entropy loss) for one batch.

        With the learned scorer the entropy term is identically zero; the
        legacy path scores particles against the target and regularizes the
        score entropy.
        """
        out = self.forward(x)
        zero = torch.zeros((), dtype=x.dtype, device=x.device)
        if out.particles is None or self.scorer is not None:
            return velocity_loss(out.velocity, target), zero
        scores = softmax_scores(out.particles, target)
        mixed = legacy_mixture(
            out.particles, scores, self.cfg.gamma,
            normalize=self.cfg.normalize_legacy_weights,
        )
        return velocity_loss(mixed, target), entropy_loss(scores)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())
