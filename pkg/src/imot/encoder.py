"""Encoder over variate tokens.

Each IMU channel's full one-second series is one token, so attention mixes
channels rather than time steps.  Every layer re-derives trend/seasonal rows
from the current base rows, adds a content-scaled positional pattern, and a
spatial-sync branch injects cross-channel structure at each residual.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import torch
from torch import nn

from .attention import MultiheadAttention, mlp
from .config import RunConfig
from .decompose import augment_tokens


def base_position_row(token_len: int) -> torch.Tensor:
    """The shared sinusoidal pattern over sample index.

    Unit-frequency sine, the leading component of the classical sinusoidal
    table; every variate token receives the identical row.
    """
    return torch.sin(torch.arange(token_len, dtype=torch.float64))


class AdaptivePositionalEncoding(nn.Module):
    """Content-dependent scaling of the base positional row, per modality."""

    def __init__(self, token_len: int, hidden: int):
        super().__init__()
        self.scale_accel = mlp(token_len, hidden, token_len)
        self.scale_gyro = mlp(token_len, hidden, token_len)

    def forward(self, tokens: torch.Tensor, base_row: torch.Tensor) -> torch.Tensor:
        half = tokens.shape[-2] // 2
        pe_a = self.scale_accel(tokens[..., :half, :]) * base_row
        pe_g = self.scale_gyro(tokens[..., half:, :]) * base_row
        return torch.cat([pe_a, pe_g], dim=-2)


class SpatialSync(nn.Module):
    """Cross-channel branch added at every residual connection.

    Works on the temporal concatenation of the two modality blocks, so the
    accelerometer and gyroscope rows share one channel axis of height
    ``rows``.  Three stages: a 3-tap convolution along the channel axis,
    per-time-step sigmoid gates from channel-pooled means, and a shared
    per-time-step linear map across channels with GELU.
    """

    def __init__(self, rows: int):
        super().__init__()
        self.mix = nn.Conv2d(1, 1, kernel_size=(3, 1))
        self.gate = nn.Linear(1, 1)
        self.proj = nn.Linear(rows, rows)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: [B, rows, L] with L = 2 * token_len
        c = torch.nn.functional.pad(x.unsqueeze(1), (0, 0, 1, 1), mode="replicate")
        c = self.mix(c).squeeze(1)
        pooled = x.mean(dim=1).unsqueeze(-1)               # [B, L, 1]
        gates = torch.sigmoid(self.gate(pooled))           # [B, L, 1]
        c = c * gates.transpose(1, 2)
        out = torch.nn.functional.gelu(self.proj(c.transpose(1, 2)))
        return out.transpose(1, 2)


def _fold_modalities(tokens: torch.Tensor) -> torch.Tensor:
    """[B, R, T] -> [B, R/2, 2T]: gyro block appended along time."""
    half = tokens.shape[-2] // 2
    return torch.cat([tokens[..., :half, :], tokens[..., half:, :]], dim=-1)


def _unfold_modalities(folded: torch.Tensor) -> torch.Tensor:
    t = folded.shape[-1] // 2
    return torch.cat([folded[..., :t], folded[..., t:]], dim=-2)


class EncoderLayer(nn.Module):
    def __init__(self, cfg: RunConfig, rows: int):
        super().__init__()
        t = cfg.token_len
        self.attn = MultiheadAttention(t, t, t, t, cfg.attention_heads, t)
        self.ffn = mlp(t, cfg.ffn_width, t)
        self.norm_attn = nn.LayerNorm(t)
        self.norm_ffn = nn.LayerNorm(t)
        self.ape = AdaptivePositionalEncoding(t, cfg.mlp_hidden) if cfg.ape else None
        self.sync = SpatialSync(rows // 2) if cfg.asc else None

    def forward(self, tokens, base_row, need_weights=False):
        if self.ape is not None:
            pe = self.ape(tokens, base_row)
        else:
            pe = base_row.expand_as(tokens)
        sync = None
        if self.sync is not None:
            sync = _unfold_modalities(self.sync(_fold_modalities(tokens)))
        qk = tokens + pe
        attended, weights = self.attn(qk, qk, tokens, need_weights=need_weights)
        if sync is not None:
            attended = attended + sync
        h = self.norm_attn(tokens + attended)
        inner = self.ffn(h)
        if sync is not None:
            inner = inner + sync
        out = self.norm_ffn(h + inner)
        return out, pe, weights


class EncoderOutput(NamedTuple):
    tokens_accel: torch.Tensor
    tokens_gyro: torch.Tensor
    pe_accel: torch.Tensor
    pe_gyro: torch.Tensor
    attention: Optional[list]


class Encoder(nn.Module):
    def __init__(self, cfg: RunConfig):
        super().__init__()
        self.cfg = cfg
        rows = (6 if cfg.psd else 2) * cfg.channels
        self.rows = rows
        self.layers = nn.ModuleList(
            EncoderLayer(cfg, rows) for _ in range(cfg.encoder_layers)
        )
        self.register_buffer("base_row", base_position_row(cfg.token_len))
        self.double()

    def forward(self, x: torch.Tensor, need_weights=False) -> EncoderOutput:
        """x: raw channel stack [B, 2D, T], accelerometer rows first."""
        cfg = self.cfg
        tokens = x
        pe = None
        maps = [] if need_weights else None
        for index, layer in enumerate(self.layers):
            if cfg.psd:
                tokens = augment_tokens(tokens, cfg.k1, cfg.k2, first=(index == 0))
            tokens, pe, weights = layer(tokens, self.base_row, need_weights=need_weights)
            if need_weights:
                maps.append(weights)
        half = tokens.shape[-2] // 2
        return EncoderOutput(
            tokens_accel=tokens[..., :half, :],
            tokens_gyro=tokens[..., half:, :],
            pe_accel=pe[..., :half, :],
            pe_gyro=pe[..., half:, :],
            attention=maps,
        )
