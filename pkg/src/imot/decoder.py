"""Decoder: a population of velocity hypotheses refined against the encoder tokens.

Each particle carries a 2-d velocity and a content feature row.  Layers run
self-attention over the population, cross-attend separately to the
accelerometer and gyroscope token blocks with double-width queries and keys,
then nudge every particle's velocity by a shared refinement head.  The
embedding, content-scaling, and refinement perceptrons are shared across
layers; gradients flow through the velocity updates end to end.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .attention import MultiheadAttention, mlp
from .config import RunConfig
from .encoder import EncoderOutput


def coordinate_embedding(v: torch.Tensor, token_len: int) -> torch.Tensor:
    """Sinusoidal embedding of velocity coordinates, [..., 2] -> [..., token_len].

    Each coordinate receives token_len // 2 dimensions built from the
    classical alternating sin/cos frequency ladder.
    """
    if token_len % 2 != 0:
        raise ValueError(f"token_len must be even for coordinate embeddings, got {token_len}")
    half = token_len // 2
    j = torch.arange(half, device=v.device)
    freq = torch.pow(
        torch.tensor(10000.0, dtype=v.dtype, device=v.device), -2.0 * (j // 2) / half
    )
    angles = v.unsqueeze(-1) * freq                      # [..., 2, half]
    emb = torch.where(j % 2 == 0, torch.sin(angles), torch.cos(angles))
    return emb.flatten(-2)


def particle_grid(count: int, extent: float = 1.5) -> torch.Tensor:
    """Near-uniform grid of initial velocities over [-extent, extent]^2."""
    side = math.ceil(math.sqrt(count))
    xs = torch.linspace(-extent, extent, side, dtype=torch.float64)
    grid = torch.stack(torch.meshgrid(xs, xs, indexing="ij"), dim=-1).reshape(-1, 2)
    return grid[:count].contiguous()


class DecoderLayer(nn.Module):
    def __init__(self, cfg: RunConfig):
        super().__init__()
        t = cfg.token_len
        heads = cfg.attention_heads
        self.self_attn = MultiheadAttention(t, t, t, t, heads, t)
        self.cross_accel = MultiheadAttention(2 * t, 2 * t, t, t, heads, t)
        self.cross_gyro = MultiheadAttention(2 * t, 2 * t, t, t, heads, t)
        self.fuse = mlp(2 * t, cfg.mlp_hidden, t)

    def forward(self, content, embed, enc: EncoderOutput, content_scale, need_weights=False):
        qk = content + embed
        attended, _ = self.self_attn(qk, qk, content)
        query = torch.cat([attended, content_scale(content) * embed], dim=-1)
        key_a = torch.cat([enc.tokens_accel, enc.pe_accel], dim=-1)
        key_g = torch.cat([enc.tokens_gyro, enc.pe_gyro], dim=-1)
        c_accel, w_accel = self.cross_accel(query, key_a, enc.tokens_accel, need_weights)
        c_gyro, w_gyro = self.cross_gyro(query, key_g, enc.tokens_gyro, need_weights)
        fused = self.fuse(torch.cat([c_accel, c_gyro], dim=-1))
        return fused, (w_accel, w_gyro) if need_weights else None


class Decoder(nn.Module):
    def __init__(self, cfg: RunConfig):
        super().__init__()
        self.cfg = cfg
        t = cfg.token_len
        self.initial_velocities = nn.Parameter(particle_grid(cfg.particle_count))
        self.embed = mlp(t, cfg.mlp_hidden, t)
        self.content_scale = mlp(t, cfg.mlp_hidden, t)
        self.refine = mlp(t, cfg.mlp_hidden, 2)
        self.layers = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.decoder_layers))
        self.double()

    def forward(self, enc: EncoderOutput, need_weights=False):
        """Returns (velocities [B, P, T->2], content [B, P, T], cross maps)."""
        batch = enc.tokens_accel.shape[0]
        t = self.cfg.token_len
        velocities = self.initial_velocities.unsqueeze(0).expand(batch, -1, -1)
        content = torch.zeros(
            batch, self.cfg.particle_count, t, dtype=enc.tokens_accel.dtype,
            device=enc.tokens_accel.device,
        )
        maps = [] if need_weights else None
        for layer in self.layers:
            embed = self.embed(coordinate_embedding(velocities, t))
            content, layer_maps = layer(
                content, embed, enc, self.content_scale, need_weights=need_weights
            )
            velocities = velocities + self.refine(content)
            if need_weights:
                maps.append(layer_maps)
        return velocities, content, maps
