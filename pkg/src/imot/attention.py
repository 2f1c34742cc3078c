"""Multi-head attention with independent query/key/value input widths.

The decoder's cross-attention feeds double-width queries and keys against
single-width values, which torch's bundled attention cannot express, so the
projections are plain Linear layers here.  Weights are returned on request
for the attention-map diagnostics.
"""

from __future__ import annotations

import math

import torch
from torch import nn


class MultiheadAttention(nn.Module):
    def __init__(self, q_dim, k_dim, v_dim, model_dim, heads, out_dim=None):
        super().__init__()
        if model_dim % heads != 0:
            raise ValueError(f"model_dim {model_dim} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = model_dim // heads
        self.model_dim = model_dim
        self.q_proj = nn.Linear(q_dim, model_dim)
        self.k_proj = nn.Linear(k_dim, model_dim)
        self.v_proj = nn.Linear(v_dim, model_dim)
        self.out_proj = nn.Linear(model_dim, out_dim or model_dim)

    def forward(self, query, key, value, need_weights=False):
        """query [B, Lq, q_dim], key [B, Lk, k_dim], value [B, Lk, v_dim].

        Returns (output [B, Lq, out_dim], weights [B, heads, Lq, Lk] or None).
        """
        B, Lq, _ = query.shape
        Lk = key.shape[1]
        q = self.q_proj(query).view(B, Lq, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(key).view(B, Lk, self.heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(value).view(B, Lk, self.heads, self.head_dim).transpose(1, 2)
        logits = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        weights = torch.softmax(logits, dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(B, Lq, self.model_dim)
        out = self.out_proj(out)
        return out, (weights if need_weights else None)


def mlp(in_dim, hidden, out_dim):
    """Two-layer perceptron used throughout the model."""
    return nn.Sequential(nn.Linear(in_dim, hidden), nn.GELU(), nn.Linear(hidden, out_dim))
