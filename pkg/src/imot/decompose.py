"""Trend/seasonal decomposition of variate tokens.

The trend is a two-pass centered moving average (a wide pass followed by a
narrow smoothing pass); the seasonal part is the residual, so the two always
sum back to the input.  Ends are handled by replicate padding.  An even
order uses ``order + 1`` taps with half weight at the extremes, which keeps
the window centered.

The averages are computed in deviation form, ``x + sum(w * (neighbor - x))``,
so a constant series is reproduced bit-exactly instead of to rounding error.
"""

from __future__ import annotations

import numpy as np
import torch

from .types import VariateTokens


def moving_average_taps(order: int):
    """Tap weights and half-width for a centered moving average."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if order % 2 == 1:
        taps = np.full(order, 1.0 / order)
        half = (order - 1) // 2
    else:
        taps = np.full(order + 1, 1.0 / order)
        taps[0] = taps[-1] = 1.0 / (2 * order)
        half = order // 2
    return taps, half


def centered_moving_average(x: torch.Tensor, order: int) -> torch.Tensor:
    """Moving average along the last axis with replicate padding."""
    if order == 1:
        return x
    taps, half = moving_average_taps(order)
    w = torch.as_tensor(taps, dtype=x.dtype, device=x.device)
    flat = x.reshape(-1, 1, x.shape[-1])
    padded = torch.nn.functional.pad(flat, (half, half), mode="replicate")
    windows = padded.unfold(-1, len(taps), 1)            # [N, 1, T, taps]
    dev = windows - flat.unsqueeze(-1)
    return (x + (dev * w).sum(-1).reshape(x.shape)).contiguous()


def series_break(x: torch.Tensor, k1: int, k2: int):
    """Split a token block into (seasonal, trend) along the last axis."""
    trend = centered_moving_average(centered_moving_average(x, k1), k2)
    return x - trend, trend


def augment_tokens(tokens: torch.Tensor, k1: int, k2: int, first: bool) -> torch.Tensor:
    """Build the widened token block consumed by an encoder layer.

    On the first layer the input is the raw [.., 2D, T] stack and the output
    triples it to [.., 6D, T], ordered accel base/seasonal/trend then gyro
    base/seasonal/trend.  On later layers the input is already widened and
    the current base rows are re-decomposed in place.
    """
    rows = tokens.shape[-2]
    if first:
        if rows % 2 != 0:
            raise ValueError(f"raw token block must have an even row count, got {rows}")
        d = rows // 2
        base_a = tokens[..., :d, :]
        base_g = tokens[..., d:, :]
    else:
        if rows % 6 != 0:
            raise ValueError(f"widened token block must have 6D rows, got {rows}")
        d = rows // 6
        base_a = tokens[..., 0:d, :]
        base_g = tokens[..., 3 * d : 4 * d, :]
    seas_a, trend_a = series_break(base_a, k1, k2)
    seas_g, trend_g = series_break(base_g, k1, k2)
    return torch.cat([base_a, seas_a, trend_a, base_g, seas_g, trend_g], dim=-2)


def decompose_window(tokens: VariateTokens, k1: int, k2: int) -> VariateTokens:
    """Numpy facade: fill the seasonal/trend/augmented fields of a token set."""
    base = torch.from_numpy(np.ascontiguousarray(tokens.base))
    seasonal, trend = series_break(base, k1, k2)
    augmented = augment_tokens(base, k1, k2, first=True)
    return VariateTokens(
        base=tokens.base,
        seasonal=seasonal.numpy(),
        trend=trend.numpy(),
        augmented=augmented.numpy(),
    )
