"""Particle scoring and the training losses built on it.

Two scoring paths exist.  The legacy path scores particles by softmaxed
negative distance to the target and mixes them with weights ``(1 - s)^gamma``
(deliberately unnormalized; a normalized variant sits behind a flag).  The
learned path replaces this with a perceptron that maps the particle
population to per-axis mixing scores and needs no target at inference time.
"""

from __future__ import annotations

import torch
from torch import nn

from .attention import mlp

ENTROPY_EPS = 1e-10


def softmax_scores(velocities: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Scores in (0, 1] summing to 1: softmax of negative Euclidean distance.

    velocities [..., P, 2], target [..., 2] -> [..., P].  The softmax is
    computed with the usual max shift so large distances cannot overflow.
    """
    dist = torch.linalg.vector_norm(velocities - target.unsqueeze(-2), dim=-1)
    return torch.softmax(-dist, dim=-1)


def legacy_mixture(velocities, scores, gamma, normalize=False):
    """Mix particles with weights (1 - score)^gamma.

    The weights deliberately do not sum to 1; pass normalize=True for the
    study variant that divides by their sum.
    """
    weights = (1.0 - scores) ** gamma
    if normalize:
        weights = weights / weights.sum(dim=-1, keepdim=True).clamp_min(ENTROPY_EPS)
    return (weights.unsqueeze(-1) * velocities).sum(dim=-2)


def entropy_loss(scores: torch.Tensor) -> torch.Tensor:
    """Negative-entropy regularizer, averaged over batch and particles.

    Uniform scores over P particles give log(P) / P.
    """
    return (-scores * torch.log(scores + ENTROPY_EPS)).mean()


def velocity_loss(predicted: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared Euclidean error over the batch."""
    return ((predicted - target) ** 2).sum(dim=-1).mean()


def axiswise_mixture(scores: torch.Tensor, velocities: torch.Tensor) -> torch.Tensor:
    """Contract per-axis scores [..., 2, P] with particles [..., P, 2] -> [..., 2].

    Axis a of the output mixes the particles' a-components with row a of the
    score matrix.  This pins down the one dimensional reading of the learned
    scorer that type-checks, and the choice is isolated here.
    """
    return (scores * velocities.transpose(-1, -2)).sum(dim=-1)


class DynamicScorer(nn.Module):
    """Learned per-axis particle scores; replaces the target-dependent path."""

    def __init__(self, particle_count: int, hidden: int):
        super().__init__()
        self.score = mlp(particle_count, hidden, particle_count)
        self.double()

    def forward(self, velocities: torch.Tensor):
        """velocities [..., P, 2] -> (scores [..., 2, P], mixture [..., 2])."""
        scores = self.score(velocities.transpose(-1, -2))
        return scores, axiswise_mixture(scores, velocities)
