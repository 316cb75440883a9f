"""Projection head and NT-Xent loss over the two class-token views."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, NumericalError


@dataclass
class ProjectionConfig:
    input_dim: int = 512
    hidden: tuple[int, int] = (1024, 512)


class ProjectionHead(nn.Module):
    """Two-layer MLP (ELU between) followed by L2 normalisation."""

    def __init__(self, cfg: ProjectionConfig):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(cfg.input_dim, cfg.hidden[0]),
            nn.ELU(),
            nn.Linear(cfg.hidden[0], cfg.hidden[1]),
        )

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        out = self.net(h)
        norms = out.norm(dim=-1)
        if (norms < 1e-12).any():
            raise NumericalError("zero vector before normalisation")
        return F.normalize(out, dim=-1)


def nt_xent(c1: torch.Tensor, c2: torch.Tensor, tau: float = 0.5) -> torch.Tensor:
    """Normalised-temperature cross-entropy over interleaved views.

    Sample k's two views occupy slots 2k and 2k+1; each view's positive is
    the other, and the remaining 2(N-1) slots are negatives. Cosine
    similarity reduces to a dot product because inputs are unit vectors.
    """
    if c1.shape != c2.shape:
        raise ConfigError("views must have identical shapes")
    n = c1.shape[0]
    if n < 2:
        raise ConfigError("need batch size >= 2 (no negatives otherwise)")
    if tau <= 0:
        raise ConfigError("temperature must be positive")
    z = torch.stack([c1, c2], dim=1).reshape(2 * n, -1)
    logits = (z @ z.T) / tau
    logits = logits - logits.max(dim=1, keepdim=True).values.detach()
    eye = torch.eye(2 * n, dtype=torch.bool, device=z.device)
    exp = torch.exp(logits).masked_fill(eye, 0.0)
    idx = torch.arange(2 * n, device=z.device)
    positives = logits[idx, idx ^ 1]
    return (torch.log(exp.sum(dim=1)) - positives).mean()
