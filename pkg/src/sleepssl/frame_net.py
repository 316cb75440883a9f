"""Multiscale 1D residual CNN mapping raw frames to embeddings.

A shared stem (conv / batch-norm / max-pool) feeds three parallel branches
with kernel sizes 3, 5 and 7. Each branch stacks three conv/BN/ELU blocks
with a residual connection from the branch input, followed by global average
pooling. Branch vectors are concatenated and passed through two fully
connected layers to produce the frame embedding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .errors import ConfigError, NumericalError

BRANCH_KERNELS = (3, 5, 7)


@dataclass
class FrameNetConfig:
    embed_dim: int = 512
    channels: int = 64
    stem_kernel: int = 7
    stem_stride: int = 2
    stem_pool: int = 2
    blocks_per_branch: int = 3
    branch_kernels: tuple[int, ...] = field(default=BRANCH_KERNELS)

    def __post_init__(self):
        if len(self.branch_kernels) != 3:
            raise ConfigError("exactly 3 branches required")
        if len(set(self.branch_kernels)) != 3:
            raise ConfigError("branch kernel sizes must be pairwise distinct")


class _Branch(nn.Module):
    def __init__(self, channels: int, kernel: int, blocks: int):
        super().__init__()
        layers = []
        for _ in range(blocks):
            layers += [
                nn.Conv1d(channels, channels, kernel, padding="same"),
                nn.BatchNorm1d(channels),
                nn.ELU(),
            ]
        self.blocks = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.blocks(x) + x


class FrameNet(nn.Module):
    def __init__(self, cfg: FrameNetConfig):
        super().__init__()
        self.cfg = cfg
        ch = cfg.channels
        self.stem = nn.Sequential(
            nn.Conv1d(1, ch, cfg.stem_kernel, stride=cfg.stem_stride,
                      padding=cfg.stem_kernel // 2),
            nn.BatchNorm1d(ch),
            nn.MaxPool1d(cfg.stem_pool),
        )
        self.branches = nn.ModuleList(
            _Branch(ch, k, cfg.blocks_per_branch) for k in cfg.branch_kernels
        )
        self.pool = nn.AdaptiveAvgPool1d(1)
        self.fc = nn.Sequential(
            nn.Linear(3 * ch, 2 * cfg.embed_dim),
            nn.ELU(),
            nn.Linear(2 * cfg.embed_dim, cfg.embed_dim),
        )

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        """Map frames (B, frame_len) or (B, 1, frame_len) to (B, embed_dim)."""
        if frames.dim() == 2:
            frames = frames.unsqueeze(1)
        x = self.stem(frames)
        if x.shape[-1] < 1:
            raise ConfigError("frame too short for the conv/pool stack")
        pooled = [self.pool(branch(x)).squeeze(-1) for branch in self.branches]
        out = self.fc(torch.cat(pooled, dim=-1))
        if not torch.isfinite(out).all():
            raise NumericalError("frame_net output")
        return out
