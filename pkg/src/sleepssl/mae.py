"""Masked-autoencoder core: masking, encoder, tiny decoder, masked MSE.

The encoder sees only the kept frame embeddings plus a class token; the
decoder restores a full-length sequence by inserting a shared learned mask
token at masked slots and predicts the frame embedding at every position.
Positional information is fixed sinusoidal, always indexed by the ORIGINAL
frame position so kept tokens carry the same code in both passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from .errors import ConfigError, NumericalError, ShapeError


@dataclass(frozen=True)
class MaskPlan:
    """One random split of frame indices into kept and masked sets."""

    kept: tuple[int, ...]
    masked: tuple[int, ...]
    rng_seed: int | None = None

    def __post_init__(self):
        total = sorted(self.kept) + sorted(self.masked)
        if set(self.kept) & set(self.masked):
            raise ConfigError("kept and masked sets overlap")
        if sorted(total) != list(range(len(total))):
            raise ConfigError("kept + masked must partition 0..M-1")
        if not (1 <= len(self.kept) < len(total)):
            raise ConfigError("need 1 <= kept < M")

    @property
    def num_frames(self) -> int:
        return len(self.kept) + len(self.masked)


def sample_mask(
    num_frames: int, mask_ratio: float, rng: np.random.Generator
) -> MaskPlan:
    """Draw kept indices uniformly; keep count = max(1, round((1-ratio)*M))."""
    if num_frames < 2:
        raise ConfigError("need at least 2 frames to mask")
    if not 0.0 < mask_ratio < 1.0:
        raise ConfigError("mask_ratio must lie in (0, 1)")
    n_keep = max(1, round((1.0 - mask_ratio) * num_frames))
    n_keep = min(n_keep, num_frames - 1)
    kept = np.sort(rng.choice(num_frames, size=n_keep, replace=False))
    masked = np.setdiff1d(np.arange(num_frames), kept)
    return MaskPlan(kept=tuple(int(i) for i in kept),
                    masked=tuple(int(i) for i in masked))


def sinusoidal_positions(length: int, dim: int,
                         dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Fixed sin/cos positional table of shape (length, dim)."""
    position = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    div = torch.exp(
        torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim)
    )
    table = torch.zeros(length, dim, dtype=torch.float64)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div[: dim // 2])
    return table.to(dtype)


class TransformerBlock(nn.Module):
    """Pre-norm block: LN -> MHA -> residual, LN -> 4x GELU MLP -> residual."""

    def __init__(self, dim: int, heads: int, mlp_ratio: int = 4):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, mlp_ratio * dim),
            nn.GELU(),
            nn.Linear(mlp_ratio * dim, dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h, need_weights=False)[0]
        return x + self.mlp(self.norm2(x))


@dataclass
class EncoderConfig:
    dim: int = 512
    depth: int = 4
    heads: int = 8
    max_positions: int = 256

    def __post_init__(self):
        if self.dim % self.heads:
            raise ConfigError("encoder dim must be divisible by heads")


@dataclass
class DecoderConfig:
    dim: int = 192
    depth: int = 1
    heads: int = 8
    max_positions: int = 256

    def __post_init__(self):
        if self.dim % self.heads:
            raise ConfigError("decoder dim must be divisible by heads")


class MaskedEncoder(nn.Module):
    """Transformer encoder over [class token] ++ projected kept frames."""

    def __init__(self, embed_dim: int, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.proj = nn.Linear(embed_dim, cfg.dim)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, cfg.dim))
        nn.init.normal_(self.cls_token, std=0.02)
        self.blocks = nn.ModuleList(
            TransformerBlock(cfg.dim, cfg.heads) for _ in range(cfg.depth)
        )
        self.norm = nn.LayerNorm(cfg.dim) if cfg.depth > 0 else nn.Identity()
        self.register_buffer(
            "pos_table", sinusoidal_positions(cfg.max_positions, cfg.dim),
            persistent=False,
        )

    def _positions(self, indices: torch.Tensor) -> torch.Tensor:
        if int(indices.max()) >= self.pos_table.shape[0]:
            raise ConfigError("sequence longer than positional table")
        return self.pos_table.to(indices.device)[indices]

    def embed_tokens(self, z: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
        """Project frames and prepend the class token; no blocks applied.

        z: (B, K, embed_dim); positions: (K,) or (B, K) ORIGINAL frame
        indices. Returns (B, K+1, dim).
        """
        tokens = self.proj(z) + self._positions(positions).to(z.dtype)
        cls = self.cls_token.to(z.dtype).expand(z.shape[0], -1, -1)
        return torch.cat([cls, tokens], dim=1)

    def run_blocks(
        self,
        x: torch.Tensor,
        start: int = 0,
        stop: int | None = None,
        final_norm: bool | None = None,
    ) -> torch.Tensor:
        """Apply transformer blocks [start, stop); final norm after the last."""
        stop = len(self.blocks) if stop is None else stop
        for block in self.blocks[start:stop]:
            x = block(x)
        if final_norm if final_norm is not None else stop == len(self.blocks):
            x = self.norm(x)
        return x

    def forward(
        self, z: torch.Tensor, positions: torch.Tensor
    ) -> torch.Tensor:
        """Encode frame embeddings.

        z: (B, K, embed_dim) kept frame embeddings.
        positions: (K,) or (B, K) original frame indices for the kept slots.
        Returns (B, K+1, dim) with the class token at row 0.
        """
        x = self.run_blocks(self.embed_tokens(z, positions))
        if not torch.isfinite(x).all():
            raise NumericalError("encoder output")
        return x


class MaskedDecoder(nn.Module):
    """Tiny decoder reconstructing frame embeddings at every position."""

    def __init__(self, embed_dim: int, encoder_dim: int, cfg: DecoderConfig):
        super().__init__()
        self.cfg = cfg
        self.proj = nn.Linear(encoder_dim, cfg.dim)
        self.mask_token = nn.Parameter(torch.zeros(1, 1, cfg.dim))
        nn.init.normal_(self.mask_token, std=0.02)
        self.blocks = nn.ModuleList(
            TransformerBlock(cfg.dim, cfg.heads) for _ in range(cfg.depth)
        )
        self.norm = nn.LayerNorm(cfg.dim) if cfg.depth > 0 else nn.Identity()
        self.head = nn.Linear(cfg.dim, embed_dim)
        self.register_buffer(
            "pos_table", sinusoidal_positions(cfg.max_positions, cfg.dim),
            persistent=False,
        )

    def forward(
        self, latents: torch.Tensor, plan: MaskPlan | list[MaskPlan]
    ) -> torch.Tensor:
        """Reconstruct all M positions from kept-slot latents.

        latents: (B, K, encoder_dim), the encoder output minus the class token.
        ``plan`` is either one plan shared by the batch or one plan per sample
        (all with the same kept count). Returns (B, M, embed_dim).
        """
        plans = plan if isinstance(plan, list) else [plan] * latents.shape[0]
        if len(plans) != latents.shape[0]:
            raise ShapeError(f"{len(plans)} plans for batch of {latents.shape[0]}")
        if any(latents.shape[1] != len(p.kept) for p in plans):
            raise ShapeError(
                f"{latents.shape[1]} latents do not match kept-slot counts"
            )
        batch, _, _ = latents.shape
        m = plans[0].num_frames
        seq = self.mask_token.to(latents.dtype).expand(batch, m, -1).clone()
        kept_idx = torch.as_tensor(
            [p.kept for p in plans], device=latents.device
        )
        proj = self.proj(latents)
        seq = seq.scatter(
            1, kept_idx.unsqueeze(-1).expand(-1, -1, proj.shape[-1]), proj
        )
        seq = seq + self.pos_table[:m].to(latents.dtype)
        for block in self.blocks:
            seq = block(seq)
        out = self.head(self.norm(seq))
        if not torch.isfinite(out).all():
            raise NumericalError("decoder output")
        return out


def reconstruction_loss(
    z: torch.Tensor,
    r: torch.Tensor,
    plan: MaskPlan | list[MaskPlan],
    stopgrad_targets: bool = True,
) -> torch.Tensor:
    """Mean squared error over masked positions only.

    Averages over batch, masked count and embedding dimension so the value is
    comparable across model widths. Targets are detached by default to block
    the degenerate constant-embedding minimum.
    """
    if z.shape != r.shape:
        raise ShapeError(f"targets {tuple(z.shape)} vs reconstructions {tuple(r.shape)}")
    plans = plan if isinstance(plan, list) else [plan] * z.shape[0]
    if len(plans) != z.shape[0]:
        raise ShapeError(f"{len(plans)} plans for batch of {z.shape[0]}")
    if any(not p.masked for p in plans):
        raise ConfigError("mask plan has no masked positions")
    targets = z.detach() if stopgrad_targets else z
    mask = torch.zeros(z.shape[:2], dtype=torch.bool, device=z.device)
    for b, p in enumerate(plans):
        mask[b, list(p.masked)] = True
    diff = (targets - r)[mask]
    return (diff ** 2).mean()
