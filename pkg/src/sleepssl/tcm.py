"""Temporal context modules over sequences of per-epoch class tokens.

The main variant is a selective state-space (Mamba-style) stack; LSTM and
multi-head-attention variants sit behind the same interface for the
comparison harness. All variants are causal and sequence-to-sequence: one
stage prediction per epoch in the context window.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, NumericalError, ShapeError

NUM_STAGES = 5


@dataclass
class TCMConfig:
    d_model: int = 768
    d_state: int = 16
    d_conv: int = 4
    expand: int = 2
    num_blocks: int = 2
    context_length: int = 20
    variant: str = "mamba"  # mamba | lstm | attention

    def __post_init__(self):
        if self.d_conv < 1 or self.context_length < 1:
            raise ConfigError("d_conv and context_length must be >= 1")
        if self.variant not in ("mamba", "lstm", "attention"):
            raise ConfigError(f"unknown TCM variant {self.variant!r}")

    @property
    def d_inner(self) -> int:
        return self.expand * self.d_model


def selective_scan(
    x: torch.Tensor,
    delta: torch.Tensor,
    A: torch.Tensor,
    B_seq: torch.Tensor,
    C_seq: torch.Tensor,
    D: torch.Tensor,
    h0: torch.Tensor | None = None,
    return_state: bool = False,
):
    """Input-dependent linear state-space recurrence.

    Shapes (batched leading dim optional): x, delta (B, L, d_inner);
    A (d_inner, d_state); B_seq, C_seq (B, L, d_state); D (d_inner,).
    Per step: h_t = exp(delta_t * A) * h_{t-1} + (delta_t * B_t) * x_t and
    y_t = <C_t, h_t> + D * x_t, with h_0 = 0.
    """
    squeeze = x.dim() == 2
    if squeeze:
        x, delta, B_seq, C_seq = (t.unsqueeze(0) for t in (x, delta, B_seq, C_seq))
    batch, length, d_inner = x.shape
    d_state = A.shape[1]
    h = (
        h0 if h0 is not None
        else torch.zeros(batch, d_inner, d_state, dtype=x.dtype, device=x.device)
    )
    ys = []
    for t in range(length):
        a_bar = torch.exp(delta[:, t].unsqueeze(-1) * A)  # (B, d_inner, d_state)
        b_bar = delta[:, t].unsqueeze(-1) * B_seq[:, t].unsqueeze(1)
        h = a_bar * h + b_bar * x[:, t].unsqueeze(-1)
        y = (h * C_seq[:, t].unsqueeze(1)).sum(-1) + D * x[:, t]
        if not torch.isfinite(y).all():
            raise NumericalError(f"selective scan diverged at step {t}")
        ys.append(y)
    out = torch.stack(ys, dim=1)
    if squeeze:
        out = out.squeeze(0)
        h = h.squeeze(0)
    return (out, h) if return_state else out


def selective_scan_chunked(
    x: torch.Tensor,
    delta: torch.Tensor,
    A: torch.Tensor,
    B_seq: torch.Tensor,
    C_seq: torch.Tensor,
    D: torch.Tensor,
    chunk: int = 8,
) -> torch.Tensor:
    """Chunked evaluation with explicit state hand-off between chunks."""
    squeeze = x.dim() == 2
    if squeeze:
        x, delta, B_seq, C_seq = (t.unsqueeze(0) for t in (x, delta, B_seq, C_seq))
    batch, length, d_inner = x.shape
    h = torch.zeros(batch, d_inner, A.shape[1], dtype=x.dtype, device=x.device)
    outs = []
    for start in range(0, length, chunk):
        end = min(start + chunk, length)
        y, h = selective_scan(
            x[:, start:end], delta[:, start:end], A,
            B_seq[:, start:end], C_seq[:, start:end], D,
            h0=h, return_state=True,
        )
        outs.append(y)
    out = torch.cat(outs, dim=1)
    return out.squeeze(0) if squeeze else out


class MambaBlock(nn.Module):
    """Residual selective-SSM block: LN, gated scan branch, out projection."""

    def __init__(self, cfg: TCMConfig):
        super().__init__()
        d_inner = cfg.d_inner
        self.cfg = cfg
        self.norm = nn.LayerNorm(cfg.d_model)
        self.in_proj = nn.Linear(cfg.d_model, 2 * d_inner, bias=False)
        self.conv = nn.Conv1d(
            d_inner, d_inner, cfg.d_conv, groups=d_inner, padding=cfg.d_conv - 1
        )
        self.x_proj = nn.Linear(d_inner, 2 * cfg.d_state, bias=False)
        self.dt_proj = nn.Linear(d_inner, d_inner, bias=True)
        # Bias chosen so softplus(dt) starts in roughly [1e-3, 1e-1].
        with torch.no_grad():
            dt = torch.exp(
                torch.rand(d_inner) * (torch.log(torch.tensor(1e-1))
                                       - torch.log(torch.tensor(1e-3)))
                + torch.log(torch.tensor(1e-3))
            )
            self.dt_proj.bias.copy_(dt + torch.log(-torch.expm1(-dt)))
        A = torch.arange(1, cfg.d_state + 1, dtype=torch.float32)
        self.A_log = nn.Parameter(torch.log(A).repeat(d_inner, 1))
        self.D = nn.Parameter(torch.ones(d_inner))
        self.out_proj = nn.Linear(d_inner, cfg.d_model, bias=False)

    def forward(self, seq: torch.Tensor) -> torch.Tensor:
        """seq: (B, L, d_model) -> (B, L, d_model), causal."""
        squeeze = seq.dim() == 2
        if squeeze:
            seq = seq.unsqueeze(0)
        _, length, _ = seq.shape
        x, gate = self.in_proj(self.norm(seq)).chunk(2, dim=-1)
        # Depthwise causal conv: left padding only, trim the right overhang.
        x = self.conv(x.transpose(1, 2))[:, :, :length].transpose(1, 2)
        x = F.silu(x)
        bc = self.x_proj(x)
        b_seq, c_seq = bc.chunk(2, dim=-1)
        delta = F.softplus(self.dt_proj(x))
        A = -torch.exp(self.A_log)
        y = selective_scan(x, delta, A, b_seq, c_seq, self.D)
        y = y * F.silu(gate)
        out = seq + self.out_proj(y)
        return out.squeeze(0) if squeeze else out


class _LSTMBlock(nn.Module):
    def __init__(self, cfg: TCMConfig):
        super().__init__()
        self.norm = nn.LayerNorm(cfg.d_model)
        self.lstm = nn.LSTM(cfg.d_model, cfg.d_model, batch_first=True)

    def forward(self, seq: torch.Tensor) -> torch.Tensor:
        squeeze = seq.dim() == 2
        if squeeze:
            seq = seq.unsqueeze(0)
        out = seq + self.lstm(self.norm(seq))[0]
        return out.squeeze(0) if squeeze else out


class _AttentionBlock(nn.Module):
    def __init__(self, cfg: TCMConfig):
        super().__init__()
        heads = 8 if cfg.d_model % 8 == 0 else 4
        self.norm = nn.LayerNorm(cfg.d_model)
        self.attn = nn.MultiheadAttention(cfg.d_model, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.mlp = nn.Sequential(
            nn.Linear(cfg.d_model, 4 * cfg.d_model),
            nn.GELU(),
            nn.Linear(4 * cfg.d_model, cfg.d_model),
        )

    def forward(self, seq: torch.Tensor) -> torch.Tensor:
        squeeze = seq.dim() == 2
        if squeeze:
            seq = seq.unsqueeze(0)
        length = seq.shape[1]
        causal = torch.triu(
            torch.full((length, length), float("-inf"), device=seq.device), 1
        )
        h = self.norm(seq)
        seq = seq + self.attn(h, h, h, attn_mask=causal, need_weights=False)[0]
        out = seq + self.mlp(self.norm2(seq))
        return out.squeeze(0) if squeeze else out


_BLOCKS = {"mamba": MambaBlock, "lstm": _LSTMBlock, "attention": _AttentionBlock}


class TemporalContextClassifier(nn.Module):
    """Stacked context blocks plus a per-position linear stage head."""

    def __init__(self, cfg: TCMConfig):
        super().__init__()
        self.cfg = cfg
        self.blocks = nn.ModuleList(
            _BLOCKS[cfg.variant](cfg) for _ in range(cfg.num_blocks)
        )
        self.head = nn.Linear(cfg.d_model, NUM_STAGES)

    def forward(self, cls_tokens: torch.Tensor) -> torch.Tensor:
        """cls_tokens (B, L, d_model) or (L, d_model) -> stage logits."""
        if cls_tokens.shape[-1] != self.cfg.d_model:
            raise ShapeError(
                f"expected d_model {self.cfg.d_model}, got {cls_tokens.shape[-1]}"
            )
        x = cls_tokens
        for block in self.blocks:
            x = block(x)
        return self.head(x)


def context_windows(n_epochs: int, context_length: int) -> list[tuple[int, list[int]]]:
    """Plan inference windows covering every epoch exactly once.

    Returns (window_start, kept_positions) pairs for non-overlapping windows;
    a final partial window re-uses the last ``context_length`` real epochs
    and keeps only the tail positions not already covered. Recordings shorter
    than one window get a single left-padded window (padding positions are
    discarded by the caller via ``kept_positions``).
    """
    if n_epochs <= 0:
        return []
    n = context_length
    if n_epochs < n:
        return [(0, list(range(n - n_epochs, n)))]
    windows = []
    full = n_epochs // n
    for w in range(full):
        windows.append((w * n, list(range(n))))
    covered = full * n
    if covered < n_epochs:
        start = n_epochs - n
        windows.append((start, list(range(covered - start, n))))
    return windows


def window_sequences(
    tokens: torch.Tensor, context_length: int
) -> tuple[torch.Tensor, list[tuple[int, list[int]]]]:
    """Stack inference windows of per-epoch tokens into a batch.

    Short recordings are left-padded by repeating their first epoch.
    """
    n_epochs = tokens.shape[0]
    windows = context_windows(n_epochs, context_length)
    seqs = []
    for start, _ in windows:
        if n_epochs < context_length:
            pad = tokens[0:1].expand(
                context_length - n_epochs, *([-1] * (tokens.dim() - 1))
            )
            seqs.append(torch.cat([pad, tokens], dim=0))
        else:
            seqs.append(tokens[start : start + context_length])
    return torch.stack(seqs), windows
