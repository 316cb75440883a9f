"""Full self-supervised model: frame network, dual masked paths through a
shared encoder/decoder, contrastive head, and the combined loss.

The combined objective is the mean of the two masked-reconstruction losses
plus ``alpha`` times the contrastive loss between the two class-token views.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch
import torch.nn as nn

from .contrastive import ProjectionConfig, ProjectionHead, nt_xent
from .errors import ConfigError
from .frame_net import FrameNet, FrameNetConfig
from .framing import FrameConfig
from .mae import (
    DecoderConfig,
    EncoderConfig,
    MaskedDecoder,
    MaskedEncoder,
    MaskPlan,
    reconstruction_loss,
    sample_mask,
)


@dataclass
class OptimConfig:
    lr: float = 2e-5
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.01
    epochs: int = 50
    batch_size: int = 1024


@dataclass
class ModelConfig:
    """Everything needed to build and pretrain the SSL model."""

    preset: str = "B"
    frame: FrameConfig = field(default_factory=FrameConfig)
    frame_net: FrameNetConfig = field(default_factory=FrameNetConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    mask_ratio: float = 0.75
    tau: float = 0.5
    alpha: float = 1.0
    stopgrad_targets: bool = True
    optim: OptimConfig = field(default_factory=OptimConfig)
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if self.frame_net.embed_dim != self.encoder.dim and self.preset in ("T", "B"):
            # Presets tie the frame embedding width to the encoder width.
            raise ConfigError("frame embed_dim must equal encoder dim for presets")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(data: dict) -> "ModelConfig":
        data = dict(data)
        for key, ctor in (
            ("frame", FrameConfig),
            ("frame_net", FrameNetConfig),
            ("encoder", EncoderConfig),
            ("decoder", DecoderConfig),
            ("projection", ProjectionConfig),
            ("optim", OptimConfig),
        ):
            if key in data and isinstance(data[key], dict):
                sub = data[key]
                for name, value in sub.items():
                    if isinstance(value, list):
                        sub[name] = tuple(value)
                data[key] = ctor(**sub)
        return ModelConfig(**data)


def preset_config(name: str, **overrides) -> ModelConfig:
    """Build a named configuration.

    ``T`` and ``B`` are the published presets; ``desk`` is a small CPU-scale
    variant for tests and demos.
    """
    if name == "T":
        cfg = ModelConfig(
            preset="T",
            frame_net=FrameNetConfig(embed_dim=512),
            encoder=EncoderConfig(dim=512, depth=4, heads=8),
            decoder=DecoderConfig(dim=192, depth=1, heads=8),
            projection=ProjectionConfig(input_dim=512, hidden=(1024, 512)),
        )
    elif name == "B":
        cfg = ModelConfig(
            preset="B",
            frame_net=FrameNetConfig(embed_dim=768),
            encoder=EncoderConfig(dim=768, depth=4, heads=8),
            decoder=DecoderConfig(dim=256, depth=3, heads=8),
            projection=ProjectionConfig(input_dim=768, hidden=(1024, 512)),
        )
    elif name == "desk":
        cfg = ModelConfig(
            preset="desk",
            frame_net=FrameNetConfig(embed_dim=64, channels=16),
            encoder=EncoderConfig(dim=64, depth=2, heads=4),
            decoder=DecoderConfig(dim=32, depth=1, heads=4),
            projection=ProjectionConfig(input_dim=64, hidden=(128, 64)),
            optim=OptimConfig(lr=1e-3, epochs=5, batch_size=64),
        )
    else:
        raise ConfigError(f"unknown preset {name!r}")
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


@dataclass
class LossBundle:
    l_rec1: float
    l_rec2: float
    l_contra: float
    l_total: float

    def check_identity(self, alpha: float, tol: float = 1e-6) -> bool:
        expected = 0.5 * (self.l_rec1 + self.l_rec2) + alpha * self.l_contra
        return abs(self.l_total - expected) <= tol * max(1.0, abs(expected))


def mask_rng(seed: int, sample_id: int, path_id: int) -> np.random.Generator:
    """Per-(sample, path) RNG stream, independent of worker scheduling."""
    return np.random.Generator(
        np.random.Philox(key=seed, counter=[sample_id, path_id, 0, 0])
    )


class SSLModel(nn.Module):
    """Shared frame network + encoder/decoder + projection head."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.frame_net = FrameNet(cfg.frame_net)
        self.encoder = MaskedEncoder(cfg.frame_net.embed_dim, cfg.encoder)
        self.decoder = MaskedDecoder(
            cfg.frame_net.embed_dim, cfg.encoder.dim, cfg.decoder
        )
        self.projector = ProjectionHead(cfg.projection)

    # -- helpers ----------------------------------------------------------

    def frame_embeddings(self, epochs: torch.Tensor) -> torch.Tensor:
        """Epochs (B, epoch_len) -> frame embeddings (B, M, embed_dim)."""
        frames = epochs.unfold(-1, self.cfg.frame.frame_len, self.cfg.frame.step)
        b, m, flen = frames.shape
        z = self.frame_net(frames.reshape(b * m, flen))
        return z.reshape(b, m, -1)

    def _encode_plans(
        self, z: torch.Tensor, plans: list[MaskPlan]
    ) -> torch.Tensor:
        kept_idx = torch.as_tensor([p.kept for p in plans], device=z.device)
        z_kept = torch.gather(
            z, 1, kept_idx.unsqueeze(-1).expand(-1, -1, z.shape[-1])
        )
        return self.encoder(z_kept, kept_idx)

    def masked_path(
        self, z: torch.Tensor, plans: list[MaskPlan]
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Run one masked path; returns (class tokens, reconstruction loss)."""
        tokens = self._encode_plans(z, plans)
        cls = tokens[:, 0]
        r = self.decoder(tokens[:, 1:], plans)
        l_rec = reconstruction_loss(z, r, plans, self.cfg.stopgrad_targets)
        return cls, l_rec

    # -- training and inference entry points ------------------------------

    def sample_plans(
        self, batch_size: int, num_frames: int, sample_ids: list[int] | None,
        path_id: int,
    ) -> list[MaskPlan]:
        ids = sample_ids if sample_ids is not None else list(range(batch_size))
        return [
            sample_mask(
                num_frames, self.cfg.mask_ratio,
                mask_rng(self.cfg.seed, sid, path_id),
            )
            for sid in ids
        ]

    def ssl_losses(
        self, epochs: torch.Tensor, sample_ids: list[int] | None = None
    ) -> tuple[torch.Tensor, LossBundle]:
        """Compute the combined loss for one batch of raw epochs."""
        if epochs.shape[0] < 2:
            raise ConfigError("SSL step needs batch size >= 2")
        z = self.frame_embeddings(epochs)
        m = z.shape[1]
        plans1 = self.sample_plans(epochs.shape[0], m, sample_ids, path_id=1)
        plans2 = self.sample_plans(epochs.shape[0], m, sample_ids, path_id=2)
        cls1, l_rec1 = self.masked_path(z, plans1)
        cls2, l_rec2 = self.masked_path(z, plans2)
        c1 = self.projector(cls1)
        c2 = self.projector(cls2)
        l_contra = nt_xent(c1, c2, self.cfg.tau)
        total = 0.5 * (l_rec1 + l_rec2) + self.cfg.alpha * l_contra
        bundle = LossBundle(
            l_rec1=l_rec1.detach().item(), l_rec2=l_rec2.detach().item(),
            l_contra=l_contra.detach().item(), l_total=total.detach().item(),
        )
        return total, bundle

    @torch.no_grad()
    def embed_epochs(self, epochs: torch.Tensor) -> torch.Tensor:
        """Class-token embedding of each epoch using the FULL frame set."""
        was_training = self.training
        self.eval()
        try:
            z = self.frame_embeddings(epochs)
            positions = torch.arange(z.shape[1], device=z.device)
            tokens = self.encoder(z, positions)
            return tokens[:, 0]
        finally:
            self.train(was_training)

    def encode_tokens(self, epochs: torch.Tensor) -> torch.Tensor:
        """Differentiable full-sequence encoding; returns (B, M+1, dim)."""
        z = self.frame_embeddings(epochs)
        positions = torch.arange(z.shape[1], device=z.device)
        return self.encoder(z, positions)
