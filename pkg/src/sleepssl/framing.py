"""Sliding-window framing of 30 s epochs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class FrameConfig:
    """Sliding-window geometry, expressed in integer samples.

    Defaults are a 3 s frame moved by 0.75 s at 100 Hz.
    """

    frame_len: int = 300
    step: int = 75

    def __post_init__(self):
        if self.step <= 0 or self.frame_len <= 0:
            raise ConfigError("frame_len and step must be positive")
        if self.step > self.frame_len:
            raise ConfigError("step must not exceed frame_len")

    def num_frames(self, epoch_len: int) -> int:
        if self.frame_len > epoch_len:
            raise ConfigError(
                f"frame_len {self.frame_len} exceeds epoch length {epoch_len}"
            )
        return (epoch_len - self.frame_len) // self.step + 1


@dataclass
class FrameSequence:
    """The overlapping frames cut from one epoch."""

    frames: np.ndarray  # (M, frame_len)
    epoch_index: int = 0

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])


def frame_epoch(
    epoch: np.ndarray, cfg: FrameConfig, epoch_index: int = 0
) -> FrameSequence:
    """Cut an epoch into M = floor((len - frame_len)/step) + 1 frames.

    Frame m covers samples [m*step, m*step + frame_len); no padding.
    """
    epoch = np.asarray(epoch)
    if epoch.ndim != 1:
        raise ConfigError("epoch must be one-dimensional")
    m = cfg.num_frames(epoch.shape[0])
    starts = np.arange(m) * cfg.step
    frames = np.stack([epoch[s : s + cfg.frame_len] for s in starts])
    return FrameSequence(frames=frames, epoch_index=epoch_index)


def frame_batch(epochs: np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Frame a batch of epochs at once; returns (batch, M, frame_len)."""
    epochs = np.asarray(epochs)
    m = cfg.num_frames(epochs.shape[-1])
    view = np.lib.stride_tricks.sliding_window_view(epochs, cfg.frame_len, axis=-1)
    return np.ascontiguousarray(view[..., :: cfg.step, :][..., :m, :])
