"""Five single-channel EEG augmentations.

These feed the baseline contrastive harness and robustness tests; the SSL
objective itself does not use them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import ConfigError

#: Candidate bands (Hz) for the random bandpass augmentation.
DEFAULT_BANDS = (
    (1.0, 4.0),    # delta
    (4.0, 8.0),    # theta
    (8.0, 13.0),   # alpha
    (13.0, 30.0),  # beta
    (1.0, 50.0),   # broadband
)


@dataclass(frozen=True)
class GaussianNoise:
    sigma_scale: float = 0.05  # noise std as a fraction of the signal std

    def __post_init__(self):
        if self.sigma_scale <= 0:
            raise ConfigError("sigma_scale must be positive")


@dataclass(frozen=True)
class RandomCrop:
    min_frac: float = 0.5

    def __post_init__(self):
        if not 0 < self.min_frac < 1:
            raise ConfigError("min_frac must lie in (0, 1)")


@dataclass(frozen=True)
class RandomBandpass:
    bands: tuple[tuple[float, float], ...] = DEFAULT_BANDS
    sample_rate: float = 100.0

    def __post_init__(self):
        if not self.bands:
            raise ConfigError("need at least one band")


@dataclass(frozen=True)
class TemporalCutout:
    max_frac: float = 0.25

    def __post_init__(self):
        if not 0 < self.max_frac < 1:
            raise ConfigError("max_frac must lie in (0, 1)")


@dataclass(frozen=True)
class Permutation:
    segments_range: tuple[int, int] = (4, 8)

    def __post_init__(self):
        lo, hi = self.segments_range
        if lo < 2 or hi < lo:
            raise ConfigError("segment range must satisfy 2 <= lo <= hi")


AugmentationKind = GaussianNoise | RandomCrop | RandomBandpass | TemporalCutout | Permutation


def apply(epoch: np.ndarray, kind: AugmentationKind,
          rng: np.random.Generator) -> np.ndarray:
    """Apply one augmentation; output length always equals input length."""
    x = np.asarray(epoch, dtype=np.float64)
    n = x.size
    if isinstance(kind, GaussianNoise):
        sigma = kind.sigma_scale * max(x.std(), 1e-12)
        return x + rng.normal(0.0, sigma, size=n)
    if isinstance(kind, RandomCrop):
        length = int(rng.uniform(kind.min_frac, 1.0) * n)
        length = max(2, min(n, length))
        start = rng.integers(0, n - length + 1)
        crop = x[start : start + length]
        return np.interp(
            np.linspace(0, length - 1, n), np.arange(length), crop
        )
    if isinstance(kind, RandomBandpass):
        low, high = kind.bands[rng.integers(0, len(kind.bands))]
        nyq = kind.sample_rate / 2
        sos = sps.butter(
            4, [low, min(high, 0.99 * nyq)], btype="bandpass",
            fs=kind.sample_rate, output="sos",
        )
        return sps.sosfiltfilt(sos, x)
    if isinstance(kind, TemporalCutout):
        length = max(1, int(rng.uniform(0, kind.max_frac) * n))
        start = rng.integers(0, n - length + 1)
        out = x.copy()
        out[start : start + length] = x.mean()
        return out
    if isinstance(kind, Permutation):
        lo, hi = kind.segments_range
        k = int(rng.integers(lo, hi + 1))
        bounds = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False))
        pieces = np.split(x, bounds)
        order = rng.permutation(len(pieces))
        return np.concatenate([pieces[i] for i in order])
    raise ConfigError(f"unknown augmentation {kind!r}")


def random_view(epoch: np.ndarray, rng: np.random.Generator,
                kinds: tuple[AugmentationKind, ...] | None = None) -> np.ndarray:
    """Compose two distinct randomly chosen augmentations, in sampled order."""
    pool = kinds if kinds is not None else (
        GaussianNoise(), RandomCrop(), RandomBandpass(), TemporalCutout(),
        Permutation(),
    )
    picked = rng.choice(len(pool), size=2, replace=False)
    out = epoch
    for i in picked:
        out = apply(out, pool[int(i)], rng)
    return out
