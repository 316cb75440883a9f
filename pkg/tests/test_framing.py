"""Sliding-window framing of 30 s epochs."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sleepssl.errors import ConfigError
from sleepssl.framing import FrameConfig, frame_batch, frame_epoch
from sleepssl.preprocess import EPOCH_SAMPLES


class TestFrameConfig:
    def test_default_geometry(self):
        cfg = FrameConfig()
        assert cfg.frame_len == 300
        assert cfg.step == 75
        assert cfg.num_frames(EPOCH_SAMPLES) == 37

    def test_half_overlap_geometry(self):
        assert FrameConfig(frame_len=300, step=150).num_frames(EPOCH_SAMPLES) == 19

    def test_formula_oracle(self):
        # Brute-force enumeration of window start offsets.
        for frame_len, step in [(300, 75), (300, 150), (400, 100), (500, 125)]:
            cfg = FrameConfig(frame_len=frame_len, step=step)
            starts = [
                s for s in range(0, EPOCH_SAMPLES, 1)
                if s % step == 0 and s + frame_len <= EPOCH_SAMPLES
            ]
            assert cfg.num_frames(EPOCH_SAMPLES) == len(starts)

    @settings(max_examples=100, deadline=None)
    @given(
        st.integers(min_value=1, max_value=500),
        st.integers(min_value=1, max_value=500),
    )
    def test_formula_property(self, frame_len, step):
        step = min(step, frame_len)
        cfg = FrameConfig(frame_len=frame_len, step=step)
        n = cfg.num_frames(EPOCH_SAMPLES)
        starts = list(range(0, EPOCH_SAMPLES - frame_len + 1, step))
        assert n == len(starts)

    def test_invalid_rejected(self):
        with pytest.raises(ConfigError):
            FrameConfig(frame_len=0, step=75)
        with pytest.raises(ConfigError):
            FrameConfig(frame_len=300, step=0)


class TestFrameEpoch:
    def test_values_match_slices(self, rng):
        epoch = rng.normal(size=EPOCH_SAMPLES).astype(np.float32)
        cfg = FrameConfig()
        frames = frame_epoch(epoch, cfg).frames
        assert frames.shape == (37, 300)
        for i in range(37):
            start = i * cfg.step
            np.testing.assert_array_equal(frames[i], epoch[start : start + 300])

    def test_too_short_epoch_rejected(self, rng):
        with pytest.raises(ConfigError):
            frame_epoch(rng.normal(size=100).astype(np.float32), FrameConfig())


class TestFrameBatch:
    def test_matches_per_epoch(self, rng):
        epochs = rng.normal(size=(4, EPOCH_SAMPLES)).astype(np.float32)
        cfg = FrameConfig(frame_len=300, step=150)
        batch = frame_batch(epochs, cfg)
        assert batch.shape == (4, 19, 300)
        for b in range(4):
            np.testing.assert_array_equal(
                batch[b], frame_epoch(epochs[b], cfg).frames
            )
