"""Stochastic signal views used for contrastive pair generation."""

import numpy as np
import pytest

from sleepssl.augment import (
    DEFAULT_BANDS,
    GaussianNoise,
    Permutation,
    RandomBandpass,
    RandomCrop,
    TemporalCutout,
    apply,
    random_view,
)
from sleepssl.errors import ConfigError
from sleepssl.preprocess import EPOCH_SAMPLES

KINDS = [
    GaussianNoise(),
    RandomCrop(),
    RandomBandpass(),
    TemporalCutout(),
    Permutation(),
]


@pytest.fixture
def epoch(rng):
    return rng.normal(size=EPOCH_SAMPLES).astype(np.float32)


class TestApply:
    @pytest.mark.parametrize("kind", KINDS, ids=lambda k: type(k).__name__)
    def test_length_preserved(self, epoch, rng, kind):
        out = apply(epoch, kind, rng)
        assert out.shape == epoch.shape
        assert np.isfinite(out).all()

    @pytest.mark.parametrize("kind", KINDS, ids=lambda k: type(k).__name__)
    def test_deterministic_given_rng(self, epoch, kind):
        a = apply(epoch, kind, np.random.default_rng(5))
        b = apply(epoch, kind, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("kind", KINDS, ids=lambda k: type(k).__name__)
    def test_modifies_signal(self, epoch, rng, kind):
        out = apply(epoch, kind, rng)
        assert not np.array_equal(out, epoch)

    def test_input_not_mutated(self, epoch, rng):
        original = epoch.copy()
        apply(epoch, TemporalCutout(), rng)
        np.testing.assert_array_equal(epoch, original)

    def test_cutout_blanks_contiguous_run(self, epoch, rng):
        out = apply(epoch, TemporalCutout(max_frac=0.25), rng)
        mean = np.asarray(epoch, dtype=np.float64).mean()
        blanked = np.flatnonzero(out == mean)
        assert 0 < len(blanked) <= EPOCH_SAMPLES // 4 + 1
        assert np.all(np.diff(blanked) == 1)

    def test_permutation_preserves_multiset(self, epoch, rng):
        out = apply(epoch, Permutation(), rng)
        np.testing.assert_allclose(np.sort(out), np.sort(epoch), rtol=1e-6)

    def test_bandpass_bands_valid(self):
        for low, high in DEFAULT_BANDS:
            assert 0 < low < high <= 50.0


class TestValidation:
    def test_bad_parameters_rejected(self):
        with pytest.raises(ConfigError):
            GaussianNoise(sigma_scale=-1.0)
        with pytest.raises(ConfigError):
            RandomCrop(min_frac=1.5)
        with pytest.raises(ConfigError):
            TemporalCutout(max_frac=0.0)
        with pytest.raises(ConfigError):
            Permutation(segments_range=(5, 2))


class TestRandomView:
    def test_two_distinct_kinds(self, epoch):
        rng = np.random.default_rng(0)
        out = random_view(epoch, rng)
        assert out.shape == epoch.shape
        assert not np.array_equal(out, epoch)

    def test_deterministic(self, epoch):
        a = random_view(epoch, np.random.default_rng(9))
        b = random_view(epoch, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)
