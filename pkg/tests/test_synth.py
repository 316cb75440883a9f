"""Synthetic data generator: spectra, stage dynamics, determinism, EDF export."""

import numpy as np
import pytest

from sleepssl.edf import parse_edf
from sleepssl.errors import ConfigError
from sleepssl.preprocess import EPOCH_SAMPLES, TARGET_RATE
from sleepssl.synth import (
    StageRecipe,
    SynthSpec,
    default_iid_spec,
    export_edf,
    generate,
    markov_spec,
    synth_epoch,
)


def dominant_freq(epoch):
    spectrum = np.abs(np.fft.rfft(epoch))
    freqs = np.fft.rfftfreq(len(epoch), 1 / TARGET_RATE)
    sel = freqs >= 0.5  # skip DC / drift
    return freqs[sel][np.argmax(spectrum[sel])]


class TestRecipes:
    def test_epoch_shape(self, rng):
        epoch = synth_epoch(StageRecipe(10.0, 2.0, 1.0), rng, pink_scale=0.3)
        assert epoch.shape == (EPOCH_SAMPLES,)

    def test_spectral_peak_near_center(self, rng):
        for center in (6.0, 10.0, 14.0):
            peaks = [
                dominant_freq(synth_epoch(StageRecipe(center, 1.5, 1.0), rng, 0.1))
                for _ in range(10)
            ]
            assert abs(np.median(peaks) - center) < 2.5


class TestIIDSpec:
    def test_default_shape(self):
        recs = generate(default_iid_spec(subjects=3, epochs_per_subject=8))
        assert len(recs) == 3
        for rec in recs:
            assert rec.epochs.shape == (8, EPOCH_SAMPLES)
            assert rec.labels.shape == (8,)
            assert set(rec.labels) <= {0, 1, 2, 3, 4}

    def test_deterministic(self):
        a = generate(default_iid_spec(subjects=2, epochs_per_subject=5, seed=3))
        b = generate(default_iid_spec(subjects=2, epochs_per_subject=5, seed=3))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.epochs, y.epochs)
            np.testing.assert_array_equal(x.labels, y.labels)

    def test_seed_changes_data(self):
        a = generate(default_iid_spec(subjects=1, epochs_per_subject=5, seed=0))
        b = generate(default_iid_spec(subjects=1, epochs_per_subject=5, seed=1))
        assert not np.array_equal(a[0].epochs, b[0].epochs)

    def test_stages_separable_in_spectrum(self):
        # The five i.i.d. recipes occupy distinct bands; the dominant
        # frequency alone should cluster by label.
        recs = generate(default_iid_spec(subjects=2, epochs_per_subject=40, seed=0))
        centers = {0: 10.0, 1: 6.0, 2: 14.0, 3: 1.8, 4: 25.0}
        hits = 0
        total = 0
        for rec in recs:
            for epoch, label in zip(rec.epochs, rec.labels):
                peak = dominant_freq(epoch)
                nearest = min(centers, key=lambda c: abs(centers[c] - peak))
                hits += nearest == label
                total += 1
        assert hits / total > 0.7


class TestMarkovSpec:
    def test_transitions_respected(self):
        spec = markov_spec(subjects=4, epochs_per_subject=200, seed=0)
        transition = np.asarray(spec.transition)
        recs = generate(spec)
        for rec in recs:
            for prev, cur in zip(rec.labels[:-1], rec.labels[1:]):
                assert transition[prev, cur] > 0, (prev, cur)

    def test_n1_rem_share_recipe(self):
        spec = markov_spec()
        assert spec.recipes[1] == spec.recipes[4]

    def test_n1_only_after_wake_or_n1(self):
        transition = np.asarray(markov_spec().transition)
        # Column N1 reachable only from W/N1; REM only from N2/REM.
        assert (transition[2:, 1] == 0).all()
        assert transition[0, 4] == 0 and transition[1, 4] == 0 and transition[3, 4] == 0
        np.testing.assert_allclose(transition.sum(axis=1), 1.0)


class TestSpecValidation:
    def test_needs_five_recipes(self):
        with pytest.raises(ConfigError):
            SynthSpec(recipes=(StageRecipe(1, 1, 1),) * 3, subjects=1,
                      epochs_per_subject=1, seed=0)

    def test_bad_transition_rejected(self):
        rows = np.full((5, 5), 0.2)
        rows[0, 0] = 0.9  # row no longer sums to 1
        with pytest.raises(ConfigError):
            SynthSpec(
                recipes=default_iid_spec().recipes,
                subjects=1, epochs_per_subject=1, seed=0,
                transition=tuple(map(tuple, rows)),
            )


class TestEDFExport:
    def test_round_trip_through_parser(self, tmp_path):
        rec = generate(default_iid_spec(subjects=1, epochs_per_subject=4, seed=0))[0]
        export_edf(rec, tmp_path)
        raw = (tmp_path / f"{rec.subject_id}.edf").read_bytes()
        header, signals = parse_edf(raw)
        assert header.num_data_records == 4
        assert header.signals[0].samples_per_record == EPOCH_SAMPLES
        # quantisation error bounded by one digital step
        gain = header.signals[0].gain()
        recovered = signals[0].reshape(4, EPOCH_SAMPLES)
        assert np.abs(recovered - rec.epochs).max() <= gain

    def test_stage_csv_written(self, tmp_path):
        rec = generate(default_iid_spec(subjects=1, epochs_per_subject=3, seed=0))[0]
        export_edf(rec, tmp_path)
        lines = (tmp_path / f"{rec.subject_id}.csv").read_text().strip().splitlines()
        assert lines[0] == "onset_sec,stage"
        assert len(lines) == 4
