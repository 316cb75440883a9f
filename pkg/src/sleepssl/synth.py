"""Deterministic synthetic sleep-EEG generator.

Each stage has a spectral recipe (band-limited noise on a pink background),
loosely following the classical band conventions: slow delta activity for
deep sleep, alpha for wake, and so on. Stages are drawn i.i.d. or from a
Markov chain so that temporal context can be made informative on purpose.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .edf import RecordingHeader, SignalSpec, StageLabel, physical_to_digital, write_edf
from .errors import ConfigError
from .preprocess import EPOCH_SAMPLES, EPOCH_SECONDS, TARGET_RATE, StagedRecording

STAGE_TOKENS = ("W", "N1", "N2", "N3", "REM")


@dataclass(frozen=True)
class StageRecipe:
    center_hz: float
    width_hz: float
    amplitude: float


@dataclass
class SynthSpec:
    recipes: tuple[StageRecipe, ...]
    subjects: int = 20
    epochs_per_subject: int = 120
    seed: int = 0
    pink_scale: float = 0.3
    transition: np.ndarray | None = None  # (5, 5) row-stochastic, or None for i.i.d.
    stage_probs: tuple[float, ...] = (0.2, 0.2, 0.2, 0.2, 0.2)

    def __post_init__(self):
        if len(self.recipes) != 5:
            raise ConfigError("need exactly 5 stage recipes")
        if self.transition is not None:
            t = np.asarray(self.transition, dtype=np.float64)
            if t.shape != (5, 5) or (t < 0).any() or not np.allclose(t.sum(1), 1.0):
                raise ConfigError("transition matrix must be 5x5 row-stochastic")
            self.transition = t


def default_iid_spec(**overrides) -> SynthSpec:
    """Five well-separated spectral recipes, stages drawn i.i.d."""
    recipes = (
        StageRecipe(10.0, 2.0, 1.0),   # Wake: alpha-dominant
        StageRecipe(6.0, 2.0, 1.0),    # N1: theta
        StageRecipe(14.0, 2.0, 1.2),   # N2: spindle band
        StageRecipe(1.8, 1.2, 1.6),    # N3: delta-dominant
        StageRecipe(25.0, 6.0, 0.9),   # REM: beta
    )
    return SynthSpec(recipes=recipes, **overrides)


def markov_spec(**overrides) -> SynthSpec:
    """Stages follow a Markov chain and two stages share a recipe.

    N1 and REM emit identical signals, so a single epoch cannot separate
    them; the chain, however, only reaches N1 from Wake/N1 and REM from
    N2/REM, which makes preceding context decisive.
    """
    shared = StageRecipe(6.0, 2.0, 1.0)
    recipes = (
        StageRecipe(10.0, 2.0, 1.0),   # Wake
        shared,                        # N1 (ambiguous with REM)
        StageRecipe(14.0, 2.0, 1.2),   # N2
        StageRecipe(1.8, 1.2, 1.6),    # N3
        shared,                        # REM (ambiguous with N1)
    )
    transition = np.array(
        [
            #  W    N1    N2    N3   REM
            [0.55, 0.45, 0.00, 0.00, 0.00],  # from Wake
            [0.00, 0.50, 0.50, 0.00, 0.00],  # from N1
            [0.00, 0.00, 0.55, 0.20, 0.25],  # from N2
            [0.00, 0.00, 0.30, 0.70, 0.00],  # from N3
            [0.40, 0.00, 0.00, 0.00, 0.60],  # from REM
        ]
    )
    return SynthSpec(recipes=recipes, transition=transition, **overrides)


def _pink_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / TARGET_RATE)
    freqs[0] = freqs[1]
    shaped = np.fft.irfft(spectrum / np.sqrt(freqs), n=n)
    std = shaped.std()
    return shaped / std if std > 0 else shaped


def _band_noise(recipe: StageRecipe, n: int, rng: np.random.Generator) -> np.ndarray:
    low = max(0.2, recipe.center_hz - recipe.width_hz / 2)
    high = min(recipe.center_hz + recipe.width_hz / 2, 0.99 * TARGET_RATE / 2)
    sos = sps.butter(4, [low, high], btype="bandpass", fs=TARGET_RATE, output="sos")
    shaped = sps.sosfiltfilt(sos, rng.standard_normal(n))
    std = shaped.std()
    return shaped / std if std > 0 else shaped


def synth_epoch(recipe: StageRecipe, rng: np.random.Generator,
                pink_scale: float) -> np.ndarray:
    return (
        recipe.amplitude * _band_noise(recipe, EPOCH_SAMPLES, rng)
        + pink_scale * _pink_noise(EPOCH_SAMPLES, rng)
    )


def _draw_stages(spec: SynthSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if spec.transition is None:
        return rng.choice(5, size=n, p=np.asarray(spec.stage_probs))
    stages = np.empty(n, dtype=np.int64)
    stages[0] = rng.choice(5, p=np.asarray(spec.stage_probs))
    for t in range(1, n):
        stages[t] = rng.choice(5, p=spec.transition[stages[t - 1]])
    return stages


def generate(spec: SynthSpec) -> list[StagedRecording]:
    """Generate one StagedRecording per synthetic subject, reproducibly."""
    recordings = []
    for subject in range(spec.subjects):
        rng = np.random.default_rng([spec.seed, subject])
        stages = _draw_stages(spec, spec.epochs_per_subject, rng)
        epochs = np.stack(
            [
                synth_epoch(spec.recipes[int(s)], rng, spec.pink_scale)
                for s in stages
            ]
        )
        recordings.append(
            StagedRecording(
                subject_id=f"synth-{subject:03d}",
                sample_rate=TARGET_RATE,
                epochs=epochs.astype(np.float32),
                labels=stages.astype(np.uint8),
                provenance={"generator": "synthetic", "seed": spec.seed,
                            "markov": spec.transition is not None},
            )
        )
    return recordings


def export_edf(recording: StagedRecording, directory: str | Path,
               channel_label: str = "EEG Fpz-Cz") -> tuple[Path, Path]:
    """Write a recording as an EDF file plus an ``onset_sec,stage`` CSV."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    flat = recording.epochs.astype(np.float64).reshape(-1)
    peak = max(float(np.abs(flat).max()), 1e-6) * 1.01
    spec = SignalSpec(
        label=channel_label,
        physical_min=-peak,
        physical_max=peak,
        samples_per_record=TARGET_RATE * EPOCH_SECONDS,
    )
    header = RecordingHeader(
        patient_id=recording.subject_id,
        recording_id="synthetic",
        num_data_records=recording.n_epochs,
        record_duration=float(EPOCH_SECONDS),
        signals=[spec],
    )
    edf_path = directory / f"{recording.subject_id}.edf"
    edf_path.write_bytes(write_edf(header, [physical_to_digital(spec, flat)]))
    csv_path = directory / f"{recording.subject_id}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["onset_sec", "stage"])
        for e, label in enumerate(recording.labels):
            writer.writerow([e * EPOCH_SECONDS, STAGE_TOKENS[int(label)]])
    return edf_path, csv_path
