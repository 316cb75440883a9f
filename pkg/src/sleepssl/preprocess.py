"""Signal preprocessing: bandpass, resampling, epoching, normalisation, cache.

The pipeline mirrors standard sleep-EEG preparation: bandpass 1-50 Hz,
resample to 100 Hz, cut 30 s epochs anchored at recording start, merge/drop
raw stage tokens, and optionally z-normalise per recording.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .edf import StageLabel, map_stage_token
from .errors import DegenerateSignal, IoError, UnsupportedRate

TARGET_RATE = 100
EPOCH_SECONDS = 30
EPOCH_SAMPLES = TARGET_RATE * EPOCH_SECONDS
BAND_LOW_HZ = 1.0
BAND_HIGH_HZ = 50.0
FILTER_ORDER = 5


@dataclass
class StagedRecording:
    """A preprocessed recording: 30 s epochs with one stage label each."""

    subject_id: str
    sample_rate: int
    epochs: np.ndarray  # (n_epochs, EPOCH_SAMPLES) float32
    labels: np.ndarray  # (n_epochs,) uint8, StageLabel values
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.epochs = np.ascontiguousarray(self.epochs, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.epochs.shape[0] != self.labels.shape[0]:
            raise ValueError("epochs/labels length mismatch")

    @property
    def n_epochs(self) -> int:
        return int(self.epochs.shape[0])


def bandpass_sos(source_rate: float) -> np.ndarray:
    """Design the 5th-order Butterworth bandpass for the given rate."""
    nyquist = source_rate / 2.0
    high = min(BAND_HIGH_HZ, 0.995 * nyquist)
    return sps.butter(
        FILTER_ORDER, [BAND_LOW_HZ, high], btype="bandpass", fs=source_rate, output="sos"
    )


def preprocess(samples: np.ndarray, source_rate: float) -> np.ndarray:
    """Bandpass 1-50 Hz (zero-phase) then resample to 100 Hz.

    Output length is round(input_seconds * 100). Rates below 100 Hz are
    rejected: their Nyquist sits under the upper band edge.
    """
    if source_rate < TARGET_RATE:
        raise UnsupportedRate(f"source rate {source_rate} Hz < {TARGET_RATE} Hz")
    x = np.asarray(samples, dtype=np.float64)
    if x.size < source_rate:
        raise ValueError("signal shorter than 1 s")
    filtered = sps.sosfiltfilt(bandpass_sos(source_rate), x)
    ratio = Fraction(TARGET_RATE, int(round(source_rate)))
    if ratio == 1:
        return filtered
    return sps.resample_poly(filtered, ratio.numerator, ratio.denominator)


def cut_epochs(
    samples: np.ndarray, raw_tokens: list[str]
) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Cut 100 Hz samples into 30 s epochs and harmonise their labels.

    Epochs whose raw token maps to "drop" are removed together with their
    signal; a partial trailing epoch is discarded. Returns (epochs, labels,
    dropped_indices).
    """
    n_full = samples.size // EPOCH_SAMPLES
    n = min(n_full, len(raw_tokens))
    kept_epochs = []
    kept_labels = []
    dropped = []
    for e in range(n):
        label = map_stage_token(raw_tokens[e])
        if label is None:
            dropped.append(e)
            continue
        kept_epochs.append(samples[e * EPOCH_SAMPLES : (e + 1) * EPOCH_SAMPLES])
        kept_labels.append(int(label))
    epochs = (
        np.stack(kept_epochs).astype(np.float32)
        if kept_epochs
        else np.empty((0, EPOCH_SAMPLES), dtype=np.float32)
    )
    return epochs, np.asarray(kept_labels, dtype=np.uint8), dropped


def build_recording(
    subject_id: str,
    samples: np.ndarray,
    source_rate: float,
    raw_tokens: list[str],
) -> StagedRecording:
    """Full preprocessing path from raw samples to a StagedRecording."""
    processed = preprocess(samples, source_rate)
    epochs, labels, dropped = cut_epochs(processed, raw_tokens)
    ratio = Fraction(TARGET_RATE, int(round(source_rate)))
    return StagedRecording(
        subject_id=subject_id,
        sample_rate=TARGET_RATE,
        epochs=epochs,
        labels=labels,
        provenance={
            "filter": f"butterworth-{FILTER_ORDER}-zerophase",
            "band_hz": [BAND_LOW_HZ, BAND_HIGH_HZ],
            "resample_ratio": [ratio.numerator, ratio.denominator],
            "source_rate": source_rate,
            "dropped_epochs": dropped,
        },
    )


def z_normalize(recording: StagedRecording) -> StagedRecording:
    """Return a copy normalised to zero mean / unit std over all samples."""
    if recording.n_epochs == 0:
        raise DegenerateSignal("empty recording")
    flat = recording.epochs.astype(np.float64)
    mean = flat.mean()
    std = flat.std()
    if std < 1e-12:
        raise DegenerateSignal("zero-variance recording")
    normed = ((flat - mean) / std).astype(np.float32)
    provenance = dict(recording.provenance)
    provenance["znorm"] = {"mean": float(mean), "std": float(std)}
    return StagedRecording(
        subject_id=recording.subject_id,
        sample_rate=recording.sample_rate,
        epochs=normed,
        labels=recording.labels.copy(),
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# Cache container: epochs matrix + label bytes + JSON sidecar per recording
# ---------------------------------------------------------------------------


def save_recording(recording: StagedRecording, directory: str | Path) -> Path:
    """Write one binary container plus a JSON provenance sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    base = directory / recording.subject_id
    with open(base.with_suffix(".npz"), "wb") as fh:
        np.savez(
            fh,
            epochs=recording.epochs.astype(np.float32),
            labels=recording.labels.astype(np.uint8),
        )
    sidecar = {
        "subject_id": recording.subject_id,
        "sample_rate": recording.sample_rate,
        "n_epochs": recording.n_epochs,
        **recording.provenance,
    }
    base.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))
    return base.with_suffix(".npz")


def load_recording(path: str | Path) -> StagedRecording:
    path = Path(path)
    if not path.exists():
        raise IoError(f"missing cache file: {path}")
    with np.load(path) as data:
        epochs = data["epochs"]
        labels = data["labels"]
    sidecar_path = path.with_suffix(".json")
    provenance = {}
    subject_id = path.stem
    sample_rate = TARGET_RATE
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text())
        subject_id = sidecar.pop("subject_id", subject_id)
        sample_rate = sidecar.pop("sample_rate", sample_rate)
        sidecar.pop("n_epochs", None)
        provenance = sidecar
    return StagedRecording(
        subject_id=subject_id,
        sample_rate=sample_rate,
        epochs=epochs,
        labels=labels,
        provenance=provenance,
    )


def load_dataset(directory: str | Path) -> list[StagedRecording]:
    """Load every cached recording under a directory, sorted by subject id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IoError(f"missing cache directory: {directory}")
    return [load_recording(p) for p in sorted(directory.glob("*.npz"))]


__all__ = [
    "EPOCH_SAMPLES",
    "EPOCH_SECONDS",
    "TARGET_RATE",
    "StagedRecording",
    "StageLabel",
    "bandpass_sos",
    "build_recording",
    "cut_epochs",
    "load_dataset",
    "load_recording",
    "preprocess",
    "save_recording",
    "z_normalize",
]
