"""EDF/EDF+ reading and writing plus sleep-stage annotation parsing.

The reader handles the classic 16-bit EDF layout: a 256-byte fixed header,
256 header bytes per signal, then data records of little-endian two's
complement samples. Stage annotations come either from an EDF+ annotation
signal (TAL records) or from a plain ``onset_sec,stage`` CSV.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import (
    CoverageGap,
    DegenerateCalibration,
    HeaderFieldError,
    ParseError,
    UnknownStage,
)

HEADER_SIZE = 256
PER_SIGNAL_HEADER = 256
ANNOTATION_LABEL = "EDF Annotations"


class StageLabel(IntEnum):
    """The five sleep stages kept after label harmonisation."""

    WAKE = 0
    N1 = 1
    N2 = 2
    N3 = 3
    REM = 4


#: Raw annotation tokens that map into the 5-class label set.
STAGE_TOKEN_MAP = {
    "W": StageLabel.WAKE,
    "WAKE": StageLabel.WAKE,
    "0": StageLabel.WAKE,
    "SLEEP STAGE W": StageLabel.WAKE,
    "N1": StageLabel.N1,
    "1": StageLabel.N1,
    "SLEEP STAGE 1": StageLabel.N1,
    "N2": StageLabel.N2,
    "2": StageLabel.N2,
    "SLEEP STAGE 2": StageLabel.N2,
    "N3": StageLabel.N3,
    "3": StageLabel.N3,
    "SLEEP STAGE 3": StageLabel.N3,
    # N4 is merged into N3.
    "N4": StageLabel.N3,
    "4": StageLabel.N3,
    "SLEEP STAGE 4": StageLabel.N3,
    "R": StageLabel.REM,
    "REM": StageLabel.REM,
    "SLEEP STAGE R": StageLabel.REM,
}

#: Tokens whose epochs are dropped entirely (movement / unscored).
DROP_TOKENS = {
    "M",
    "?",
    "MOVEMENT",
    "MOVEMENT TIME",
    "UNKNOWN",
    "SLEEP STAGE ?",
}


def map_stage_token(token: str) -> StageLabel | None:
    """Map a raw annotation token to a StageLabel, or None if the epoch
    should be dropped. Raises UnknownStage for unrecognised tokens."""
    key = token.strip().upper()
    if key in STAGE_TOKEN_MAP:
        return STAGE_TOKEN_MAP[key]
    if key in DROP_TOKENS:
        return None
    raise UnknownStage(token)


@dataclass
class SignalSpec:
    label: str
    transducer: str = ""
    physical_dim: str = "uV"
    physical_min: float = -1000.0
    physical_max: float = 1000.0
    digital_min: int = -32768
    digital_max: int = 32767
    prefilter: str = ""
    samples_per_record: int = 1

    def gain(self) -> float:
        if self.digital_min == self.digital_max:
            raise DegenerateCalibration(
                f"signal {self.label!r}: digital_min == digital_max"
            )
        return (self.physical_max - self.physical_min) / (
            self.digital_max - self.digital_min
        )

    def to_physical(self, digital: np.ndarray) -> np.ndarray:
        g = self.gain()
        return (digital.astype(np.float64) - self.digital_min) * g + self.physical_min


@dataclass
class RecordingHeader:
    version_tag: str = "0"
    patient_id: str = ""
    recording_id: str = ""
    start_date: str = "01.01.00"
    start_time: str = "00.00.00"
    num_data_records: int = 0
    record_duration: float = 30.0
    signals: list[SignalSpec] = field(default_factory=list)

    @property
    def header_bytes(self) -> int:
        return HEADER_SIZE + PER_SIGNAL_HEADER * len(self.signals)


def _ascii_field(raw: bytes, offset: int, width: int) -> str:
    return raw[offset : offset + width].decode("ascii", errors="replace").strip()


def _int_field(raw: bytes, offset: int, width: int, name: str) -> int:
    text = _ascii_field(raw, offset, width)
    try:
        return int(text)
    except ValueError:
        raise HeaderFieldError(name, text) from None


def _float_field(raw: bytes, offset: int, width: int, name: str) -> float:
    text = _ascii_field(raw, offset, width)
    try:
        return float(text)
    except ValueError:
        raise HeaderFieldError(name, text) from None


def parse_header(raw: bytes) -> RecordingHeader:
    """Parse the fixed and per-signal header blocks."""
    if len(raw) < HEADER_SIZE:
        raise ParseError("truncated fixed header", len(raw))
    header = RecordingHeader(
        version_tag=_ascii_field(raw, 0, 8),
        patient_id=_ascii_field(raw, 8, 80),
        recording_id=_ascii_field(raw, 88, 80),
        start_date=_ascii_field(raw, 168, 8),
        start_time=_ascii_field(raw, 176, 8),
    )
    declared_header_bytes = _int_field(raw, 184, 8, "header_bytes")
    header.num_data_records = _int_field(raw, 236, 8, "num_data_records")
    header.record_duration = _float_field(raw, 244, 8, "record_duration")
    num_signals = _int_field(raw, 252, 4, "num_signals")
    if num_signals < 1:
        raise HeaderFieldError("num_signals", str(num_signals))
    expected = HEADER_SIZE + PER_SIGNAL_HEADER * num_signals
    if declared_header_bytes != expected:
        raise HeaderFieldError("header_bytes", str(declared_header_bytes))
    if len(raw) < expected:
        raise ParseError("truncated signal headers", len(raw))

    # Per-signal headers are stored field-major: all labels, all transducers...
    def column(width: int, base: int) -> list[str]:
        out = []
        for s in range(num_signals):
            off = HEADER_SIZE + base * num_signals + width * s
            out.append(_ascii_field(raw, off, width))
        return out

    labels = column(16, 0)
    transducers = column(80, 16)
    phys_dims = column(8, 96)
    phys_mins = column(8, 104)
    phys_maxs = column(8, 112)
    dig_mins = column(8, 120)
    dig_maxs = column(8, 128)
    prefilters = column(80, 136)
    samples = column(8, 216)
    for s in range(num_signals):
        try:
            spec = SignalSpec(
                label=labels[s],
                transducer=transducers[s],
                physical_dim=phys_dims[s],
                physical_min=float(phys_mins[s]),
                physical_max=float(phys_maxs[s]),
                digital_min=int(dig_mins[s]),
                digital_max=int(dig_maxs[s]),
                prefilter=prefilters[s],
                samples_per_record=int(samples[s]),
            )
        except ValueError as exc:
            raise HeaderFieldError(f"signal[{s}]", str(exc)) from None
        if spec.samples_per_record < 1:
            raise HeaderFieldError(
                f"signal[{s}].samples_per_record", samples[s]
            )
        if spec.physical_min == spec.physical_max:
            raise HeaderFieldError(
                f"signal[{s}].physical_range", f"{phys_mins[s]}..{phys_maxs[s]}"
            )
        header.signals.append(spec)
    return header


def parse_edf(data: bytes) -> tuple[RecordingHeader, list[np.ndarray]]:
    """Parse an EDF byte stream into its header and per-signal physical samples.

    Returns the header and one float64 array per signal, each of length
    ``num_data_records * samples_per_record``, in physical units.
    """
    header = parse_header(data)
    digital = parse_edf_digital(data, header)
    return header, [
        spec.to_physical(d) for spec, d in zip(header.signals, digital)
    ]


def parse_edf_digital(
    data: bytes, header: RecordingHeader | None = None
) -> list[np.ndarray]:
    """Parse raw int16 digital samples, without calibration."""
    if header is None:
        header = parse_header(data)
    offset = header.header_bytes
    per_record = [s.samples_per_record for s in header.signals]
    record_samples = sum(per_record)
    signals: list[list[np.ndarray]] = [[] for _ in header.signals]
    for _ in range(header.num_data_records):
        end = offset + 2 * record_samples
        if end > len(data):
            raise ParseError("truncated data record", len(data))
        block = np.frombuffer(data, dtype="<i2", count=record_samples, offset=offset)
        pos = 0
        for s, n in enumerate(per_record):
            signals[s].append(block[pos : pos + n])
            pos += n
        offset = end
    return [
        np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int16)
        for chunks in signals
    ]


def _fmt(value, width: int) -> bytes:
    text = str(value)
    if len(text) > width:
        # Shorten floats that overflow their fixed-width slot.
        text = f"{float(value):.{max(0, width - 3)}g}"[:width]
    return text.ljust(width).encode("ascii")


def write_edf(
    header: RecordingHeader, digital_signals: list[np.ndarray]
) -> bytes:
    """Serialise digital samples and header into EDF bytes.

    ``digital_signals[s]`` must hold ``num_data_records * samples_per_record``
    int16 values for signal ``s``.
    """
    ns = len(header.signals)
    if len(digital_signals) != ns:
        raise ValueError("signal count mismatch")
    buf = io.BytesIO()
    buf.write(_fmt(header.version_tag, 8))
    buf.write(_fmt(header.patient_id, 80))
    buf.write(_fmt(header.recording_id, 80))
    buf.write(_fmt(header.start_date, 8))
    buf.write(_fmt(header.start_time, 8))
    buf.write(_fmt(header.header_bytes, 8))
    buf.write(_fmt("", 44))
    buf.write(_fmt(header.num_data_records, 8))
    duration = header.record_duration
    buf.write(_fmt(int(duration) if duration == int(duration) else duration, 8))
    buf.write(_fmt(ns, 4))
    for getter, width in (
        (lambda s: s.label, 16),
        (lambda s: s.transducer, 80),
        (lambda s: s.physical_dim, 8),
        (lambda s: s.physical_min, 8),
        (lambda s: s.physical_max, 8),
        (lambda s: s.digital_min, 8),
        (lambda s: s.digital_max, 8),
        (lambda s: s.prefilter, 80),
        (lambda s: s.samples_per_record, 8),
        (lambda s: "", 32),
    ):
        for spec in header.signals:
            buf.write(_fmt(getter(spec), width))
    arrays = [np.asarray(d, dtype="<i2") for d in digital_signals]
    for s, (spec, arr) in enumerate(zip(header.signals, arrays)):
        if arr.size != header.num_data_records * spec.samples_per_record:
            raise ValueError(f"signal {s}: sample count mismatch")
    for r in range(header.num_data_records):
        for spec, arr in zip(header.signals, arrays):
            n = spec.samples_per_record
            buf.write(arr[r * n : (r + 1) * n].tobytes())
    return buf.getvalue()


def physical_to_digital(spec: SignalSpec, physical: np.ndarray) -> np.ndarray:
    """Quantise physical samples into the signal's digital range."""
    g = spec.gain()
    digital = np.round((physical - spec.physical_min) / g) + spec.digital_min
    return np.clip(digital, spec.digital_min, spec.digital_max).astype(np.int16)


# ---------------------------------------------------------------------------
# Stage annotations
# ---------------------------------------------------------------------------


def parse_tal_events(payload: bytes) -> list[tuple[float, float | None, str]]:
    """Parse TAL records from an EDF+ annotation signal payload.

    Returns ``(onset_sec, duration_sec or None, text)`` triples, skipping
    empty time-keeping annotations.
    """
    events = []
    for tal in payload.split(b"\x00"):
        if not tal:
            continue
        parts = tal.split(b"\x14")
        stamp = parts[0]
        texts = [p for p in parts[1:] if p]
        if b"\x15" in stamp:
            onset_raw, duration_raw = stamp.split(b"\x15", 1)
            duration = float(duration_raw)
        else:
            onset_raw, duration = stamp, None
        onset = float(onset_raw)
        for text in texts:
            events.append((onset, duration, text.decode("utf-8", errors="replace")))
    return events


def annotation_payload_from_signal(digital: np.ndarray) -> bytes:
    """Recover the raw byte payload of an EDF+ annotation signal."""
    return digital.astype("<i2").tobytes().rstrip(b"\x00")


def events_from_csv(text: str) -> list[tuple[float, float | None, str]]:
    """Parse the ``onset_sec,stage`` CSV fallback into annotation events."""
    events = []
    for line_no, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if line_no == 0 and not _is_number(parts[0]):
            continue  # header row
        if len(parts) < 2:
            raise ParseError(f"CSV row {line_no}: expected onset_sec,stage", line_no)
        events.append((float(parts[0]), None, parts[1]))
    return events


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def parse_stage_annotations(
    events: list[tuple[float, float | None, str]],
    total_seconds: float,
    epoch_seconds: float = 30.0,
) -> list[str]:
    """Resolve annotation events into one raw stage token per epoch.

    Events without an explicit duration extend to the next event's onset (or
    to the end of the recording). Overlaps are resolved latest-onset-wins.
    Raises CoverageGap if any epoch has no covering annotation.
    """
    n_epochs = int(total_seconds // epoch_seconds)
    ordered = sorted(events, key=lambda e: e[0])
    labels: list[str | None] = [None] * n_epochs
    for idx, (onset, duration, token) in enumerate(ordered):
        if duration is None:
            end = (
                ordered[idx + 1][0] if idx + 1 < len(ordered) else total_seconds
            )
        else:
            end = onset + duration
        first = int(np.floor(onset / epoch_seconds + 1e-9))
        last = int(np.ceil(end / epoch_seconds - 1e-9))
        for e in range(max(0, first), min(n_epochs, last)):
            labels[e] = token  # later onsets overwrite earlier ones
    for e, token in enumerate(labels):
        if token is None:
            raise CoverageGap(e * epoch_seconds, (e + 1) * epoch_seconds)
    return [token for token in labels if token is not None]
