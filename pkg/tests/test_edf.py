"""EDF/EDF+ parsing, writing, annotations and stage-token mapping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sleepssl.edf import (
    ANNOTATION_LABEL,
    RecordingHeader,
    DROP_TOKENS,
    STAGE_TOKEN_MAP,
    SignalSpec,
    StageLabel,
    annotation_payload_from_signal,
    events_from_csv,
    map_stage_token,
    parse_edf,
    parse_edf_digital,
    parse_header,
    parse_stage_annotations,
    parse_tal_events,
    physical_to_digital,
    write_edf,
)
from sleepssl.errors import (
    CoverageGap,
    DegenerateCalibration,
    HeaderFieldError,
    ParseError,
    SleepSSLError,
    UnknownStage,
)


def make_signal(label="EEG Fpz-Cz", rate=100, phys=(-250.0, 250.0),
                dig=(-2048, 2047), record_duration=1.0):
    return SignalSpec(
        label=label,
        transducer="AgAgCl electrode",
        physical_dim="uV",
        physical_min=phys[0],
        physical_max=phys[1],
        digital_min=dig[0],
        digital_max=dig[1],
        prefilter="",
        samples_per_record=int(rate * record_duration),
    )


def build_file(signals, records, duration=1.0):
    """records: list (one per data record) of lists of int16 arrays."""
    header = RecordingHeader(
        num_data_records=len(records),
        record_duration=duration,
        signals=list(signals),
    )
    concatenated = [
        np.concatenate([rec[i] for rec in records])
        for i in range(len(signals))
    ]
    return write_edf(header, concatenated)


class TestHeaderParsing:
    def test_round_trip_single_signal(self):
        sig = make_signal()
        data = [np.arange(100, dtype=np.int16)]
        raw = build_file([sig], [data])
        header, signals = parse_edf(raw)
        assert len(header.signals) == 1
        assert header.record_duration == 1.0
        assert header.num_data_records == 1
        parsed = header.signals[0]
        assert parsed.label == sig.label
        assert parsed.physical_min == sig.physical_min
        assert parsed.physical_max == sig.physical_max
        assert parsed.digital_min == sig.digital_min
        assert parsed.digital_max == sig.digital_max
        assert parsed.samples_per_record == 100

    def test_field_major_layout(self):
        # The per-signal header region is column-major: all labels first, then all
        # transducers, etc. Two distinct signals must come back in order.
        sigs = [make_signal(label="EEG Fpz-Cz"), make_signal(label="EOG horizontal", rate=50)]
        raw = build_file(sigs, [[np.zeros(100, np.int16), np.zeros(50, np.int16)]])
        header, _ = parse_edf(raw)
        assert [s.label for s in header.signals] == ["EEG Fpz-Cz", "EOG horizontal"]
        assert [s.samples_per_record for s in header.signals] == [100, 50]

    def test_header_size_formula(self):
        raw = build_file([make_signal()], [[np.zeros(100, np.int16)]])
        header, _ = parse_edf(raw)
        assert header.header_bytes == 256 + 256 * 1

    def test_truncated_header_raises(self):
        raw = build_file([make_signal()], [[np.zeros(100, np.int16)]])
        with pytest.raises(ParseError):
            parse_header(raw[:100])

    def test_truncated_data_raises_typed(self):
        raw = build_file([make_signal()], [[np.zeros(100, np.int16)]])
        with pytest.raises(SleepSSLError):
            parse_edf(raw[:-10])

    def test_bad_numeric_field_raises(self):
        raw = bytearray(build_file([make_signal()], [[np.zeros(100, np.int16)]]))
        # physical_min column of signal 0 starts at 256 + 104 * 1
        raw[256 + 104 : 256 + 112] = b"abcdefgh"
        with pytest.raises(HeaderFieldError):
            parse_header(bytes(raw))


class TestCalibration:
    def test_half_step_example(self):
        # digital 0 in [-32768, 32767] mapped to [-1, 1] physical sits half a
        # quantization step above the midpoint.
        sig = make_signal(phys=(-1.0, 1.0), dig=(-32768, 32767))
        value = sig.to_physical(np.array([0], dtype=np.int16))[0]
        expected = -1.0 + (0 - (-32768)) * (2.0 / 65535)
        assert value == pytest.approx(expected)
        assert value == pytest.approx(1.5259e-5, rel=1e-3)

    def test_gain_oracle(self):
        sig = make_signal(phys=(-250.0, 250.0), dig=(-2048, 2047))
        assert sig.gain() == pytest.approx(500.0 / 4095.0)
        phys = sig.to_physical(np.array([-2048, 2047], dtype=np.int16))
        assert phys[0] == pytest.approx(-250.0)
        assert phys[1] == pytest.approx(250.0)

    def test_degenerate_calibration(self):
        sig = make_signal(dig=(5, 5))
        with pytest.raises(DegenerateCalibration):
            sig.gain()

    def test_physical_to_digital_round_trip(self, rng):
        sig = make_signal()
        digital = rng.integers(-2048, 2048, size=500).astype(np.int16)
        back = physical_to_digital(sig, sig.to_physical(digital))
        np.testing.assert_array_equal(back, digital)


class TestRoundTrip:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_digital_bit_exact(self, seed):
        rng = np.random.default_rng(seed)
        n_sig = int(rng.integers(1, 4))
        n_rec = int(rng.integers(1, 4))
        sigs, per_record = [], []
        rates = [int(rng.integers(10, 200)) for _ in range(n_sig)]
        for i in range(n_sig):
            sigs.append(make_signal(label=f"sig{i}", rate=rates[i]))
        for _ in range(n_rec):
            per_record.append(
                [rng.integers(-2048, 2048, size=r).astype(np.int16) for r in rates]
            )
        raw = build_file(sigs, per_record)
        digital = parse_edf_digital(raw)
        for i in range(n_sig):
            expected = np.concatenate([per_record[r][i] for r in range(n_rec)])
            np.testing.assert_array_equal(digital[i], expected)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1),
           st.integers(min_value=0, max_value=600))
    def test_truncation_never_crashes(self, seed, cut):
        rng = np.random.default_rng(seed)
        raw = build_file(
            [make_signal(rate=20)],
            [[rng.integers(-100, 100, size=20).astype(np.int16)] for _ in range(2)],
        )
        truncated = raw[: max(0, len(raw) - cut)]
        try:
            parse_edf(truncated)
        except SleepSSLError:
            pass  # typed failure is the contract


class TestStageTokens:
    def test_canonical_tokens(self):
        assert map_stage_token("W") is StageLabel.WAKE
        assert map_stage_token("N1") is StageLabel.N1
        assert map_stage_token("N2") is StageLabel.N2
        assert map_stage_token("N3") is StageLabel.N3
        assert map_stage_token("REM") is StageLabel.REM

    def test_n4_merges_into_n3(self):
        assert map_stage_token("N4") is StageLabel.N3
        assert map_stage_token("Sleep stage 4") is StageLabel.N3

    def test_annotation_style_aliases(self):
        assert map_stage_token("Sleep stage W") is StageLabel.WAKE
        assert map_stage_token("Sleep stage R") is StageLabel.REM
        assert map_stage_token("Sleep stage 1") is StageLabel.N1

    def test_drop_tokens_return_none(self):
        for token in DROP_TOKENS:
            assert map_stage_token(token) is None

    def test_unknown_raises(self):
        with pytest.raises(UnknownStage):
            map_stage_token("stage-zzz")

    def test_enum_values(self):
        assert [s.value for s in StageLabel] == [0, 1, 2, 3, 4]

    def test_token_map_targets_are_labels(self):
        for target in STAGE_TOKEN_MAP.values():
            assert isinstance(target, StageLabel)


class TestAnnotations:
    def test_tal_parsing(self):
        payload = (b"+0\x1530\x14Sleep stage W\x14\x00"
                   b"+30\x1560\x14Sleep stage 1\x14\x00")
        events = parse_tal_events(payload)
        assert events == [(0.0, 30.0, "Sleep stage W"),
                          (30.0, 60.0, "Sleep stage 1")]

    def test_tal_without_duration(self):
        events = parse_tal_events(b"+120\x14Sleep stage R\x14\x00")
        assert events == [(120.0, None, "Sleep stage R")]

    def test_annotation_signal_payload_round_trip(self):
        payload = b"+0\x1530\x14Sleep stage W\x14\x00"
        padded = payload + b"\x00" * (40 - len(payload) % 40)
        digital = np.frombuffer(padded, dtype="<i2").copy()
        recovered = annotation_payload_from_signal(digital)
        assert recovered.startswith(payload.rstrip(b"\x00"))
        assert parse_tal_events(recovered) == [(0.0, 30.0, "Sleep stage W")]

    def test_csv_events(self):
        events = events_from_csv("onset_sec,stage\n0,W\n30,N1\n90,N2\n")
        assert events == [(0.0, None, "W"), (30.0, None, "N1"), (90.0, None, "N2")]

    def test_epoch_grid_open_durations(self):
        events = [(0.0, None, "W"), (60.0, None, "N1")]
        tokens = parse_stage_annotations(events, total_seconds=120.0)
        assert tokens == ["W", "W", "N1", "N1"]

    def test_latest_onset_wins(self):
        events = [(0.0, 120.0, "W"), (30.0, 30.0, "N2")]
        tokens = parse_stage_annotations(events, total_seconds=120.0)
        assert tokens == ["W", "N2", "W", "W"]

    def test_coverage_gap_raises(self):
        with pytest.raises(CoverageGap):
            parse_stage_annotations([(0.0, 30.0, "W")], total_seconds=90.0)

    def test_annotation_label_constant(self):
        assert ANNOTATION_LABEL == "EDF Annotations"
