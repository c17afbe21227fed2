"""Binary wire format: handcrafted frames, error taxonomy, and fuzzing.

Expected byte strings are assembled by hand with struct.pack so the codec is
checked against the documented layout, not against itself.
"""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindcal.messages import (
    MAGIC,
    BadMagicError,
    CostReport,
    MalformedPayloadError,
    MeasurementReport,
    Terminate,
    TerminateReason,
    TruncatedFrameError,
    UnknownTagError,
    WireFormatError,
    decode_message,
    encode_message,
    iter_messages,
)
from blindcal.seeds import make_rng
from blindcal.tomography import RecordBatch


def header(tag: int, iteration: int, payload: bytes) -> bytes:
    return MAGIC + struct.pack("<BII", tag, iteration, len(payload)) + payload


def random_batch(rng: np.random.Generator, count: int, width: int) -> RecordBatch:
    return RecordBatch(
        rng.integers(1, 4, size=(count, width)),
        rng.choice([-1, 1], size=(count, width)),
        rng.integers(0, 2**31, size=count),
    )


class TestCostReportFrame:
    def test_pinned_bytes(self):
        # CostReport{iteration=3, cost=0.25}: tag 0x02, LE fields throughout.
        expected = (
            b"\xb1\xc4"
            + b"\x02"
            + (3).to_bytes(4, "little")
            + (8).to_bytes(4, "little")
            + struct.pack("<d", 0.25)
        )
        assert encode_message(CostReport(3, 0.25)) == expected

    def test_round_trip(self):
        msg = CostReport(17, -0.125)
        assert decode_message(encode_message(msg)) == msg

    def test_nan_cost_rejected_at_construction(self):
        with pytest.raises(ValueError):
            CostReport(0, float("nan"))

    def test_nan_cost_rejected_at_decode(self):
        frame = header(0x02, 0, struct.pack("<d", float("inf")))
        with pytest.raises(MalformedPayloadError):
            decode_message(frame)

    def test_wrong_payload_length(self):
        frame = header(0x02, 0, b"\x00" * 7)
        with pytest.raises(MalformedPayloadError):
            decode_message(frame)


class TestTerminateFrame:
    def test_pinned_bytes_all_reasons(self):
        for code, reason in (
            (0, TerminateReason.CONVERGED),
            (1, TerminateReason.ITERATION_LIMIT),
            (2, TerminateReason.ERROR),
        ):
            expected = header(0x03, 9, bytes([code]))
            assert encode_message(Terminate(9, reason)) == expected

    def test_unknown_reason_code(self):
        with pytest.raises(MalformedPayloadError):
            decode_message(header(0x03, 0, b"\x05"))

    def test_round_trip(self):
        msg = Terminate(250, TerminateReason.ITERATION_LIMIT)
        assert decode_message(encode_message(msg)) == msg


class TestMeasurementReportFrame:
    def test_pinned_bytes_single_record(self):
        # One 2-qubit record: index 7, basis XZ (codes 1,3), outcomes (+1,-1).
        # Outcome bits pack LSB-first: qubit 0 -> bit 0, so byte 0b01 = 1.
        batch = RecordBatch(
            np.array([[1, 3]]), np.array([[1, -1]]), np.array([7])
        )
        payload = (
            (1).to_bytes(4, "little")          # record count
            + (7).to_bytes(4, "little")        # transmission index
            + b"\x02"                          # n_qubits
            + b"\x01\x03"                      # basis codes X, Z
            + b"\x01"                          # packed outcomes
        )
        assert encode_message(MeasurementReport(4, batch)) == header(0x01, 4, payload)

    def test_pinned_bytes_empty_report(self):
        payload = (0).to_bytes(4, "little")
        assert encode_message(MeasurementReport(0, RecordBatch.empty(1))) == header(
            0x01, 0, payload
        )

    def test_round_trip_random_batches(self):
        rng = make_rng(70)
        for _ in range(50):
            width = int(rng.integers(1, 6))
            count = int(rng.integers(0, 40))
            batch = (
                random_batch(rng, count, width) if count else RecordBatch.empty(width)
            )
            msg = MeasurementReport(int(rng.integers(0, 1000)), batch)
            back = decode_message(encode_message(msg))
            assert back.iteration == msg.iteration
            assert back.records == msg.records

    def test_nine_qubit_outcome_packing_round_trips(self):
        # Two packed bytes per record once width exceeds eight qubits; the
        # codec itself has no width cap even though states cap at five.
        rng = make_rng(71)
        batch = random_batch(rng, 5, 9)
        back = decode_message(encode_message(MeasurementReport(0, batch)))
        assert back.records == batch

    def test_bad_basis_code(self):
        payload = (
            (1).to_bytes(4, "little")
            + (0).to_bytes(4, "little")
            + b"\x01"  # one qubit
            + b"\x04"  # invalid basis code
            + b"\x01"
        )
        with pytest.raises(MalformedPayloadError):
            decode_message(header(0x01, 0, payload))

    def test_zero_qubit_record(self):
        # Padded so the up-front size bound passes and the zero-width check fires.
        payload = (
            (1).to_bytes(4, "little") + (0).to_bytes(4, "little") + b"\x00" + b"\x00\x00"
        )
        with pytest.raises(MalformedPayloadError):
            decode_message(header(0x01, 0, payload))

    def test_absurd_record_count_rejected_without_allocation(self):
        payload = (2**32 - 1).to_bytes(4, "little") + b"\x00" * 16
        with pytest.raises(TruncatedFrameError):
            decode_message(header(0x01, 0, payload))

    def test_record_count_overruns_payload(self):
        payload = (3).to_bytes(4, "little")  # says 3 records, provides none
        with pytest.raises(TruncatedFrameError):
            decode_message(header(0x01, 0, payload))

    def test_trailing_garbage_in_payload(self):
        payload = (0).to_bytes(4, "little") + b"\xff"
        with pytest.raises(MalformedPayloadError):
            decode_message(header(0x01, 0, payload))

    def test_mixed_record_widths_rejected(self):
        payload = (
            (2).to_bytes(4, "little")
            + (0).to_bytes(4, "little") + b"\x01" + b"\x01" + b"\x01"
            + (1).to_bytes(4, "little") + b"\x02" + b"\x01\x01" + b"\x03"
        )
        with pytest.raises(MalformedPayloadError):
            decode_message(header(0x01, 0, payload))


class TestFrameErrors:
    def test_bad_magic(self):
        frame = bytearray(encode_message(CostReport(0, 0.5)))
        frame[0] ^= 0xFF
        with pytest.raises(BadMagicError):
            decode_message(bytes(frame))

    def test_unknown_tag(self):
        with pytest.raises(UnknownTagError):
            decode_message(header(0x04, 0, b""))

    def test_truncated_header(self):
        with pytest.raises(TruncatedFrameError):
            decode_message(MAGIC + b"\x02")

    def test_truncated_payload(self):
        frame = encode_message(CostReport(0, 0.5))
        with pytest.raises(TruncatedFrameError):
            decode_message(frame[:-3])

    def test_trailing_bytes_after_frame(self):
        frame = encode_message(CostReport(0, 0.5)) + b"\x00"
        with pytest.raises(MalformedPayloadError):
            decode_message(frame)

    def test_error_taxonomy_is_wire_format_error(self):
        for exc in (BadMagicError, UnknownTagError, TruncatedFrameError, MalformedPayloadError):
            assert issubclass(exc, WireFormatError)


class TestIterMessages:
    def test_concatenated_stream_in_order(self):
        rng = make_rng(72)
        msgs = [
            MeasurementReport(0, random_batch(rng, 3, 2)),
            CostReport(0, 0.75),
            MeasurementReport(1, random_batch(rng, 2, 2)),
            CostReport(1, 0.5),
            Terminate(2, TerminateReason.CONVERGED),
        ]
        blob = b"".join(encode_message(m) for m in msgs)
        back = list(iter_messages(blob))
        assert len(back) == len(msgs)
        for a, b in zip(back, msgs):
            assert type(a) is type(b)
            assert a.iteration == b.iteration

    def test_empty_stream(self):
        assert list(iter_messages(b"")) == []

    def test_stream_stops_on_truncation(self):
        blob = encode_message(CostReport(0, 0.5)) + encode_message(CostReport(1, 0.25))[:-1]
        it = iter_messages(blob)
        assert next(it) == CostReport(0, 0.5)
        with pytest.raises(TruncatedFrameError):
            next(it)


def random_message(rng: np.random.Generator):
    kind = int(rng.integers(0, 3))
    iteration = int(rng.integers(0, 2**32))
    if kind == 0:
        count = int(rng.integers(0, 12))
        width = int(rng.integers(1, 6))
        batch = random_batch(rng, count, width) if count else RecordBatch.empty(width)
        return MeasurementReport(iteration, batch)
    if kind == 1:
        mant = rng.normal() * 10.0 ** int(rng.integers(-8, 9))
        return CostReport(iteration, float(mant))
    return Terminate(iteration, TerminateReason(int(rng.integers(0, 3))))


class TestFuzz:
    def test_ten_thousand_round_trips(self):
        rng = make_rng(73)
        for _ in range(10_000):
            msg = random_message(rng)
            back = decode_message(encode_message(msg))
            assert type(back) is type(msg)
            assert back.iteration == msg.iteration
            if isinstance(msg, CostReport):
                assert back.cost == msg.cost
            elif isinstance(msg, Terminate):
                assert back.reason == msg.reason
            else:
                assert back.records == msg.records

    def test_mutation_fuzz_raises_only_wire_errors(self):
        rng = make_rng(74)
        for _ in range(2000):
            frame = bytearray(encode_message(random_message(rng)))
            for _ in range(int(rng.integers(1, 4))):
                pos = int(rng.integers(0, len(frame)))
                frame[pos] = int(rng.integers(0, 256))
            try:
                decode_message(bytes(frame))
            except WireFormatError:
                pass  # every structured failure maps into the taxonomy
            except ValueError:
                pytest.fail("codec leaked a raw ValueError on corrupt input")

    def test_truncation_fuzz(self):
        rng = make_rng(75)
        for _ in range(500):
            frame = encode_message(random_message(rng))
            cut = int(rng.integers(0, len(frame)))
            if cut == len(frame):
                continue
            try:
                decode_message(frame[:cut])
            except WireFormatError:
                pass

    @given(st.integers(0, 2**32 - 1), st.floats(allow_nan=False, allow_infinity=False))
    @settings(max_examples=300, deadline=None)
    def test_cost_report_property_round_trip(self, iteration, cost):
        msg = CostReport(iteration, cost)
        back = decode_message(encode_message(msg))
        assert back == msg
