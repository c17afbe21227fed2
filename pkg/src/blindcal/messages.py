"""Typed protocol messages and their binary wire format.

Frame layout (all multi-byte integers little-endian):

    magic 0xB1 0xC4 | tag u8 | iteration u32 | payload_length u32 | payload

Tags: 0x01 measurement report, 0x02 cost report, 0x03 terminate.

Measurement report payload: record count u32, then per record
    transmission_index u32 | n_qubits u8 | basis letter codes (u8 each,
    X=1 Y=2 Z=3) | outcomes packed LSB-first, one bit per qubit, 1 <=> +1.

Cost report payload: one IEEE-754 double (little-endian).
Terminate payload: one reason byte (0 converged, 1 iteration limit, 2 error).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, Union

import numpy as np

from .tomography import RecordBatch

MAGIC = b"\xb1\xc4"
_HEADER = struct.Struct("<2sBII")

TAG_MEASUREMENT_REPORT = 0x01
TAG_COST_REPORT = 0x02
TAG_TERMINATE = 0x03


class TerminateReason(IntEnum):
    CONVERGED = 0
    ITERATION_LIMIT = 1
    ERROR = 2


class WireFormatError(Exception):
    """Base class for codec failures."""


class BadMagicError(WireFormatError):
    """Frame does not start with the protocol magic."""


class UnknownTagError(WireFormatError):
    """Frame tag is not one of the known message kinds."""


class TruncatedFrameError(WireFormatError):
    """Buffer ends before the frame or payload is complete."""


class MalformedPayloadError(WireFormatError):
    """Payload bytes are structurally invalid for their tag."""


def _check_iteration(iteration: int):
    if not 0 <= iteration < 2**32:
        raise ValueError(f"iteration must fit in an unsigned 32-bit int, got {iteration}")


@dataclass(frozen=True)
class MeasurementReport:
    """Receiver-to-sender batch of measurement records for one iteration."""

    iteration: int
    records: RecordBatch

    def __post_init__(self):
        _check_iteration(self.iteration)


@dataclass(frozen=True)
class CostReport:
    """Sender-to-receiver scalar cost for one iteration."""

    iteration: int
    cost: float

    def __post_init__(self):
        _check_iteration(self.iteration)
        if not math.isfinite(self.cost):
            raise ValueError(f"cost must be finite, got {self.cost}")


@dataclass(frozen=True)
class Terminate:
    """Session end marker; iteration counts completed iterations."""

    iteration: int
    reason: TerminateReason

    def __post_init__(self):
        _check_iteration(self.iteration)
        object.__setattr__(self, "reason", TerminateReason(self.reason))


ProtocolMessage = Union[MeasurementReport, CostReport, Terminate]


def _encode_records(batch: RecordBatch) -> bytes:
    parts = [struct.pack("<I", len(batch))]
    n = batch.n_qubits
    if len(batch):
        if np.any(batch.transmission_indices >= 2**32):
            raise ValueError("transmission index does not fit in 32 bits")
        if n > 255:
            raise ValueError("record width does not fit in one byte")
        bit_rows = (batch.outcomes == 1).astype(np.uint8)
        packed = np.packbits(bit_rows, axis=1, bitorder="little")
        for i in range(len(batch)):
            parts.append(struct.pack("<IB", int(batch.transmission_indices[i]), n))
            parts.append(batch.bases[i].tobytes())
            parts.append(packed[i].tobytes())
    return b"".join(parts)


def _decode_records(payload: bytes) -> RecordBatch:
    if len(payload) < 4:
        raise TruncatedFrameError("measurement report payload shorter than its count field")
    (count,) = struct.unpack_from("<I", payload, 0)
    pos = 4
    # A record occupies at least 7 bytes (5 header + 1 basis + 1 outcome byte);
    # bound the claimed count before allocating anything.
    if count > (len(payload) - 4) // 7:
        raise TruncatedFrameError(
            f"record count {count} cannot fit in a {len(payload)}-byte payload"
        )
    indices = np.zeros(count, dtype=np.int64)
    bases_rows = []
    outcome_rows = []
    width = None
    for i in range(count):
        if pos + 5 > len(payload):
            raise TruncatedFrameError(f"record {i} header extends past payload end")
        idx, n = struct.unpack_from("<IB", payload, pos)
        pos += 5
        if n == 0:
            raise MalformedPayloadError(f"record {i} declares zero qubits")
        if width is None:
            width = n
        elif n != width:
            raise MalformedPayloadError(f"record {i} width {n} differs from first record {width}")
        packed_len = (n + 7) // 8
        if pos + n + packed_len > len(payload):
            raise TruncatedFrameError(f"record {i} body extends past payload end")
        basis = np.frombuffer(payload, dtype=np.uint8, count=n, offset=pos)
        if basis.min() < 1 or basis.max() > 3:
            raise MalformedPayloadError(f"record {i} has an unknown basis letter code")
        pos += n
        packed = np.frombuffer(payload, dtype=np.uint8, count=packed_len, offset=pos)
        pos += packed_len
        bits = np.unpackbits(packed, bitorder="little")[:n]
        indices[i] = idx
        bases_rows.append(basis)
        outcome_rows.append((2 * bits.astype(np.int8) - 1))
    if pos != len(payload):
        raise MalformedPayloadError(f"{len(payload) - pos} unexpected trailing payload bytes")
    if count == 0:
        # Width is unrecoverable from an empty report; a zero-column batch
        # keeps equality and the record count intact.
        return RecordBatch.empty(0)
    return RecordBatch(np.stack(bases_rows), np.stack(outcome_rows), indices)


def encode_message(msg: ProtocolMessage) -> bytes:
    """Serialise one message to a complete frame."""
    if isinstance(msg, MeasurementReport):
        tag, payload = TAG_MEASUREMENT_REPORT, _encode_records(msg.records)
    elif isinstance(msg, CostReport):
        tag, payload = TAG_COST_REPORT, struct.pack("<d", msg.cost)
    elif isinstance(msg, Terminate):
        tag, payload = TAG_TERMINATE, struct.pack("<B", int(msg.reason))
    else:
        raise TypeError(f"not a protocol message: {msg!r}")
    return _HEADER.pack(MAGIC, tag, msg.iteration, len(payload)) + payload


def _decode_frame(data: bytes, offset: int) -> tuple[ProtocolMessage, int]:
    if len(data) - offset < _HEADER.size:
        raise TruncatedFrameError(
            f"{len(data) - offset} bytes left at offset {offset}, need {_HEADER.size} for a header"
        )
    magic, tag, iteration, payload_len = _HEADER.unpack_from(data, offset)
    if magic != MAGIC:
        raise BadMagicError(f"bad frame magic {magic!r} at offset {offset}")
    body_start = offset + _HEADER.size
    if len(data) - body_start < payload_len:
        raise TruncatedFrameError(
            f"payload of {payload_len} bytes extends past end of buffer"
        )
    payload = data[body_start : body_start + payload_len]
    if tag == TAG_MEASUREMENT_REPORT:
        msg: ProtocolMessage = MeasurementReport(iteration, _decode_records(payload))
    elif tag == TAG_COST_REPORT:
        if payload_len != 8:
            raise MalformedPayloadError(f"cost payload must be 8 bytes, got {payload_len}")
        (cost,) = struct.unpack("<d", payload)
        if not math.isfinite(cost):
            raise MalformedPayloadError(f"cost must be finite, got {cost}")
        msg = CostReport(iteration, cost)
    elif tag == TAG_TERMINATE:
        if payload_len != 1:
            raise MalformedPayloadError(f"terminate payload must be 1 byte, got {payload_len}")
        code = payload[0]
        try:
            msg = Terminate(iteration, TerminateReason(code))
        except ValueError:
            raise MalformedPayloadError(f"unknown terminate reason code {code}") from None
    else:
        raise UnknownTagError(f"unknown frame tag 0x{tag:02x}")
    return msg, body_start + payload_len


def decode_message(data: bytes) -> ProtocolMessage:
    """Parse exactly one frame; trailing bytes are an error."""
    msg, end = _decode_frame(data, 0)
    if end != len(data):
        raise MalformedPayloadError(f"{len(data) - end} trailing bytes after frame")
    return msg


def iter_messages(data: bytes) -> Iterator[ProtocolMessage]:
    """Parse a concatenated stream of frames in order."""
    offset = 0
    while offset < len(data):
        msg, offset = _decode_frame(data, offset)
        yield msg
