"""Binary framing for E2 messages.

Frame layout::

    +------------+----------+---------------------+
    | len u32 BE | type u8  | body                |
    +------------+----------+---------------------+

``len`` counts the type byte plus the body. Integers are fixed-width big
endian, strings are a u16 byte count followed by UTF-8, lists are a u16
element count followed by the elements. A KPM record is::

    t_ms u64 | ue_id u32 | dl_thp_kbps f64 | rb_count u32 |
    sdu_latency_us u32 (0xFFFFFFFF = absent) | pos_cm 3 x i32 | cqi u8 | mcs u8
"""

from __future__ import annotations

import math
import struct
from typing import Callable, Optional

from .messages import (
    TYPE_TAGS,
    E2Message,
    ErrorIndication,
    Indication,
    KpmRecord,
    RanFunction,
    SetupRequest,
    SetupResponse,
    SubscriptionDelete,
    SubscriptionRequest,
    SubscriptionResponse,
)

HEADER = struct.Struct(">I")
MAX_FRAME_BYTES = 16 * 1024 * 1024
LATENCY_ABSENT = 0xFFFFFFFF

_RECORD = struct.Struct(">QIdIIiiiBB")


class DecodeError(ValueError):
    """Base class for frames that cannot be decoded."""


class UnknownMessageType(DecodeError):
    pass


class TruncatedPayload(DecodeError):
    pass


class LengthMismatch(DecodeError):
    pass


class MalformedPayload(DecodeError):
    pass


class EncodeError(ValueError):
    pass


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def pack(self, fmt: str, *values) -> None:
        try:
            self.parts.append(struct.pack(fmt, *values))
        except struct.error as exc:
            raise EncodeError(f"value out of range for {fmt}: {values}") from exc

    def string(self, s: str) -> None:
        raw = s.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise EncodeError("string longer than 65535 bytes")
        self.pack(">H", len(raw))
        self.parts.append(raw)

    def count(self, n: int) -> None:
        if n > 0xFFFF:
            raise EncodeError("list longer than 65535 elements")
        self.pack(">H", n)

    def bytes(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedPayload(f"payload ends at byte {len(self.data)}, needed {self.pos + n}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, st: struct.Struct) -> tuple:
        return st.unpack(self.take(st.size))

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def string(self) -> str:
        raw = self.take(self.u16())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedPayload(f"invalid UTF-8 string: {exc}") from exc

    def boolean(self) -> bool:
        b = self.u8()
        if b > 1:
            raise MalformedPayload(f"boolean byte must be 0 or 1, got {b}")
        return bool(b)


def _write_record(w: _Writer, r: KpmRecord) -> None:
    if not math.isfinite(r.dl_thp_kbps):
        raise EncodeError("dl_thp_kbps must be finite")
    latency = LATENCY_ABSENT if r.sdu_latency_us is None else r.sdu_latency_us
    if latency == LATENCY_ABSENT and r.sdu_latency_us is not None:
        raise EncodeError("sdu_latency_us collides with the absent sentinel")
    w.pack(_RECORD.format, r.t_ms, r.ue_id, r.dl_thp_kbps, r.rb_count, latency, *r.pos_cm, r.cqi, r.mcs)


def _read_record(rd: _Reader) -> KpmRecord:
    t_ms, ue_id, thp, rbs, latency, x, y, z, cqi, mcs = rd.unpack(_RECORD)
    if not math.isfinite(thp):
        raise MalformedPayload("non-finite dl_thp_kbps")
    return KpmRecord(
        t_ms, ue_id, thp, rbs, None if latency == LATENCY_ABSENT else latency, (x, y, z), cqi, mcs
    )


def _encode_body(m: E2Message, w: _Writer) -> None:
    if isinstance(m, SetupRequest):
        w.pack(">I", m.node_id)
        w.count(len(m.functions))
        for f in m.functions:
            w.pack(">H", f.function_id)
            w.string(f.name)
    elif isinstance(m, SetupResponse):
        w.count(len(m.accepted_function_ids))
        for fid in m.accepted_function_ids:
            w.pack(">H", fid)
    elif isinstance(m, SubscriptionRequest):
        w.pack(">IHI", m.sub_id, m.function_id, m.report_period_ms)
    elif isinstance(m, SubscriptionResponse):
        w.pack(">I?B", m.sub_id, m.accepted, m.reason_code)
    elif isinstance(m, Indication):
        w.pack(">IQ", m.sub_id, m.seq)
        w.count(len(m.records))
        for r in m.records:
            _write_record(w, r)
    elif isinstance(m, SubscriptionDelete):
        w.pack(">I", m.sub_id)
    elif isinstance(m, ErrorIndication):
        w.pack(">B", m.code)
        w.string(m.detail)
    else:
        raise EncodeError(f"not an E2 message: {type(m).__name__}")


def encode(m: E2Message) -> bytes:
    w = _Writer()
    _encode_body(m, w)
    body = w.bytes()
    return HEADER.pack(1 + len(body)) + bytes([TYPE_TAGS[type(m)]]) + body


def _decode_setup_request(rd: _Reader) -> SetupRequest:
    node_id = rd.u32()
    functions = tuple(RanFunction(rd.u16(), rd.string()) for _ in range(rd.u16()))
    return SetupRequest(node_id, functions)


def _decode_setup_response(rd: _Reader) -> SetupResponse:
    return SetupResponse(tuple(rd.u16() for _ in range(rd.u16())))


def _decode_sub_request(rd: _Reader) -> SubscriptionRequest:
    return SubscriptionRequest(rd.u32(), rd.u16(), rd.u32())


def _decode_sub_response(rd: _Reader) -> SubscriptionResponse:
    return SubscriptionResponse(rd.u32(), rd.boolean(), rd.u8())


def _decode_indication(rd: _Reader) -> Indication:
    sub_id, seq = rd.u32(), rd.u64()
    return Indication(sub_id, seq, tuple(_read_record(rd) for _ in range(rd.u16())))


def _decode_sub_delete(rd: _Reader) -> SubscriptionDelete:
    return SubscriptionDelete(rd.u32())


def _decode_error(rd: _Reader) -> ErrorIndication:
    return ErrorIndication(rd.u8(), rd.string())


_DECODERS: dict[int, Callable[[_Reader], E2Message]] = {
    0x01: _decode_setup_request,
    0x02: _decode_setup_response,
    0x03: _decode_sub_request,
    0x04: _decode_sub_response,
    0x05: _decode_indication,
    0x06: _decode_sub_delete,
    0x07: _decode_error,
}


def decode_payload(payload: bytes) -> E2Message:
    """Decode the bytes after the length prefix (type tag + body)."""
    if not payload:
        raise TruncatedPayload("empty payload: missing type tag")
    tag = payload[0]
    decoder = _DECODERS.get(tag)
    if decoder is None:
        raise UnknownMessageType(f"unknown type tag 0x{tag:02x}")
    rd = _Reader(payload[1:])
    msg = decoder(rd)
    if rd.pos != len(rd.data):
        raise LengthMismatch(f"{len(rd.data) - rd.pos} trailing bytes after {type(msg).__name__} body")
    return msg


def decode(data: bytes) -> E2Message:
    """Decode exactly one complete frame."""
    if len(data) < HEADER.size:
        raise TruncatedPayload(f"frame shorter than the {HEADER.size}-byte length prefix")
    (length,) = HEADER.unpack_from(data)
    available = len(data) - HEADER.size
    if available < length:
        raise TruncatedPayload(f"frame declares {length} payload bytes, only {available} present")
    if available > length:
        raise LengthMismatch(f"frame declares {length} payload bytes, {available} present")
    return decode_payload(bytes(data[HEADER.size:]))


def read_frame(recv_exact: Callable[[int], Optional[bytes]]) -> Optional[bytes]:
    """Read one raw frame payload from a stream.

    ``recv_exact(n)`` returns exactly n bytes, or fewer at end of stream.
    Returns None on a clean end of stream between frames.
    """
    head = recv_exact(HEADER.size)
    if not head:
        return None
    if len(head) < HEADER.size:
        raise TruncatedPayload("stream ended inside a length prefix")
    (length,) = HEADER.unpack(head)
    if length > MAX_FRAME_BYTES:
        raise LengthMismatch(f"frame length {length} exceeds limit {MAX_FRAME_BYTES}")
    payload = recv_exact(length) if length else b""
    if len(payload) < length:
        raise TruncatedPayload(f"stream ended after {len(payload)} of {length} payload bytes")
    return payload
