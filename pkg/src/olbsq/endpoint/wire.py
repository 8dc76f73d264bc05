"""Length-prefixed frames over a byte stream.

Frame layout (all integers big-endian)::

    offset  size  field
    0       4     length of everything after this field (>= 18)
    4       1     protocol version (currently 1)
    5       16    session id, chosen by the client and echoed by the server
    21      1     message type (see MsgType)
    22      ...   body

Abort bodies are a u16 reason code followed by a UTF-8 message.
"""

from __future__ import annotations

import asyncio
import dataclasses
import enum
import struct

from olbsq.errors import AbortReason, DecodeError

PROTOCOL_VERSION = 1
SESSION_ID_SIZE = 16
HEADER_SIZE = 4
MIN_PAYLOAD = 1 + SESSION_ID_SIZE + 1
DEFAULT_MAX_FRAME = 16 * 1024 * 1024
ZERO_SESSION = bytes(SESSION_ID_SIZE)


class MsgType(enum.IntEnum):
    PROVIDER_PROOF = 1
    QUERY = 2
    KEY_BUNDLE = 3
    ABORT = 4


class FrameError(DecodeError):
    """A frame could not be parsed; ``reason`` says which abort code to send."""

    def __init__(self, message: str, reason: AbortReason = AbortReason.MALFORMED_FRAME,
                 session_id: bytes = ZERO_SESSION):
        super().__init__(message)
        self.reason = reason
        self.session_id = session_id


@dataclasses.dataclass(frozen=True)
class Frame:
    session_id: bytes
    msg_type: MsgType
    body: bytes = b""
    version: int = PROTOCOL_VERSION

    def encode(self, max_frame: int = DEFAULT_MAX_FRAME) -> bytes:
        if len(self.session_id) != SESSION_ID_SIZE:
            raise ValueError("session id must be 16 bytes")
        length = MIN_PAYLOAD + len(self.body)
        if HEADER_SIZE + length > max_frame:
            raise ValueError(f"frame of {HEADER_SIZE + length} bytes exceeds limit {max_frame}")
        return struct.pack(">IB", length, self.version) + self.session_id + bytes([self.msg_type]) + self.body


def parse_payload(payload: bytes) -> Frame:
    """Parse everything after the length field."""
    if len(payload) < MIN_PAYLOAD:
        raise FrameError(f"frame payload of {len(payload)} bytes is shorter than the header")
    version = payload[0]
    session_id = bytes(payload[1:1 + SESSION_ID_SIZE])
    if version != PROTOCOL_VERSION:
        raise FrameError(f"unsupported version {version}", AbortReason.UNSUPPORTED_VERSION, session_id)
    raw_type = payload[1 + SESSION_ID_SIZE]
    try:
        msg_type = MsgType(raw_type)
    except ValueError:
        raise FrameError(f"unknown message type {raw_type}", AbortReason.MALFORMED_FRAME, session_id) from None
    return Frame(session_id, msg_type, bytes(payload[MIN_PAYLOAD:]), version)


def decode_frame(data: bytes, max_frame: int = DEFAULT_MAX_FRAME) -> Frame:
    """Decode exactly one complete frame."""
    if len(data) < HEADER_SIZE:
        raise FrameError("truncated length prefix")
    (length,) = struct.unpack(">I", data[:HEADER_SIZE])
    if HEADER_SIZE + length > max_frame:
        raise FrameError(f"declared frame length {length} exceeds limit")
    if len(data) != HEADER_SIZE + length:
        raise FrameError(f"declared length {length} but {len(data) - HEADER_SIZE} bytes follow")
    return parse_payload(data[HEADER_SIZE:])


async def read_frame(reader: asyncio.StreamReader, max_frame: int = DEFAULT_MAX_FRAME) -> Frame | None:
    """Read one frame; returns None on clean EOF before any byte of a new frame."""
    try:
        prefix = await reader.readexactly(HEADER_SIZE)
    except asyncio.IncompleteReadError as exc:
        if not exc.partial:
            return None
        raise FrameError("truncated length prefix") from None
    (length,) = struct.unpack(">I", prefix)
    if HEADER_SIZE + length > max_frame:
        raise FrameError(f"declared frame length {length} exceeds limit")
    if length < MIN_PAYLOAD:
        raise FrameError(f"declared frame length {length} is shorter than the header")
    try:
        payload = await reader.readexactly(length)
    except asyncio.IncompleteReadError:
        raise FrameError("connection closed mid-frame") from None
    return parse_payload(payload)


async def write_frame(writer: asyncio.StreamWriter, frame: Frame, max_frame: int = DEFAULT_MAX_FRAME) -> None:
    writer.write(frame.encode(max_frame))
    await writer.drain()


def encode_abort(reason: AbortReason, message: str = "") -> bytes:
    return struct.pack(">H", int(reason)) + message.encode("utf-8")[:1024]


def decode_abort(body: bytes) -> tuple[AbortReason, str]:
    if len(body) < 2:
        raise DecodeError("abort body too short")
    (code,) = struct.unpack(">H", body[:2])
    try:
        reason = AbortReason(code)
    except ValueError:
        reason = AbortReason.INTERNAL_ERROR
    return reason, body[2:].decode("utf-8", errors="replace")
