"""Byte-level reader/writer for protocol structures.

Elements are written with their raw fixed-length encodings (no type tag);
the field order of each structure fixes the types. Integers are big-endian.
Blobs carry a u32 length prefix.
"""

from __future__ import annotations

import collections
import struct

from olbsq.errors import DecodeError
from olbsq.group import (
    POINT_SIZE,
    SCALAR_SIZE,
    TARGET_SIZE,
    Point,
    Side,
    Target,
    scalar_from_bytes,
    scalar_to_bytes,
)

_SIDE_LABEL = {Side.LEFT: "G1", Side.RIGHT: "G2"}


class Writer:
    """Accumulates an encoding and tallies group elements by kind (G1, G2, GT, Zp)."""

    def __init__(self) -> None:
        self._parts: list[bytes] = []
        self.tally: collections.Counter[str] = collections.Counter()

    def raw(self, b: bytes) -> "Writer":
        self._parts.append(bytes(b))
        return self

    def u8(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">B", v))
        return self

    def u16(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">H", v))
        return self

    def u32(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">I", v))
        return self

    def point(self, p: Point) -> "Writer":
        self._parts.append(p.to_bytes())
        self.tally[_SIDE_LABEL[p.side]] += 1
        return self

    def target(self, t: Target) -> "Writer":
        self._parts.append(t.to_bytes())
        self.tally["GT"] += 1
        return self

    def scalar(self, s: int) -> "Writer":
        self._parts.append(scalar_to_bytes(s))
        self.tally["Zp"] += 1
        return self

    def blob(self, b: bytes) -> "Writer":
        self._parts.append(struct.pack(">I", len(b)) + bytes(b))
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    """Cursor over an encoding; every short read or bad element raises DecodeError."""

    def __init__(self, data: bytes, max_blob: int = 1 << 24) -> None:
        self._data = memoryview(bytes(data))
        self._pos = 0
        self._max_blob = max_blob

    def _take(self, n: int) -> bytes:
        end = self._pos + n
        if end > len(self._data):
            raise DecodeError(f"truncated input: wanted {n} bytes at offset {self._pos}")
        chunk = bytes(self._data[self._pos:end])
        self._pos = end
        return chunk

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def point(self, side: Side) -> Point:
        return Point.from_bytes(side, self._take(POINT_SIZE[side]))

    def target(self) -> Target:
        return Target.from_bytes(self._take(TARGET_SIZE))

    def scalar(self) -> int:
        return scalar_from_bytes(self._take(SCALAR_SIZE))

    def blob(self) -> bytes:
        n = self.u32()
        if n > self._max_blob:
            raise DecodeError(f"blob length {n} exceeds limit {self._max_blob}")
        return self._take(n)

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def done(self) -> None:
        if self.remaining:
            raise DecodeError(f"{self.remaining} trailing bytes")
