"""Pairing-group layer over BLS12-381, backed by the mcl library.

The protocol is written for a symmetric pairing. We run it on a Type-3
curve instead: every source element lives in exactly one pairing slot
(``Side.LEFT`` is G1, ``Side.RIGHT`` is G2), and the generators that must be
paired on both sides are carried as :class:`DualPoint` pairs sharing one
discrete logarithm.

Scalars are plain ``int`` values reduced mod :data:`ORDER`.

Encodings (all fixed length, version 1)::

    G1 point   48 bytes   mcl compressed form, all-zero is the identity
    G2 point   96 bytes   mcl compressed form, all-zero is the identity
    GT element 576 bytes  mcl Fp12 form
    scalar     32 bytes   big-endian, value < ORDER

:func:`serialize` prefixes one type-tag byte (see ``TAG_*``). Those tagged
encodings are the only bytes that feed Fiat-Shamir transcripts.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import secrets
import struct
from typing import NamedTuple, Protocol, Union

import pymcl

from olbsq import counters
from olbsq.errors import DecodeError

ORDER: int = int(pymcl.r)
SCALAR_SIZE = 32
TARGET_SIZE = 576
ENCODING_VERSION = 1

TAG_G1 = 0x01
TAG_G2 = 0x02
TAG_GT = 0x03
TAG_SCALAR = 0x04
TAG_BYTES = 0x05


class Side(enum.Enum):
    LEFT = 1
    RIGHT = 2


POINT_SIZE = {Side.LEFT: 48, Side.RIGHT: 96}
_BACKEND = {Side.LEFT: pymcl.G1, Side.RIGHT: pymcl.G2}
_BASE = {Side.LEFT: pymcl.g1, Side.RIGHT: pymcl.g2}
_TAG_OF = {Side.LEFT: TAG_G1, Side.RIGHT: TAG_G2}


@dataclasses.dataclass(frozen=True)
class ParameterSet:
    name: str
    curve_id: int
    order: int
    security_bits: int


# Security level 128 maps to BLS12-381; it is the only registered entry.
PARAMETER_SETS = {
    "bls12-381": ParameterSet("bls12-381", curve_id=1, order=ORDER, security_bits=128),
}
DEFAULT_PARAMETER_SET = PARAMETER_SETS["bls12-381"]


def parameter_set(name_or_id: str | int = "bls12-381") -> ParameterSet:
    for ps in PARAMETER_SETS.values():
        if name_or_id in (ps.name, ps.curve_id):
            return ps
    raise ValueError(f"unknown parameter set {name_or_id!r}")


class RandomSource(Protocol):
    def getrandbits(self, k: int) -> int: ...

    def randbytes(self, n: int) -> bytes: ...


def default_rng() -> RandomSource:
    return secrets.SystemRandom()


def _fr(e: int) -> pymcl.Fr:
    return pymcl.Fr(str(e % ORDER))


class Point:
    """An element of G1 (left slot) or G2 (right slot), written multiplicatively."""

    __slots__ = ("side", "_raw")

    def __init__(self, side: Side, raw):
        self.side = side
        self._raw = raw

    @classmethod
    def identity(cls, side: Side) -> "Point":
        return cls(side, _BACKEND[side]())

    @classmethod
    def generator(cls, side: Side) -> "Point":
        return cls(side, _BASE[side])

    def _same_side(self, other: "Point") -> None:
        if not isinstance(other, Point):
            raise TypeError(f"expected Point, got {type(other).__name__}")
        if other.side is not self.side:
            raise TypeError(f"cannot combine {self.side.name} and {other.side.name} elements")

    def __mul__(self, other: "Point") -> "Point":
        self._same_side(other)
        return Point(self.side, self._raw + other._raw)

    def __truediv__(self, other: "Point") -> "Point":
        self._same_side(other)
        return Point(self.side, self._raw + (-other._raw))

    def __pow__(self, e: int) -> "Point":
        counters.record("exp_source")
        return Point(self.side, self._raw * _fr(e))

    def inverse(self) -> "Point":
        return Point(self.side, -self._raw)

    def is_identity(self) -> bool:
        return self._raw.is_zero()

    def to_bytes(self) -> bytes:
        return bytes(self._raw.serialize())

    @classmethod
    def from_bytes(cls, side: Side, data: bytes) -> "Point":
        data = bytes(data)
        if len(data) != POINT_SIZE[side]:
            raise DecodeError(f"{side.name} point must be {POINT_SIZE[side]} bytes, got {len(data)}")
        try:
            raw = _BACKEND[side].deserialize(data)
        except ValueError as exc:
            raise DecodeError(f"invalid {side.name} point encoding") from exc
        if bytes(raw.serialize()) != data:
            raise DecodeError(f"non-canonical {side.name} point encoding")
        return cls(side, raw)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Point):
            return NotImplemented
        return self.side is other.side and self._raw == other._raw

    def __hash__(self) -> int:
        return hash((self.side, self.to_bytes()))

    def __repr__(self) -> str:
        return f"Point({self.side.name}, {self.to_bytes()[:6].hex()}...)"


class Target:
    """An element of the pairing target group, written multiplicatively."""

    __slots__ = ("_raw",)

    def __init__(self, raw):
        self._raw = raw

    @classmethod
    def one(cls) -> "Target":
        return cls(pymcl.GT())

    def __mul__(self, other: "Target") -> "Target":
        if not isinstance(other, Target):
            raise TypeError(f"expected Target, got {type(other).__name__}")
        return Target(self._raw * other._raw)

    def __truediv__(self, other: "Target") -> "Target":
        if not isinstance(other, Target):
            raise TypeError(f"expected Target, got {type(other).__name__}")
        return Target(self._raw / other._raw)

    def __pow__(self, e: int) -> "Target":
        counters.record("exp_target")
        return Target(self._raw ** _fr(e))

    def inverse(self) -> "Target":
        return Target(~self._raw)

    def is_identity(self) -> bool:
        return self._raw.is_one()

    def to_bytes(self) -> bytes:
        return bytes(self._raw.serialize())

    @classmethod
    def from_bytes(cls, data: bytes) -> "Target":
        data = bytes(data)
        if len(data) != TARGET_SIZE:
            raise DecodeError(f"target element must be {TARGET_SIZE} bytes, got {len(data)}")
        try:
            raw = pymcl.GT.deserialize(data)
        except ValueError as exc:
            raise DecodeError("invalid target element encoding") from exc
        if bytes(raw.serialize()) != data:
            raise DecodeError("non-canonical target element encoding")
        # mcl checks neither invertibility nor membership in the order-p subgroup.
        if raw.is_zero() or not ((raw ** _fr(ORDER - 1)) * raw).is_one():
            raise DecodeError("target element outside the order-p subgroup")
        return cls(raw)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Target):
            return NotImplemented
        return self._raw == other._raw

    def __hash__(self) -> int:
        return hash(self.to_bytes())

    def __repr__(self) -> str:
        return f"Target({self.to_bytes()[:6].hex()}...)"


class DualPoint(NamedTuple):
    """One public base published in both pairing slots with a shared exponent."""

    left: Point
    right: Point


def pair(a: Point, b: Point) -> Target:
    """Bilinear map e(a, b) with ``a`` in the left slot and ``b`` in the right slot."""
    if not (isinstance(a, Point) and isinstance(b, Point)):
        raise TypeError("pair() takes two Points")
    if a.side is not Side.LEFT or b.side is not Side.RIGHT:
        raise TypeError(f"pair() needs (LEFT, RIGHT) operands, got ({a.side.name}, {b.side.name})")
    counters.record("pairings")
    return Target(pymcl.pairing(a._raw, b._raw))


GT_GENERATOR = Target(pymcl.pairing(pymcl.g1, pymcl.g2))


def random_scalar(rng: RandomSource | None = None) -> int:
    """Uniform draw from [0, ORDER) by rejection sampling."""
    rng = rng or default_rng()
    bits = ORDER.bit_length()
    while True:
        v = rng.getrandbits(bits)
        if v < ORDER:
            return v


def random_nonzero_scalar(rng: RandomSource | None = None) -> int:
    while True:
        v = random_scalar(rng)
        if v:
            return v


def random_point(side: Side, rng: RandomSource | None = None) -> Point:
    """Uniform point with unknown discrete log (hash-to-curve of fresh randomness)."""
    rng = rng or default_rng()
    seed = b"olbsq/v1/random-point/" + rng.randbytes(32)
    return Point(side, _BACKEND[side].hash(seed))


def random_dual(rng: RandomSource | None = None) -> DualPoint:
    """Fresh (G1, G2) base pair sharing a secret exponent. Parameter generation, not counted."""
    t = random_nonzero_scalar(rng)
    return DualPoint(
        Point(Side.LEFT, pymcl.g1 * _fr(t)),
        Point(Side.RIGHT, pymcl.g2 * _fr(t)),
    )


def random_target(rng: RandomSource | None = None) -> Target:
    """Uniform target-group element. Not counted; used for payload masks."""
    return Target(GT_GENERATOR._raw ** _fr(random_scalar(rng)))


def inv(a: int) -> int:
    a %= ORDER
    if a == 0:
        raise ZeroDivisionError("zero has no inverse mod the group order")
    return pow(a, -1, ORDER)


def hash_to_scalar(domain_tag: bytes, transcript: bytes) -> int:
    """SHA-512 of a length-prefixed domain tag and the transcript, reduced mod ORDER.

    512 output bits against a 255-bit order keeps the bias below 2^-256.
    """
    if len(domain_tag) > 255:
        raise ValueError("domain tag longer than 255 bytes")
    counters.record("hashes")
    digest = hashlib.sha512(bytes([len(domain_tag)]) + domain_tag + transcript).digest()
    return int.from_bytes(digest, "big") % ORDER


Element = Union[Point, Target, int]


def scalar_to_bytes(s: int) -> bytes:
    if not 0 <= s < ORDER:
        raise ValueError("scalar out of range")
    return s.to_bytes(SCALAR_SIZE, "big")


def scalar_from_bytes(data: bytes) -> int:
    if len(data) != SCALAR_SIZE:
        raise DecodeError(f"scalar must be {SCALAR_SIZE} bytes, got {len(data)}")
    v = int.from_bytes(data, "big")
    if v >= ORDER:
        raise DecodeError("scalar not reduced mod the group order")
    return v


def serialize(e: Element) -> bytes:
    """Tagged, fixed-length canonical encoding of a point, target element or scalar."""
    if isinstance(e, Point):
        return bytes([_TAG_OF[e.side]]) + e.to_bytes()
    if isinstance(e, Target):
        return bytes([TAG_GT]) + e.to_bytes()
    if isinstance(e, int) and not isinstance(e, bool):
        return bytes([TAG_SCALAR]) + scalar_to_bytes(e)
    raise TypeError(f"cannot serialize {type(e).__name__}")


def deserialize(data: bytes) -> Element:
    if not data:
        raise DecodeError("empty encoding")
    tag, body = data[0], bytes(data[1:])
    if tag == TAG_G1:
        return Point.from_bytes(Side.LEFT, body)
    if tag == TAG_G2:
        return Point.from_bytes(Side.RIGHT, body)
    if tag == TAG_GT:
        return Target.from_bytes(body)
    if tag == TAG_SCALAR:
        return scalar_from_bytes(body)
    raise DecodeError(f"unknown element tag 0x{tag:02x}")


def transcript(*items: Element | bytes) -> bytes:
    """Concatenate tagged encodings; raw byte strings get a u32 length prefix."""
    parts = []
    for item in items:
        if isinstance(item, (bytes, bytearray)):
            parts.append(bytes([TAG_BYTES]) + struct.pack(">I", len(item)) + bytes(item))
        else:
            parts.append(serialize(item))
    return b"".join(parts)
