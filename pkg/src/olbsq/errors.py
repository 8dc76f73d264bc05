"""Exception types and abort reason codes shared by every layer."""

from __future__ import annotations

import enum


class OLBSQError(Exception):
    """Base class for all errors raised by this package."""


class DecodeError(OLBSQError, ValueError):
    """Bytes do not encode a valid element, structure or frame."""


class IntegrityError(OLBSQError):
    """Authenticated payload decryption failed."""

    def __init__(self, message: str, cell: tuple[int, int] | None = None):
        super().__init__(message)
        self.cell = cell


class AbortReason(enum.IntEnum):
    """Machine-readable reason codes carried by Abort frames."""

    MALFORMED_FRAME = 1
    UNSUPPORTED_VERSION = 2
    UNEXPECTED_MESSAGE = 3
    MALFORMED_MESSAGE = 4
    PROVIDER_PROOF_INVALID = 5
    QUERY_PROOF_INVALID = 6
    QUERY_TOO_LARGE = 7
    KEY_PROOF_INVALID = 8
    INTEGRITY_FAILURE = 9
    TIMEOUT = 10
    INTERNAL_ERROR = 11


class ProtocolAbort(OLBSQError):
    """A session was aborted; no partial results are released."""

    def __init__(self, reason: AbortReason, message: str = ""):
        super().__init__(f"{reason.name}: {message}" if message else reason.name)
        self.reason = reason
        self.detail = message
