"""User-side client: runs one transfer session against a provider daemon."""

from __future__ import annotations

import asyncio
import secrets

from olbsq.catalog import EncryptedCatalog, PublicParams
from olbsq.errors import AbortReason, DecodeError, ProtocolAbort
from olbsq.group import RandomSource
from olbsq.messages import decode_key_bundle, decode_provider_proof, encode_query
from olbsq.transfer import RecoveredServices, UserSession

from olbsq.endpoint.wire import (
    DEFAULT_MAX_FRAME,
    Frame,
    MsgType,
    decode_abort,
    encode_abort,
    read_frame,
    write_frame,
)


async def _expect(reader, sid: bytes, wanted: MsgType, timeout: float) -> Frame:
    frame = await asyncio.wait_for(read_frame(reader, DEFAULT_MAX_FRAME), timeout)
    if frame is None:
        raise ProtocolAbort(AbortReason.UNEXPECTED_MESSAGE, "provider closed the connection")
    if frame.msg_type is MsgType.ABORT:
        reason, detail = decode_abort(frame.body)
        raise ProtocolAbort(reason, f"provider aborted: {detail}")
    if frame.session_id != sid or frame.msg_type is not wanted:
        raise ProtocolAbort(AbortReason.UNEXPECTED_MESSAGE, f"expected {wanted.name}")
    return frame


async def run_query_async(
    host: str,
    port: int,
    pp: PublicParams,
    cat: EncryptedCatalog,
    i: int,
    j: int,
    l: int,
    k: int,
    rng: RandomSource | None = None,
    timeout: float = 60.0,
) -> RecoveredServices:
    """Fetch the l x k rectangle after start point (i, j).

    The range is checked before connecting, so an out-of-grid query never
    touches the network.

    Raises:
        ValueError: the rectangle leaves the grid.
        ProtocolAbort: either side aborted the session.
    """
    session = UserSession(pp, cat, i, j, l, k, rng)
    sid = secrets.token_bytes(16)
    reader, writer = await asyncio.wait_for(asyncio.open_connection(host, port), timeout)
    try:
        await write_frame(writer, Frame(sid, MsgType.PROVIDER_PROOF))
        frame = await _expect(reader, sid, MsgType.PROVIDER_PROOF, timeout)
        try:
            try:
                proof1 = decode_provider_proof(frame.body)
            except DecodeError as exc:
                raise ProtocolAbort(AbortReason.MALFORMED_MESSAGE, str(exc)) from exc
            omega, proof_u = await asyncio.to_thread(session.on_provider_proof, proof1)
        except ProtocolAbort as exc:
            await write_frame(writer, Frame(sid, MsgType.ABORT, encode_abort(exc.reason, exc.detail)))
            raise
        await write_frame(writer, Frame(sid, MsgType.QUERY, encode_query(omega, proof_u)))

        frame = await _expect(reader, sid, MsgType.KEY_BUNDLE, timeout)
        try:
            keys, proof2 = decode_key_bundle(frame.body, expect=(l, k))
        except DecodeError as exc:
            raise ProtocolAbort(AbortReason.MALFORMED_MESSAGE, str(exc)) from exc
        return await asyncio.to_thread(session.on_key_bundle, keys, proof2)
    finally:
        writer.close()
        try:
            await writer.wait_closed()
        except (ConnectionError, OSError):
            pass


def run_query(*args, **kwargs) -> RecoveredServices:
    """Blocking wrapper around :func:`run_query_async`."""
    return asyncio.run(run_query_async(*args, **kwargs))
