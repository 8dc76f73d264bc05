import asyncio
import contextlib
import random

import pytest

from olbsq.errors import AbortReason, DecodeError, ProtocolAbort
from olbsq.messages import decode_provider_proof, encode_query
from olbsq.endpoint.client import run_query_async
from olbsq.endpoint.server import Provider, ProviderConfig
from olbsq.endpoint.wire import (
    Frame,
    FrameError,
    MsgType,
    decode_abort,
    decode_frame,
    encode_abort,
    read_frame,
    write_frame,
)
from olbsq.transfer import UserSession, ideal_functionality
from olbsq.zkp import prove_sp1

from fuzz import build_corpus, run_corpus
from helpers import make_world, replace

HOST = "127.0.0.1"
SID = bytes(range(16))


@contextlib.asynccontextmanager
async def running_provider(sk, pp, **overrides):
    config = ProviderConfig(catalog_path="", secret_key_path="", host=HOST, port=0, **overrides)
    provider = Provider(sk, pp, config)
    server = await provider.start()
    try:
        yield provider, server.sockets[0].getsockname()[1]
    finally:
        server.close()
        await server.wait_closed()


# -------------------------------------------------------------------- wire


def test_frame_round_trip():
    for t in MsgType:
        frame = Frame(SID, t, b"body" * t)
        assert decode_frame(frame.encode()) == frame


def test_frame_errors():
    good = Frame(SID, MsgType.QUERY, b"xyz").encode()
    with pytest.raises(FrameError):
        decode_frame(good[:-1])
    with pytest.raises(FrameError):
        decode_frame(good[:3])
    bad_version = bytearray(good)
    bad_version[4] = 9
    with pytest.raises(FrameError) as exc:
        decode_frame(bytes(bad_version))
    assert exc.value.reason is AbortReason.UNSUPPORTED_VERSION
    assert exc.value.session_id == SID
    bad_type = bytearray(good)
    bad_type[21] = 77
    with pytest.raises(FrameError):
        decode_frame(bytes(bad_type))
    with pytest.raises(FrameError):
        decode_frame(good, max_frame=10)
    with pytest.raises(ValueError):
        Frame(b"short", MsgType.QUERY).encode()
    with pytest.raises(ValueError):
        Frame(SID, MsgType.QUERY, bytes(100)).encode(max_frame=50)


def test_abort_body_round_trip():
    reason, text = decode_abort(encode_abort(AbortReason.TIMEOUT, "slow"))
    assert (reason, text) == (AbortReason.TIMEOUT, "slow")
    assert decode_abort(b"\xff\xff")[0] is AbortReason.INTERNAL_ERROR
    with pytest.raises(DecodeError):
        decode_abort(b"\x01")


def test_stream_reader_frames():
    async def go():
        reader = asyncio.StreamReader()
        reader.feed_data(Frame(SID, MsgType.ABORT, b"ab").encode() + b"\x00\x00")
        reader.feed_eof()
        first = await read_frame(reader)
        with pytest.raises(FrameError):
            await read_frame(reader)
        empty = asyncio.StreamReader()
        empty.feed_eof()
        return first, await read_frame(empty)

    first, none = asyncio.run(go())
    assert first.body == b"ab" and none is None


# ------------------------------------------------------------------ daemon


def test_end_to_end_over_tcp(world44):
    sk, pp, cat, plain = world44

    async def go():
        async with running_provider(sk, pp) as (provider, port):
            got = await run_query_async(HOST, port, pp, cat, 1, 2, 3, 2, random.Random(1))
            return got, provider.stats

    got, stats = asyncio.run(go())
    assert got == ideal_functionality(plain, 1, 2, 3, 2)
    assert stats["completed"] == 1


def test_concurrent_sessions(world44):
    sk, pp, cat, plain = world44
    queries = [(1, 1, 1, 1), (2, 2, 2, 2), (1, 3, 3, 1), (3, 1, 1, 3)]

    async def go():
        async with running_provider(sk, pp) as (provider, port):
            results = await asyncio.gather(*(run_query_async(HOST, port, pp, cat, *q) for q in queries))
            return results, provider.stats

    results, stats = asyncio.run(go())
    for q, got in zip(queries, results):
        assert got == ideal_functionality(plain, *q)
    assert stats["completed"] == len(queries)


async def _session_until_query(port, pp, cat, mutate):
    """Speak the protocol by hand; ``mutate`` edits the query before it is sent."""
    reader, writer = await asyncio.open_connection(HOST, port)
    try:
        await write_frame(writer, Frame(SID, MsgType.PROVIDER_PROOF))
        reply = await read_frame(reader)
        user = UserSession(pp, cat, 1, 1, 2, 2, random.Random(3))
        omega, proof = user.on_provider_proof(decode_provider_proof(reply.body))
        omega, proof = mutate(omega, proof)
        await write_frame(writer, Frame(SID, MsgType.QUERY, encode_query(omega, proof)))
        return await read_frame(reader)
    finally:
        writer.close()


def test_mutated_query_gets_proof_abort(world44):
    sk, pp, cat, _ = world44

    async def go():
        async with running_provider(sk, pp) as (provider, port):
            frame = await _session_until_query(port, pp, cat, lambda o, p: (o, replace(p, msg=bytes(32))))
            return frame, provider.stats

    frame, stats = asyncio.run(go())
    assert frame.msg_type is MsgType.ABORT and frame.session_id == SID
    assert decode_abort(frame.body)[0] is AbortReason.QUERY_PROOF_INVALID
    assert stats["aborted:QUERY_PROOF_INVALID"] == 1


def test_oversize_query_refused(world44):
    sk, pp, cat, _ = world44

    async def go():
        async with running_provider(sk, pp, max_cells=3) as (provider, port):
            with pytest.raises(ProtocolAbort) as exc:
                await run_query_async(HOST, port, pp, cat, 1, 1, 2, 2)
            return exc.value

    exc = asyncio.run(go())
    assert exc.reason is AbortReason.QUERY_TOO_LARGE


def test_client_aborts_on_bad_provider_key(world44):
    sk, pp, cat, _ = world44
    impostor = make_world(4, 4, seed=999)[0]

    async def go():
        async with running_provider(impostor, pp) as (provider, port):
            with pytest.raises(ProtocolAbort) as exc:
                await run_query_async(HOST, port, pp, cat, 1, 1, 1, 1)
            await asyncio.sleep(0.2)
            return exc.value, provider.stats

    exc, stats = asyncio.run(go())
    assert exc.reason is AbortReason.PROVIDER_PROOF_INVALID
    assert stats["client-aborted"] == 1


def test_out_of_range_query_never_connects(world44):
    _, pp, cat, _ = world44
    # Port 9 (discard) is never contacted: the range check runs first.
    with pytest.raises(ValueError):
        asyncio.run(run_query_async(HOST, 9, pp, cat, 4, 1, 1, 1))


def test_idle_client_times_out(world33):
    sk, pp, _, _ = world33

    async def go():
        async with running_provider(sk, pp, read_timeout=0.3) as (provider, port):
            reader, writer = await asyncio.open_connection(HOST, port)
            frame = await read_frame(reader)
            writer.close()
            return frame

    frame = asyncio.run(go())
    assert frame.msg_type is MsgType.ABORT
    assert decode_abort(frame.body)[0] is AbortReason.TIMEOUT


def test_provider_from_config_errors(tmp_path):
    with pytest.raises(RuntimeError):
        Provider.from_config(ProviderConfig(tmp_path / "missing", tmp_path / "missing"))
    with pytest.raises(ValueError):
        ProviderConfig("a", "b", max_cells=0)


def test_small_fuzz_corpus(world33):
    sk, pp, cat, _ = world33
    user = UserSession(pp, cat, 1, 1, 1, 1, random.Random(0))

    omega, proof = user.on_provider_proof(prove_sp1(sk.h_frak, pp, random.Random(0)))
    corpus = build_corpus(encode_query(omega, proof), 120, seed=7)

    async def go():
        async with running_provider(sk, pp, read_timeout=5) as (provider, port):
            outcomes = await run_corpus(HOST, port, corpus)
            # Still serving afterwards.
            await run_query_async(HOST, port, pp, cat, 1, 1, 2, 2)
            return outcomes, provider.stats

    outcomes, stats = asyncio.run(go())
    bad = [o for o in outcomes if not o.clean]
    assert not bad, bad[:5]
    assert stats["completed"] == 1
    assert stats["aborted:INTERNAL_ERROR"] == 0
