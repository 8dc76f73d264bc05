"""Malformed-frame corpus and a driver that replays it against a live provider."""

from __future__ import annotations

import asyncio
import dataclasses
import random
import struct

from olbsq.endpoint.wire import (
    DEFAULT_MAX_FRAME,
    HEADER_SIZE,
    PROTOCOL_VERSION,
    Frame,
    FrameError,
    MsgType,
    decode_frame,
)

from helpers import flip_random_bit


def _frame(sid: bytes, msg_type: int, body: bytes = b"", version: int = PROTOCOL_VERSION) -> bytes:
    return struct.pack(">IB", 1 + len(sid) + 1 + len(body), version) + sid + bytes([msg_type]) + body


def build_corpus(query_body: bytes, count: int, seed: int = 0) -> list[tuple[str, bytes]]:
    """``count`` malformed client byte streams, labelled by generator.

    ``query_body`` is a valid query message. It is never replayed verbatim:
    every case that carries it mutates it or wraps it wrongly.
    """
    rng = random.Random(seed)

    def sid():
        return rng.randbytes(16)

    def hello(s):
        return _frame(s, MsgType.PROVIDER_PROOF)

    def mutated_query():
        body = query_body
        choice = rng.randrange(4)
        if choice == 0:
            for _ in range(rng.randint(1, 4)):
                body = flip_random_bit(body, rng)
        elif choice == 1:
            body = body[: rng.randrange(len(body))]
        elif choice == 2:
            body = body + rng.randbytes(rng.randint(1, 64))
        else:
            pos = rng.randrange(len(body))
            body = body[:pos] + rng.randbytes(rng.randint(1, 96)) + body[pos + 1 :]
        return body if body != query_body else body + b"\x00"

    generators = {
        "random-bytes": lambda: rng.randbytes(rng.randint(0, 300)),
        "short-prefix": lambda: rng.randbytes(rng.randint(1, HEADER_SIZE - 1)),
        "length-too-small": lambda: struct.pack(">I", rng.randint(0, 17)) + rng.randbytes(rng.randint(0, 40)),
        "length-over-limit": lambda: struct.pack(">I", rng.randint(DEFAULT_MAX_FRAME, 0xFFFFFFFF)) + rng.randbytes(30),
        "length-beyond-data": lambda: struct.pack(">I", rng.randint(100, 5000)) + rng.randbytes(rng.randint(18, 99)),
        "bad-version": lambda: _frame(sid(), MsgType.PROVIDER_PROOF, version=rng.choice([0, 2, 255])),
        "unknown-type": lambda: _frame(sid(), rng.choice([0, 5, 9, 200, 255])),
        "hello-with-body": lambda: _frame(sid(), MsgType.PROVIDER_PROOF, rng.randbytes(rng.randint(1, 64))),
        "query-first": lambda: _frame(sid(), MsgType.QUERY, mutated_query()),
        "bundle-first": lambda: _frame(sid(), MsgType.KEY_BUNDLE, rng.randbytes(rng.randint(0, 64))),
        "abort-first": lambda: _frame(sid(), MsgType.ABORT, rng.randbytes(rng.randint(0, 8))),
        "mutated-query": lambda: (lambda s: hello(s) + _frame(s, MsgType.QUERY, mutated_query()))(sid()),
        "random-query-body": lambda: (lambda s: hello(s) + _frame(s, MsgType.QUERY, rng.randbytes(rng.randint(0, 2000))))(sid()),
        "query-other-session": lambda: hello(sid()) + _frame(sid(), MsgType.QUERY, mutated_query()),
        "double-hello": lambda: (lambda s: hello(s) + hello(s))(sid()),
        "hello-then-junk": lambda: hello(sid()) + rng.randbytes(rng.randint(1, 200)),
        "hello-then-truncated": lambda: (lambda s: hello(s) + _frame(s, MsgType.QUERY, mutated_query())[: rng.randint(5, 400)])(sid()),
        "hello-then-eof": lambda: hello(sid()),
        "empty": lambda: b"",
    }
    names = sorted(generators)
    corpus = []
    for n in range(count):
        name = names[n % len(names)] if n < len(names) else rng.choice(names)
        corpus.append((name, generators[name]()))
    return corpus


def split_frames(data: bytes) -> list[Frame]:
    frames, pos = [], 0
    while pos < len(data):
        if len(data) - pos < HEADER_SIZE:
            raise FrameError("trailing partial prefix")
        (length,) = struct.unpack(">I", data[pos : pos + HEADER_SIZE])
        end = pos + HEADER_SIZE + length
        frames.append(decode_frame(data[pos:end]))
        pos = end
    return frames


@dataclasses.dataclass
class Outcome:
    label: str
    clean: bool
    detail: str


async def replay(host: str, port: int, label: str, data: bytes, timeout: float = 20.0) -> Outcome:
    """Send ``data``, half-close, and classify what the provider did."""
    reader, writer = await asyncio.open_connection(host, port)
    try:
        if data:
            writer.write(data)
            await writer.drain()
        writer.write_eof()
        response = await asyncio.wait_for(reader.read(), timeout)
    except (ConnectionError, asyncio.TimeoutError) as exc:
        return Outcome(label, False, f"{type(exc).__name__}")
    finally:
        writer.close()
    try:
        frames = split_frames(response)
    except FrameError as exc:
        return Outcome(label, False, f"unparsable response: {exc}")
    types = [f.msg_type for f in frames]
    if MsgType.KEY_BUNDLE in types:
        return Outcome(label, False, "provider released keys")
    if types and types[-1] is MsgType.ABORT:
        return Outcome(label, True, "abort frame")
    if types in ([], [MsgType.PROVIDER_PROOF]):
        # Peer hung up before or after the hello reply; nothing to abort to.
        return Outcome(label, True, "closed")
    return Outcome(label, False, f"unexpected frame sequence {[t.name for t in types]}")


async def run_corpus(host: str, port: int, corpus, concurrency: int = 16) -> list[Outcome]:
    sem = asyncio.Semaphore(concurrency)

    async def one(label, data):
        async with sem:
            return await replay(host, port, label, data)

    return await asyncio.gather(*(one(label, data) for label, data in corpus))
