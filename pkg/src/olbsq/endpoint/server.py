"""Provider daemon: one transfer session per TCP connection.

Session script, as seen by the server::

    <- PROVIDER_PROOF (empty body: the client's hello)
    -> PROVIDER_PROOF (provider key proof)
    <- QUERY
    -> KEY_BUNDLE, then close

Anything else, or any failed check, gets an ABORT frame with a reason code and
the connection is closed. Proof generation and verification run in worker
threads so one slow session does not stall the event loop.
"""

from __future__ import annotations

import asyncio
import collections
import dataclasses
import logging
import os
from pathlib import Path

from olbsq.catalog import PublicParams, SecretKey, load_catalog, load_secret_key
from olbsq.errors import AbortReason, DecodeError, ProtocolAbort
from olbsq.messages import decode_query, encode_key_bundle, encode_provider_proof
from olbsq.transfer import ProviderSession

from olbsq.endpoint.wire import (
    DEFAULT_MAX_FRAME,
    ZERO_SESSION,
    Frame,
    FrameError,
    MsgType,
    decode_abort,
    encode_abort,
    read_frame,
    write_frame,
)

log = logging.getLogger("olbsq.server")


@dataclasses.dataclass
class ProviderConfig:
    catalog_path: str | Path
    secret_key_path: str | Path
    host: str = "127.0.0.1"
    port: int = 7461
    max_cells: int = 64
    log_level: str = "INFO"
    read_timeout: float = 30.0
    max_frame: int = DEFAULT_MAX_FRAME

    def __post_init__(self) -> None:
        if self.max_cells < 1:
            raise ValueError("max_cells must be at least 1")


class Provider:
    """Loaded provider state plus the per-connection handler."""

    def __init__(self, sk: SecretKey, pp: PublicParams, config: ProviderConfig):
        self.sk, self.pp, self.config = sk, pp, config
        self.stats: collections.Counter[str] = collections.Counter()

    @classmethod
    def from_config(cls, config: ProviderConfig) -> "Provider":
        try:
            pp, _ = load_catalog(config.catalog_path)
            sk, m, n = load_secret_key(config.secret_key_path)
        except (OSError, DecodeError) as exc:
            raise RuntimeError(f"cannot load provider files: {exc}") from exc
        if (m, n) != (pp.m, pp.n):
            raise RuntimeError("secret key and catalog were generated for different grids")
        return cls(sk, pp, config)

    async def _read(self, reader: asyncio.StreamReader) -> Frame | None:
        return await asyncio.wait_for(read_frame(reader, self.config.max_frame), self.config.read_timeout)

    async def _abort(self, writer: asyncio.StreamWriter, sid: bytes, reason: AbortReason, detail: str) -> None:
        self.stats[f"aborted:{reason.name}"] += 1
        log.info("session %s aborted: %s (%s)", sid.hex()[:8], reason.name, detail)
        try:
            await write_frame(writer, Frame(sid, MsgType.ABORT, encode_abort(reason, detail)))
        except (ConnectionError, RuntimeError):
            pass

    async def handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        sid = ZERO_SESSION
        self.stats["connections"] += 1
        try:
            frame = await self._read(reader)
            if frame is None:
                return
            sid = frame.session_id
            if frame.msg_type is not MsgType.PROVIDER_PROOF or frame.body:
                raise ProtocolAbort(AbortReason.UNEXPECTED_MESSAGE, "session must open with an empty hello")

            session = ProviderSession(self.sk, self.pp, max_cells=self.config.max_cells)
            proof1 = await asyncio.to_thread(session.start)
            await write_frame(writer, Frame(sid, MsgType.PROVIDER_PROOF, encode_provider_proof(proof1)))

            frame = await self._read(reader)
            if frame is None:
                self.stats["aborted:DISCONNECTED"] += 1
                return
            if frame.session_id != sid:
                raise ProtocolAbort(AbortReason.UNEXPECTED_MESSAGE, "session id changed mid-session")
            if frame.msg_type is MsgType.ABORT:
                reason, detail = decode_abort(frame.body)
                self.stats["client-aborted"] += 1
                log.info("client aborted session %s: %s %s", sid.hex()[:8], reason.name, detail)
                return
            if frame.msg_type is not MsgType.QUERY:
                raise ProtocolAbort(AbortReason.UNEXPECTED_MESSAGE, f"expected QUERY, got {frame.msg_type.name}")
            try:
                omega, proof_u = decode_query(frame.body)
            except DecodeError as exc:
                raise ProtocolAbort(AbortReason.MALFORMED_MESSAGE, str(exc)) from exc

            keys, proof2 = await asyncio.to_thread(session.on_query, omega, proof_u)
            body = await asyncio.to_thread(encode_key_bundle, keys, proof2)
            await write_frame(writer, Frame(sid, MsgType.KEY_BUNDLE, body), self.config.max_frame)
            self.stats["completed"] += 1
            log.info("session %s served %dx%d", sid.hex()[:8], omega.l, omega.k)
        except FrameError as exc:
            await self._abort(writer, exc.session_id if sid == ZERO_SESSION else sid, exc.reason, str(exc))
        except ProtocolAbort as exc:
            await self._abort(writer, sid, exc.reason, exc.detail)
        except asyncio.TimeoutError:
            await self._abort(writer, sid, AbortReason.TIMEOUT, "read timed out")
        except (ConnectionError, asyncio.IncompleteReadError):
            self.stats["aborted:DISCONNECTED"] += 1
        except Exception as exc:  # per-session failures must never take the daemon down
            log.exception("internal error in session %s", sid.hex()[:8])
            await self._abort(writer, sid, AbortReason.INTERNAL_ERROR, type(exc).__name__)
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    async def start(self) -> asyncio.base_events.Server:
        return await asyncio.start_server(self.handle, self.config.host, self.config.port)


async def serve_async(config: ProviderConfig, ready: asyncio.Event | None = None) -> None:
    provider = Provider.from_config(config)
    server = await provider.start()
    addrs = ", ".join(str(s.getsockname()) for s in server.sockets)
    log.info("serving %dx%d catalog on %s", provider.pp.m, provider.pp.n, addrs)
    if ready is not None:
        ready.set()
    async with server:
        await server.serve_forever()


def serve(config: ProviderConfig) -> None:
    """Run the provider until interrupted."""
    level = os.environ.get("OLBSQ_LOG_LEVEL", config.log_level)
    logging.basicConfig(level=level.upper(), format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        asyncio.run(serve_async(config))
    except KeyboardInterrupt:
        log.info("shutting down")
