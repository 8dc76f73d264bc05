"""Operation counters hooked into the group layer.

Counters live in a context variable, so each thread (and each asyncio task)
sees only the region it opened itself. Nothing is counted outside a region.
"""

from __future__ import annotations

import contextlib
import dataclasses
from contextvars import ContextVar
from typing import Iterator


@dataclasses.dataclass
class OpCounts:
    exp_source: int = 0
    exp_target: int = 0
    pairings: int = 0
    hashes: int = 0
    bytes_sent_user: int = 0
    bytes_sent_provider: int = 0

    def as_dict(self) -> dict[str, int]:
        return dataclasses.asdict(self)

    def __add__(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(**{k: v + getattr(other, k) for k, v in self.as_dict().items()})


_active: ContextVar[OpCounts | None] = ContextVar("olbsq_op_counts", default=None)


def record(field: str, amount: int = 1) -> None:
    counts = _active.get()
    if counts is not None:
        setattr(counts, field, getattr(counts, field) + amount)


@contextlib.contextmanager
def counting() -> Iterator[OpCounts]:
    """Open a counting region. Regions do not nest."""
    if _active.get() is not None:
        raise RuntimeError("operation counting regions cannot be nested")
    counts = OpCounts()
    token = _active.set(counts)
    try:
        yield counts
    finally:
        _active.reset(token)


@contextlib.contextmanager
def suspended() -> Iterator[None]:
    """Stop counting for plumbing work inside an open region."""
    token = _active.set(None)
    try:
        yield
    finally:
        _active.reset(token)
