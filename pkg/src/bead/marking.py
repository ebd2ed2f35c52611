"""Hop-sequence interest marking with per-router MAC tags, and the producer trace store.

Traces are kept head-first: each router inserts its tuple at index 0, so on the
way back the router an erase reaches first finds its own tuple at the head.
"""

from __future__ import annotations

import hashlib
import hmac
import random
import struct
from dataclasses import dataclass, replace

from .messages import TRACE_TUPLE_BYTES, EraseMessage, Interest, Name

TAG_BYTES = 32
_TUPLE = struct.Struct(">IH")


class MarkingError(Exception):
    pass


class TagMismatch(MarkingError):
    pass


class WrongRouter(MarkingError):
    pass


class NoTraces(LookupError):
    pass


@dataclass(frozen=True)
class TraceTuple:
    router_id: int
    face_id: int
    tag: bytes

    def __post_init__(self):
        if not 0 <= self.router_id < 1 << 32:
            raise ValueError("router_id must fit in 4 bytes")
        if not 0 <= self.face_id < 1 << 16:
            raise ValueError("face_id must fit in 2 bytes")
        if len(self.tag) != TAG_BYTES:
            raise ValueError(f"tag must be {TAG_BYTES} bytes")

    def to_bytes(self) -> bytes:
        return _TUPLE.pack(self.router_id, self.face_id) + self.tag

    @classmethod
    def from_bytes(cls, raw: bytes) -> "TraceTuple":
        if len(raw) != TRACE_TUPLE_BYTES:
            raise ValueError(f"trace tuple is {TRACE_TUPLE_BYTES} bytes")
        rid, fid = _TUPLE.unpack(raw[:6])
        return cls(rid, fid, raw[6:])


@dataclass(frozen=True)
class MarkingKey:
    key: bytes

    @classmethod
    def generate(cls, rng: random.Random, nbytes: int = 32) -> "MarkingKey":
        return cls(rng.randbytes(nbytes))

    def tag(self, name: Name, trace, router_id: int = 0, face_id: int = 0) -> bytes:
        return hmac.new(self.key, _mac_input(name, trace, router_id, face_id), hashlib.sha256).digest()


def _mac_input(name: Name, trace, router_id: int, face_id: int) -> bytes:
    # the tuple's own (router, face) is covered too, otherwise the face could be rewritten
    return (_TUPLE.pack(router_id, face_id) + name.to_bytes()
            + b"".join(t.to_bytes() for t in trace))


def trace_bytes(trace) -> int:
    return TRACE_TUPLE_BYTES * len(trace)


def append_trace(interest: Interest, router_id: int, face_id: int, key: MarkingKey) -> Interest:
    """Mark ``interest`` with (router_id, face_id, MAC over name and existing trace)."""
    tag = key.tag(interest.name, interest.trace, router_id, face_id)
    head = TraceTuple(router_id, face_id, tag)
    return replace(interest, trace=(head,) + tuple(interest.trace))


def verify_head(name: Name, trace, router_id: int, key: MarkingKey) -> TraceTuple:
    if not trace:
        raise WrongRouter("empty trace")
    head = trace[0]
    if head.router_id != router_id:
        raise WrongRouter(f"trace head names router {head.router_id}, not {router_id}")
    if not hmac.compare_digest(key.tag(name, trace[1:], head.router_id, head.face_id), head.tag):
        raise TagMismatch(f"bad tag for {name} at router {router_id}")
    return head


def pop_and_verify(erase: EraseMessage, router_id: int, key: MarkingKey) -> tuple[int, EraseMessage]:
    """Check this router's tuple at the head of the erase trace and strip it.

    Returns the recorded face and the erase carrying the shortened trace.
    Raises WrongRouter or TagMismatch; the caller then tries its other strategies.
    """
    head = verify_head(erase.name, erase.trace, router_id, key)
    return head.face_id, replace(erase, trace=tuple(erase.trace[1:]))


class TraceStore:
    """Traces received by a producer, deduplicated per name, in arrival order."""

    def __init__(self):
        self._traces: dict[Name, dict[tuple, None]] = {}

    def record_trace(self, name: Name, trace) -> bool:
        """Store ``trace`` for ``name``; returns False if it was already present."""
        seen = self._traces.setdefault(name, {})
        trace = tuple(trace)
        if trace in seen:
            return False
        seen[trace] = None
        return True

    def traces(self, name: Name) -> list[tuple]:
        return list(self._traces.get(name, ()))

    def __contains__(self, name) -> bool:
        return bool(self._traces.get(name))

    def __len__(self) -> int:
        return sum(len(v) for v in self._traces.values())


def record_trace(store: TraceStore, name: Name, trace) -> TraceStore:
    store.record_trace(name, trace)
    return store


def erase_messages_for(store: TraceStore, name: Name, digest: bytes, token: bytes) -> list[EraseMessage]:
    """One erase per stored path, each carrying that path's trace."""
    traces = store.traces(name)
    if not traces:
        raise NoTraces(str(name))
    return [EraseMessage(name, digest, token, trace) for trace in traces]


def interest_growth(hops: int) -> int:
    """Extra interest bytes after ``hops`` marking routers."""
    return TRACE_TUPLE_BYTES * hops


def aggregated_trace_size(h: int) -> int:
    """Trace bytes for all 2**h leaf paths of a height-h tree (h - 1 routers per path)."""
    if h < 1:
        raise ValueError("tree height must be >= 1")
    return (2 ** h) * (h - 1) * TRACE_TUPLE_BYTES
