"""Names, the message types exchanged between nodes, and digest computation."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, Tuple, Union

LAMBDA_BITS = 256
DIGEST_BYTES = LAMBDA_BITS // 8
TRACE_TUPLE_BYTES = 38

# modeled fixed header sizes in bytes, per message class
HEADER_BYTES = {
    "interest": 32,
    "content": 64,
    "erase": 96,
    "nack": 32,
}


def hash_bytes(data: bytes, nbytes: int = DIGEST_BYTES) -> bytes:
    """Cryptographic hash H(.) truncated or extended to ``nbytes``."""
    if nbytes == 32:
        return hashlib.sha256(data).digest()
    return hashlib.shake_256(data).digest(nbytes)


def _lp(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


@dataclass(frozen=True, order=True)
class Name:
    """Hierarchical content name, e.g. ``/prefix/A/17``."""

    components: Tuple[bytes, ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("a name needs at least one component")
        comps = tuple(
            c.encode() if isinstance(c, str) else bytes(c) for c in self.components
        )
        if any(len(c) == 0 for c in comps):
            raise ValueError("name components must be non-empty")
        object.__setattr__(self, "components", comps)

    @classmethod
    def parse(cls, uri: Union[str, "Name"]) -> "Name":
        if isinstance(uri, Name):
            return uri
        parts = [p for p in uri.split("/") if p]
        return cls(tuple(p.encode() for p in parts))

    def __str__(self) -> str:
        return "/" + "/".join(c.decode(errors="backslashreplace") for c in self.components)

    def __len__(self) -> int:
        return len(self.components)

    def append(self, component: Union[str, bytes]) -> "Name":
        if isinstance(component, str):
            component = component.encode()
        return Name(self.components + (component,))

    def is_prefix_of(self, other: "Name") -> bool:
        n = len(self.components)
        return n <= len(other.components) and other.components[:n] == self.components

    def prefixes(self) -> Iterable["Name"]:
        """All prefixes, longest first (the name itself included)."""
        for i in range(len(self.components), 0, -1):
            yield Name(self.components[:i])

    def to_bytes(self) -> bytes:
        return _lp(b"".join(_lp(c) for c in self.components))


@dataclass(frozen=True)
class Interest:
    name: Name
    payload: bytes = b""
    trace: tuple = ()
    can_erase: bool = True


@dataclass(frozen=True)
class ContentObject:
    name: Name
    payload: bytes
    expiry_time: float = float("inf")
    token_digest: bytes | None = None
    can_erase: bool = True
    _digest: bytes | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.can_erase:
            if not self.token_digest:
                raise ValueError("erasable content must carry a token digest")
        elif self.token_digest is not None:
            raise ValueError("token digest is only present on erasable content")

    def to_bytes(self) -> bytes:
        return b"".join(
            (
                self.name.to_bytes(),
                _lp(self.payload),
                struct.pack(">d", self.expiry_time),
                _lp(self.token_digest or b""),
            )
        )

    @property
    def digest(self) -> bytes:
        # memoized; the object is immutable
        if self._digest is None:
            object.__setattr__(self, "_digest", content_digest(self))
        return self._digest


@dataclass(frozen=True)
class EraseMessage:
    name: Name
    digest: bytes
    token: bytes
    trace: tuple = ()

    def __post_init__(self):
        if len(self.digest) != len(self.token) or not self.digest:
            raise ValueError("digest and token must both be lambda-bit strings")


@dataclass(frozen=True)
class Nack:
    """Boolean "no such content" reply."""

    name: Name
    payload: bytes = b""


Message = Union[Interest, ContentObject, EraseMessage, Nack]


def content_digest(c: ContentObject, nbytes: int = DIGEST_BYTES) -> bytes:
    return hash_bytes(c.to_bytes(), nbytes)


def message_class(m: Message) -> str:
    if isinstance(m, Interest):
        return "interest"
    if isinstance(m, ContentObject):
        return "content"
    if isinstance(m, EraseMessage):
        return "erase"
    if isinstance(m, Nack):
        return "nack"
    raise TypeError(f"not a message: {m!r}")


def message_size_bytes(m: Message, headers: dict | None = None) -> int:
    """Modeled size: header constant + payload + 38 bytes per trace tuple."""
    headers = HEADER_BYTES if headers is None else headers
    size = headers[message_class(m)]
    if isinstance(m, (Interest, ContentObject, Nack)):
        size += len(m.payload)
    if isinstance(m, (Interest, EraseMessage)):
        size += TRACE_TUPLE_BYTES * len(m.trace)
    return size
