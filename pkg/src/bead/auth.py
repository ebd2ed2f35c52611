"""Deletion tokens: a producer reveals the pre-image x of y = H(x) to authorize an erase."""

from __future__ import annotations

import hmac
import random

from .messages import DIGEST_BYTES, Name, hash_bytes


def generate_token(rng: random.Random, nbytes: int = DIGEST_BYTES) -> tuple[bytes, bytes]:
    """Return a fresh ``(token, token_digest)`` pair drawn from ``rng``."""
    token = rng.randbytes(nbytes)
    return token, hash_bytes(token, nbytes)


def verify_token(token: bytes, digest: bytes) -> bool:
    if len(token) != len(digest):
        return False
    return hmac.compare_digest(hash_bytes(token, len(digest)), digest)


class TokenStore:
    """Producer-side map from ``(name, content digest)`` to deletion token."""

    def __init__(self):
        self._tokens: dict[tuple[Name, bytes], bytes] = {}

    def put(self, name: Name, digest: bytes, token: bytes) -> None:
        self._tokens[(name, digest)] = token

    def get(self, name: Name, digest: bytes) -> bytes:
        return self._tokens[(name, digest)]

    def __contains__(self, key) -> bool:
        return key in self._tokens

    def __len__(self) -> int:
        return len(self._tokens)
