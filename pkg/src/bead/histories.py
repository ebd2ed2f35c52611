"""Per-interface forwarder histories and the saturation / Bloom sizing calculators.

A history records digests of content forwarded on one interface so that a later
erase for that digest can be sent back down the same interface.
"""

from __future__ import annotations

import abc
import math
import random
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional, Union

import numpy as np

FP_BASE = 0.6185


class ForwarderHistory(abc.ABC):
    kind = "abstract"

    @abc.abstractmethod
    def insert(self, digest: bytes, now: float = 0.0) -> None:
        ...

    @abc.abstractmethod
    def query(self, digest: bytes) -> bool:
        ...

    def advance(self, now: float, rng: Optional[random.Random] = None) -> None:
        """Time-driven maintenance (chunk rotation, random decay). Default: none."""

    def __contains__(self, digest: bytes) -> bool:
        return self.query(digest)


class NullHistory(ForwarderHistory):
    kind = "none"

    def insert(self, digest, now=0.0):
        pass

    def query(self, digest):
        return False

    def __len__(self):
        return 0


class LosslessHistory(ForwarderHistory):
    """Hash-set history split into chunks; the oldest chunk is dropped whole on saturation.

    Chunks rotate on a simulated-time window when ``chunk_window`` is given,
    otherwise every ``ceil(capacity / chunk_count)`` entries. With no capacity the
    history never evicts.
    """

    kind = "lossless"

    def __init__(self, capacity: Optional[int] = None, chunk_count: int = 12,
                 chunk_window: Optional[float] = None):
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive")
        if chunk_count < 1:
            raise ValueError("chunk_count must be >= 1")
        self.capacity = capacity
        self.chunk_count = chunk_count
        self.chunk_window = chunk_window
        self.chunks: deque[tuple[float, set]] = deque([(0.0, set())])
        self._where: dict[bytes, set] = {}
        self.evicted_chunks = 0

    @property
    def chunk_size(self) -> Optional[int]:
        if self.capacity is None or self.chunk_window is not None:
            return None
        return -(-self.capacity // self.chunk_count)

    def __len__(self) -> int:
        return len(self._where)

    def _open_chunk(self, now: float) -> None:
        self.chunks.append((now, set()))

    def _rotate(self, now: float) -> None:
        start, current = self.chunks[-1]
        if self.chunk_window is not None:
            if now - start >= self.chunk_window:
                # align to window boundaries so idle periods do not skew chunk starts
                steps = math.floor((now - start) / self.chunk_window)
                self._open_chunk(start + steps * self.chunk_window)
        elif self.chunk_size is not None and len(current) >= self.chunk_size:
            self._open_chunk(now)

    def _evict_oldest(self, now: float) -> None:
        _, oldest = self.chunks.popleft()
        for d in oldest:
            del self._where[d]
        self.evicted_chunks += 1
        if not self.chunks:
            self._open_chunk(now)

    def insert(self, digest, now=0.0):
        old = self._where.pop(digest, None)
        if old is not None:
            old.discard(digest)
        self._rotate(now)
        while self.capacity is not None and len(self._where) >= self.capacity:
            self._evict_oldest(now)
        current = self.chunks[-1][1]
        current.add(digest)
        self._where[digest] = current

    def query(self, digest):
        return digest in self._where

    def advance(self, now, rng=None):
        self._rotate(now)
        # drop empty leading chunks so the deque stays bounded
        while len(self.chunks) > 1 and not self.chunks[0][1]:
            self.chunks.popleft()


def bloom_indices(digest: bytes, k: int, m: int) -> Iterator[int]:
    """k positions in [0, m) from one digest by enhanced double hashing."""
    h1 = int.from_bytes(digest[:8], "big")
    h2 = int.from_bytes(digest[8:16], "big") | 1
    for i in range(k):
        yield (h1 + i * h2 + (i * i * i - i) // 6) % m


class BloomHistory(ForwarderHistory):
    """Plain Bloom filter; flushed once the set-bit fraction exceeds ``reset_threshold``."""

    kind = "bloom"

    def __init__(self, m_bits: int, k: int, reset_threshold: Optional[float] = 0.5):
        if m_bits < 1 or k < 1:
            raise ValueError("m_bits and k must be positive")
        self.m = m_bits
        self.k = k
        self.reset_threshold = reset_threshold
        self.bits = bytearray((m_bits + 7) // 8)
        self.bits_set = 0
        self.inserted_count = 0
        self.resets = 0

    def __len__(self) -> int:
        return self.inserted_count

    @property
    def fill_ratio(self) -> float:
        return self.bits_set / self.m

    def reset(self) -> None:
        self.bits = bytearray(len(self.bits))
        self.bits_set = 0
        self.inserted_count = 0
        self.resets += 1

    def insert(self, digest, now=0.0):
        bits = self.bits
        for pos in bloom_indices(digest, self.k, self.m):
            byte, mask = pos >> 3, 1 << (pos & 7)
            if not bits[byte] & mask:
                bits[byte] |= mask
                self.bits_set += 1
        self.inserted_count += 1
        if self.reset_threshold is not None and self.fill_ratio > self.reset_threshold:
            self.reset()

    def query(self, digest):
        bits = self.bits
        return all(bits[p >> 3] & (1 << (p & 7)) for p in bloom_indices(digest, self.k, self.m))


class CountingBloomHistory(ForwarderHistory):
    """Counting Bloom filter whose elements age out through random counter decrements.

    Entries cannot be removed by value (the router no longer knows them), so with
    ``mean_expiry`` set the filter sheds an estimated ``occupancy / mean_expiry``
    elements per second, each shed element costing k random decrements.
    """

    kind = "cbf"

    def __init__(self, m_bits: int, k: int, counter_bits: int = 4,
                 mean_expiry: Optional[float] = None):
        if m_bits < 1 or k < 1:
            raise ValueError("m_bits and k must be positive")
        self.m = m_bits
        self.k = k
        self.max_count = (1 << counter_bits) - 1
        self.mean_expiry = mean_expiry
        self.counters = np.zeros(m_bits, dtype=np.uint16)
        self._last = 0.0
        self._carry = 0.0
        self.decrements = 0

    def __len__(self) -> int:
        return int(round(self.occupancy))

    @property
    def occupancy(self) -> float:
        return float(self.counters.sum()) / self.k

    def insert(self, digest, now=0.0):
        c = self.counters
        for pos in bloom_indices(digest, self.k, self.m):
            if c[pos] < self.max_count:
                c[pos] += 1

    def query(self, digest):
        c = self.counters
        return all(c[p] for p in bloom_indices(digest, self.k, self.m))

    def decrement_random(self, count: int, rng: random.Random) -> int:
        """Decrement ``count`` randomly chosen non-zero counters; returns how many were hit."""
        pool = np.flatnonzero(self.counters).tolist()
        c = self.counters
        done = 0
        while done < count and pool:
            i = rng.randrange(len(pool))
            pos = pool[i]
            c[pos] -= 1
            done += 1
            if not c[pos]:
                # swap-remove so exhausted counters are never drawn again
                pool[i] = pool[-1]
                pool.pop()
        self.decrements += done
        return done

    def advance(self, now, rng=None):
        dt = now - self._last
        self._last = now
        if not self.mean_expiry or dt <= 0 or rng is None:
            return
        self._carry += self.k * self.occupancy * dt / self.mean_expiry
        n = int(self._carry)
        self._carry -= n
        if n:
            self.decrement_random(n, rng)


# --- configuration -----------------------------------------------------------

@dataclass
class HistoryConfig:
    type: str = "lossless"  # lossless | bloom | cbf | none
    capacity_entries: Optional[int] = None
    chunk_count: int = 12
    chunk_window_s: Optional[float] = None
    m_bits: int = 1 << 20
    k: Union[int, str] = "auto"
    expected_n: Optional[int] = None
    k_max: Optional[int] = None
    reset_threshold: Optional[float] = 0.5
    counter_bits: int = 4
    mean_expiry_s: Optional[float] = None

    def resolved_k(self) -> int:
        if self.k != "auto":
            return int(self.k)
        if not self.expected_n:
            raise ValueError("k = auto needs expected_n")
        return optimal_k(self.m_bits, self.expected_n, self.k_max)


HISTORY_TYPES = ("lossless", "bloom", "cbf", "none")


def make_history(cfg: HistoryConfig) -> ForwarderHistory:
    if cfg.type == "lossless":
        return LosslessHistory(cfg.capacity_entries, cfg.chunk_count, cfg.chunk_window_s)
    if cfg.type == "bloom":
        return BloomHistory(cfg.m_bits, cfg.resolved_k(), cfg.reset_threshold)
    if cfg.type == "cbf":
        return CountingBloomHistory(cfg.m_bits, cfg.resolved_k(), cfg.counter_bits,
                                    cfg.mean_expiry_s)
    if cfg.type == "none":
        return NullHistory()
    raise ValueError(f"unknown history type {cfg.type!r}; expected one of {HISTORY_TYPES}")


# --- analysis ----------------------------------------------------------------

def _positive(**kw) -> None:
    for key, v in kw.items():
        if not v > 0:
            raise ValueError(f"{key} must be positive, got {v!r}")


def optimal_k(m: float, n: float, k_max: Optional[int] = None) -> int:
    """Integer hash count minimizing the false positive rate, at least 1.

    The continuous optimum is ln 2 * m / n; of its floor and ceiling the one with
    the lower (1 - e^(-kn/m))^k wins, which is plain rounding except near .5.
    """
    _positive(m=m, n=n)
    x = math.log(2) * m / n
    lo, hi = max(1, math.floor(x)), max(1, math.ceil(x))
    k = min((lo, hi), key=lambda c: (log_false_positive_rate_k(m, n, c), c))
    if k_max is not None:
        k = min(k, k_max)
    return k


def false_positive_rate(m: float, n: float) -> float:
    """Approximate FP rate at optimal k: 0.6185 ** (m / n)."""
    _positive(m=m, n=n)
    return FP_BASE ** (m / n)


def false_positive_rate_k(m: float, n: float, k: int) -> float:
    """FP rate for an explicit hash count: (1 - exp(-k n / m)) ** k."""
    _positive(m=m, n=n, k=k)
    return (1.0 - math.exp(-k * n / m)) ** k


def log_false_positive_rate_k(m: float, n: float, k: int) -> float:
    """Natural log of ``false_positive_rate_k``; stays finite where the rate underflows."""
    _positive(m=m, n=n, k=k)
    return k * math.log1p(-math.exp(-k * n / m))


def saturation_time(capacity_entries: float, rate: float) -> float:
    """Seconds until a lossless history of ``capacity_entries`` fills at ``rate`` entries/s."""
    _positive(rate=rate)
    if capacity_entries < 0:
        raise ValueError("capacity must be non-negative")
    return capacity_entries / rate


def bloom_saturation_time(m: float, k: int, rate: float) -> float:
    """Worst case: every insert sets k fresh bits, so m / k inserts exhaust the filter."""
    _positive(m=m, k=k, rate=rate)
    return (m / k) / rate
