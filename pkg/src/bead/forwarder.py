"""CCN forwarding engine (content store, PIT, FIB) with erase handling.

Erase routing tries, in order: the hop-sequence trace carried by the erase, the
faces recorded with the cached copy, the per-interface forwarder histories, and
finally reverse-path flooding or drop.
"""

from __future__ import annotations

import random
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .auth import verify_token
from .histories import ForwarderHistory, HistoryConfig, make_history
from .marking import MarkingError, MarkingKey, append_trace, pop_and_verify
from .messages import ContentObject, EraseMessage, Interest, Message, Name, Nack

FLOOD_FALLBACKS = ("flood", "drop")
INSERT_MODES = ("on_forward", "on_evict")

Emission = tuple[Message, int]


class Fib:
    """Name-prefix routing table with longest-prefix-match lookup."""

    def __init__(self):
        self._entries: dict[Name, set[int]] = {}

    def add(self, prefix: Name, face: int) -> None:
        self._entries.setdefault(Name.parse(prefix), set()).add(face)

    def remove(self, prefix: Name, face: Optional[int] = None) -> None:
        prefix = Name.parse(prefix)
        if face is None:
            self._entries.pop(prefix, None)
            return
        faces = self._entries.get(prefix)
        if faces is not None:
            faces.discard(face)
            if not faces:
                del self._entries[prefix]

    def lookup(self, name: Name) -> set[int]:
        for p in name.prefixes():
            faces = self._entries.get(p)
            if faces:
                return set(faces)
        return set()

    def entries(self) -> dict[Name, set[int]]:
        return {p: set(f) for p, f in self._entries.items()}

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class PitEntry:
    name: Name
    downstream_faces: set
    created_at: float


@dataclass
class CacheEntry:
    content: ContentObject
    forwarded_faces: set
    inserted_at: float
    last_access: float

    @property
    def digest(self) -> bytes:
        return self.content.digest


@dataclass
class RouterConfig:
    cache_capacity: int = 1000
    history: HistoryConfig = field(default_factory=HistoryConfig)
    marking_enabled: bool = False
    flood_fallback: str = "drop"
    in_cache_history: bool = True
    history_insert: str = "on_forward"
    # False: compatibility mode, every content object is treated as erasable
    honor_can_erase: bool = False

    def __post_init__(self):
        if self.flood_fallback not in FLOOD_FALLBACKS:
            raise ValueError(f"flood_fallback must be one of {FLOOD_FALLBACKS}")
        if self.history_insert not in INSERT_MODES:
            raise ValueError(f"history_insert must be one of {INSERT_MODES}")
        if self.cache_capacity < 0:
            raise ValueError("cache_capacity must be >= 0")


@dataclass
class Deletion:
    router: str
    name: Name
    digest: bytes
    time: float
    verified: bool


@dataclass
class RouterCounters:
    no_route: int = 0
    unsolicited: int = 0
    auth_failures: int = 0
    marking_failures: int = 0
    duplicate_erases: int = 0
    cache_evictions: int = 0
    cache_hits: int = 0
    collapsed: int = 0
    # erase routing decisions by strategy
    via_marking: int = 0
    via_cache: int = 0
    via_history: int = 0
    via_flood: int = 0
    dropped_erases: int = 0


class Router:
    def __init__(self, node_id: str, router_id: int, faces: Iterable[int],
                 config: Optional[RouterConfig] = None,
                 rng: Optional[random.Random] = None):
        self.node_id = node_id
        self.router_id = router_id
        self.faces = sorted(set(faces))
        self.config = config or RouterConfig()
        self.fib = Fib()
        self.pit: dict[Name, PitEntry] = {}
        self.cs: OrderedDict[Name, CacheEntry] = OrderedDict()
        self.histories: dict[int, ForwarderHistory] = {
            f: make_history(self.config.history) for f in self.faces
        }
        self.keeps_histories = self.config.history.type != "none"
        self.key = MarkingKey.generate(rng or random.Random(router_id))
        self.counters = RouterCounters()
        self.deletions: list[Deletion] = []
        self._seen_erases: set = set()

    def __repr__(self):
        return f"Router({self.node_id!r}, faces={self.faces})"

    # -- helpers --------------------------------------------------------------

    def _erasable(self, flag: bool) -> bool:
        return flag or not self.config.honor_can_erase

    def _record_history(self, content: ContentObject, faces: Iterable[int], now: float) -> None:
        if not self.keeps_histories or not self._erasable(content.can_erase):
            return
        for f in faces:
            self.histories[f].insert(content.digest, now)

    def _drop_entry(self, name: Name, now: float) -> None:
        entry = self.cs.pop(name)
        if self.config.history_insert == "on_evict":
            self._record_history(entry.content, entry.forwarded_faces, now)

    def cache_lookup(self, name: Name, now: float) -> Optional[CacheEntry]:
        entry = self.cs.get(name)
        if entry is None:
            return None
        if now >= entry.content.expiry_time:
            self._drop_entry(name, now)
            return None
        return entry

    def caches(self, name: Name, digest: bytes, now: float) -> bool:
        entry = self.cs.get(name)
        return entry is not None and entry.digest == digest and now < entry.content.expiry_time

    def _cache_insert(self, content: ContentObject, faces: set, now: float) -> None:
        cap = self.config.cache_capacity
        if cap == 0 or now >= content.expiry_time:
            return
        if content.name in self.cs:
            self._drop_entry(content.name, now)
        while len(self.cs) >= cap:
            lru = next(iter(self.cs))
            self._drop_entry(lru, now)
            self.counters.cache_evictions += 1
        self.cs[content.name] = CacheEntry(content, set(faces), now, now)

    def sweep(self, now: float, rng: Optional[random.Random] = None) -> None:
        """Flush expired cache entries and run history maintenance."""
        for name in [n for n, e in self.cs.items() if now >= e.content.expiry_time]:
            self._drop_entry(name, now)
        for f in self.faces:
            self.histories[f].advance(now, rng)

    # -- packet handlers ------------------------------------------------------

    def on_interest(self, interest: Interest, arrival_face: int, now: float = 0.0) -> list[Emission]:
        if arrival_face not in self.histories:
            raise ValueError(f"{self.node_id} has no face {arrival_face}")
        name = interest.name
        entry = self.cache_lookup(name, now)
        if entry is not None:
            self.cs.move_to_end(name)
            entry.last_access = now
            entry.forwarded_faces.add(arrival_face)
            self.counters.cache_hits += 1
            if self.config.history_insert == "on_forward" or self.config.cache_capacity == 0:
                self._record_history(entry.content, (arrival_face,), now)
            return [(entry.content, arrival_face)]

        pending = self.pit.get(name)
        if pending is not None:
            pending.downstream_faces.add(arrival_face)
            self.counters.collapsed += 1
            return []

        upstream = sorted(self.fib.lookup(name) - {arrival_face})
        if not upstream:
            self.counters.no_route += 1
            return [(Nack(name), arrival_face)]

        self.pit[name] = PitEntry(name, {arrival_face}, now)
        if self.config.marking_enabled and self._erasable(interest.can_erase):
            interest = append_trace(interest, self.router_id, arrival_face, self.key)
        return [(interest, upstream[0])]

    def on_content(self, content: ContentObject, arrival_face: int, now: float = 0.0) -> list[Emission]:
        entry = self.pit.pop(content.name, None)
        if entry is None:
            self.counters.unsolicited += 1
            return []
        faces = sorted(entry.downstream_faces)
        self._cache_insert(content, set(faces), now)
        if self.config.history_insert == "on_forward" or self.config.cache_capacity == 0:
            self._record_history(content, faces, now)
        return [(content, f) for f in faces]

    def on_nack(self, nack: Nack, arrival_face: int, now: float = 0.0) -> list[Emission]:
        entry = self.pit.pop(nack.name, None)
        if entry is None:
            return []
        return [(nack, f) for f in sorted(entry.downstream_faces)]

    def flood_erase(self, erase: EraseMessage, arrival_face: Optional[int]) -> list[Emission]:
        """Reverse-path flooding: every face without a FIB entry for the name, minus the arrival face."""
        faceset = self.fib.lookup(erase.name)
        return [(erase, f) for f in self.faces if f not in faceset and f != arrival_face]

    def on_erase(self, erase: EraseMessage, arrival_face: Optional[int], now: float = 0.0) -> list[Emission]:
        key = (erase.name, erase.digest, erase.token, erase.trace)
        if key in self._seen_erases:
            self.counters.duplicate_erases += 1
            return []
        self._seen_erases.add(key)

        # authenticate against the cached copy, if any
        cached = None
        entry = self.cache_lookup(erase.name, now)
        if entry is not None and entry.digest == erase.digest:
            if not verify_token(erase.token, entry.content.token_digest):
                self.counters.auth_failures += 1
                return []
            cached = self.cs.pop(erase.name)
            self.deletions.append(Deletion(self.node_id, erase.name, erase.digest, now,
                                           verify_token(erase.token, cached.content.token_digest)))

        return self._route_erase(erase, arrival_face, cached)

    def _route_erase(self, erase: EraseMessage, arrival_face, cached: Optional[CacheEntry]) -> list[Emission]:
        c = self.counters
        if self.config.marking_enabled and erase.trace:
            try:
                face, shorter = pop_and_verify(erase, self.router_id, self.key)
            except MarkingError:
                c.marking_failures += 1
            else:
                c.via_marking += 1
                if face == arrival_face or face not in self.histories:
                    return []
                return [(shorter, face)]

        if cached is not None and self.config.in_cache_history:
            c.via_cache += 1
            return [(erase, f) for f in sorted(cached.forwarded_faces) if f != arrival_face]

        if self.keeps_histories:
            c.via_history += 1
            upstream = self.fib.lookup(erase.name)
            return [
                (erase, f) for f in self.faces
                if f != arrival_face and f not in upstream and self.histories[f].query(erase.digest)
            ]

        if self.config.flood_fallback == "flood":
            c.via_flood += 1
            return self.flood_erase(erase, arrival_face)
        c.dropped_erases += 1
        return []
