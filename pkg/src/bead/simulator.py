"""Deterministic discrete-event simulation of consumers, routers and a producer.

All randomness (start jitter, payloads, tokens, marking keys, CBF decay, erase
sampling) comes from one ``random.Random(seed)`` stream, and simultaneous events
fire in scheduling order, so a run is a pure function of its inputs. The only
host-dependent output is the wall-clock erase processing time, which is kept
out of the metrics table.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
import random
import time
from collections import defaultdict
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

from .auth import TokenStore, generate_token
from .forwarder import Router, RouterConfig, RouterCounters
from .marking import TraceStore, erase_messages_for, trace_bytes
from .messages import (
    HEADER_BYTES, ContentObject, EraseMessage, Interest, Message, Name, Nack,
    message_class, message_size_bytes,
)
from .topology import RouteTable, Topology

_IN = {"content": "InData", "erase": "InErase", "interest": "InInterest", "nack": "InNack"}
_OUT = {"content": "OutData", "erase": "OutErase", "interest": "OutInterest", "nack": "OutNack"}


BYTE_METRICS = ("InData", "OutData", "InErase", "OutErase", "InInterest", "OutInterest",
                "InNack", "OutNack", "EraseTraceBytesOut")
ROLE_METRICS = {
    "router": tuple(f.name for f in fields(RouterCounters)) + ("deletions", "cache_entries", "pit_entries"),
    "consumer": ("interests_sent", "interests_satisfied", "interests_nacked", "interests_pending",
                 "interests_unsolicited"),
    "producer": ("published", "erases_issued", "traces_stored"),
}


class ConfigError(Exception):
    pass


class UnknownErase(KeyError):
    pass


# --- configuration -----------------------------------------------------------

@dataclass
class ConsumerConfig:
    rate: float = 10.0  # interests per second
    prefix: str = "/prefix/A"
    start: float = 0.0
    stop: Optional[float] = None
    jitter: bool = True  # random start offset within one inter-interest gap
    max_interests: Optional[int] = None
    can_erase: bool = True
    nodes: Optional[list] = None  # default: every consumer node
    stagger: float = 0.0  # extra start offset per consumer, in declaration order


@dataclass
class ProducerConfig:
    node: Optional[str] = None
    prefix: str = "/prefix/A"
    content_size: int = 4096
    expiry: float = 60.0
    erase_fraction: float = 0.5
    erase_period: float = 1.0
    erase_start: Optional[float] = None  # default: one period after t = 0
    erase_stop: Optional[float] = None
    use_traces: bool = True
    can_erase: bool = True


@dataclass
class AdversaryConfig:
    node: str
    targets: int = 10
    forged: int = 1000  # total forged erases, spread over the targets
    start: float = 0.0
    attack_at: float = 1.0
    spacing: float = 0.001


@dataclass
class EraseRecord:
    erase_id: int
    name: Name
    digest: bytes
    issued_at: float
    cached_at_issue: frozenset
    messages: int = 0
    trace_bytes: int = 0
    reached: set = field(default_factory=set)
    deleted: set = field(default_factory=set)


@dataclass
class Metrics:
    seed: int
    duration: float
    roles: dict
    counters: dict = field(default_factory=lambda: defaultdict(lambda: defaultdict(int)))
    link_sent: dict = field(default_factory=lambda: defaultdict(int))
    link_recv: dict = field(default_factory=lambda: defaultdict(int))
    erase_times_ms: dict = field(default_factory=lambda: defaultdict(list))
    erases: dict = field(default_factory=dict)
    deletions: list = field(default_factory=list)
    end_time: float = 0.0
    events: int = 0

    UNITS = {
        "InData": "bytes", "OutData": "bytes", "InErase": "bytes", "OutErase": "bytes",
        "InInterest": "bytes", "OutInterest": "bytes", "InNack": "bytes", "OutNack": "bytes",
        "EraseTraceBytesOut": "bytes",
    }

    def total(self, metric: str, role: Optional[str] = None) -> int:
        return sum(c.get(metric, 0) for n, c in self.counters.items()
                   if role is None or self.roles.get(n) == role)

    def erase_to_content_ratio(self, role: Optional[str] = None) -> float:
        erase = self.total("InErase", role) + self.total("OutErase", role)
        data = self.total("InData", role) + self.total("OutData", role)
        return erase / data if data else 0.0

    def rows(self) -> list[tuple[str, str, str, str]]:
        rows = []
        for node, role in self.roles.items():
            c = self.counters.get(node, {})
            names = list(BYTE_METRICS) + [k for k in ROLE_METRICS.get(role, ()) if k not in BYTE_METRICS]
            names += sorted(k for k in c if k not in names)
            for metric in names:
                rows.append((node, metric, str(c.get(metric, 0)), self.UNITS.get(metric, "count")))
        for metric in ("InData", "OutData", "InErase", "OutErase"):
            rows.append(("network", f"router{metric}", str(self.total(metric, "router")), "bytes"))
        rows.append(("network", "erase_content_ratio",
                     f"{self.erase_to_content_ratio('router'):.6f}", "ratio"))
        rows.append(("network", "erases_issued", str(len(self.erases)), "count"))
        rows.append(("network", "deletions", str(len(self.deletions)), "count"))
        rows.append(("network", "events", str(self.events), "count"))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("node_id", "metric", "value", "unit"))
        w.writerows(self.rows())
        return buf.getvalue()

    def timing_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("node_id", "metric", "value", "unit"))
        for node, mean in measure_erase_processing(self).items():
            w.writerow((node, "erase_processing_mean_host", f"{mean:.6f}", "ms"))
            w.writerow((node, "erases_processed", len(self.erase_times_ms[node]), "count"))
        return buf.getvalue()


def penetration(metrics: Metrics, erase_id: int) -> float:
    """Share of routers caching the target at issue time that went on to delete it."""
    try:
        rec = metrics.erases[erase_id]
    except KeyError:
        raise UnknownErase(erase_id) from None
    if not rec.cached_at_issue:
        return 1.0
    return len(rec.cached_at_issue & rec.deleted) / len(rec.cached_at_issue)


def measure_erase_processing(metrics: Metrics) -> dict[str, float]:
    """Mean host wall-clock ms per erase, for routers that processed at least one."""
    return {
        node: sum(ts) / len(ts)
        for node, ts in sorted(metrics.erase_times_ms.items(), key=lambda kv: kv[0])
        if ts
    }


# --- event engine ------------------------------------------------------------

class EventQueue:
    def __init__(self):
        self._heap: list = []
        self._seq = 0
        self.now = 0.0

    def schedule(self, at: float, action: Callable, *args) -> None:
        if at < self.now:
            raise ValueError(f"cannot schedule in the past ({at} < {self.now})")
        heapq.heappush(self._heap, (at, self._seq, action, args))
        self._seq += 1

    def __len__(self) -> int:
        return len(self._heap)

    def pop(self):
        at, _, action, args = heapq.heappop(self._heap)
        self.now = at
        return action, args


# --- agents ------------------------------------------------------------------

class Consumer:
    def __init__(self, sim: "Simulation", node: str, cfg: ConsumerConfig, face: int, offset: float):
        self.sim = sim
        self.node = node
        self.cfg = cfg
        self.face = face
        self.prefix = Name.parse(cfg.prefix)
        self.seq = 0
        self.pending: dict[Name, float] = {}
        self.sent = self.satisfied = self.nacked = self.unsolicited = 0
        self.min_rtt = math.inf
        stop = sim.duration if cfg.stop is None else min(cfg.stop, sim.duration)
        self.stop = stop
        first = cfg.start + offset
        if first < stop:
            sim.queue.schedule(first, self.tick)

    def tick(self) -> None:
        now = self.sim.queue.now
        name = self.prefix.append(str(self.seq))
        self.seq += 1
        self.pending[name] = now
        self.sent += 1
        self.sim.send(self.node, self.face, Interest(name, can_erase=self.cfg.can_erase))
        nxt = now + 1.0 / self.cfg.rate
        if nxt < self.stop and (self.cfg.max_interests is None or self.sent < self.cfg.max_interests):
            self.sim.queue.schedule(nxt, self.tick)

    def receive(self, msg: Message, face: int) -> None:
        now = self.sim.queue.now
        if isinstance(msg, (ContentObject, Nack)):
            sent_at = self.pending.pop(msg.name, None)
            if sent_at is None:
                self.unsolicited += 1
            elif isinstance(msg, Nack):
                self.nacked += 1
            else:
                self.satisfied += 1
                self.min_rtt = min(self.min_rtt, now - sent_at)


class Adversary:
    """Fetches a few objects, then sends erases quoting their digests with random tokens."""

    def __init__(self, sim: "Simulation", node: str, cfg: AdversaryConfig, face: int, prefix: Name):
        self.sim = sim
        self.node = node
        self.cfg = cfg
        self.face = face
        self.prefix = prefix
        self.fetched: dict[Name, ContentObject] = {}
        self.forged_sent = 0
        for i in range(cfg.targets):
            sim.queue.schedule(cfg.start + i * cfg.spacing, self.fetch, prefix.append(str(i)))
        sim.queue.schedule(cfg.attack_at, self.attack)

    def fetch(self, name: Name) -> None:
        self.sim.send(self.node, self.face, Interest(name))

    def receive(self, msg: Message, face: int) -> None:
        if isinstance(msg, ContentObject):
            self.fetched.setdefault(msg.name, msg)

    def attack(self) -> None:
        targets = sorted(self.fetched)
        if not targets:
            return
        rng = self.sim.rng
        for i in range(self.cfg.forged):
            c = self.fetched[targets[i % len(targets)]]
            forged = EraseMessage(c.name, c.digest, rng.randbytes(len(c.digest)))
            self.sim.queue.schedule(self.sim.queue.now + i * self.cfg.spacing,
                                    self.sim.send, self.node, self.face, forged)
            self.forged_sent += 1


class Producer:
    def __init__(self, sim: "Simulation", node: str, cfg: ProducerConfig):
        self.sim = sim
        self.node = node
        self.cfg = cfg
        self.prefix = Name.parse(cfg.prefix)
        self.tokens = TokenStore()
        self.traces = TraceStore()
        self.trace_faces: dict[tuple, int] = {}
        self.published: dict[Name, ContentObject] = {}
        self.served_faces: dict[Name, set] = defaultdict(set)
        self.fresh: list[Name] = []  # published since the last erase round
        self.erased = 0
        start = cfg.erase_period if cfg.erase_start is None else cfg.erase_start
        stop = sim.duration if cfg.erase_stop is None else min(cfg.erase_stop, sim.duration)
        self.erase_stop = stop
        if cfg.erase_fraction > 0 and start <= stop:
            sim.queue.schedule(start, self.erase_round)

    def publish(self, name: Name, now: float) -> ContentObject:
        rng = self.sim.rng
        if self.cfg.can_erase:
            token, token_digest = generate_token(rng)
        else:
            token, token_digest = None, None
        c = ContentObject(name, rng.randbytes(self.cfg.content_size), now + self.cfg.expiry,
                          token_digest, self.cfg.can_erase)
        if token is not None:
            self.tokens.put(name, c.digest, token)
        self.published[name] = c
        self.served_faces[name] = set()
        self.fresh.append(name)
        return c

    def receive(self, msg: Message, face: int) -> None:
        if not isinstance(msg, Interest):
            return
        now = self.sim.queue.now
        if not self.prefix.is_prefix_of(msg.name):
            self.sim.send(self.node, face, Nack(msg.name))
            return
        c = self.published.get(msg.name)
        if c is None or now >= c.expiry_time:
            c = self.publish(msg.name, now)
        if msg.trace:
            trace = tuple(msg.trace)
            self.traces.record_trace(msg.name, trace)
            self.trace_faces[(msg.name, c.digest, trace)] = face
        self.served_faces[msg.name].add(face)
        self.sim.send(self.node, face, c)

    def erase_round(self) -> None:
        now = self.sim.queue.now
        candidates = [n for n in self.fresh if n in self.published]
        self.fresh = []
        count = math.floor(self.cfg.erase_fraction * len(candidates) + 0.5)
        for name in self.sim.rng.sample(candidates, count):
            self.erase(name)
        nxt = now + self.cfg.erase_period
        if nxt <= self.erase_stop:
            self.sim.queue.schedule(nxt, self.erase_round)

    def erase(self, name: Name) -> Optional[int]:
        """Issue an erase for the current version of ``name`` and retire that version."""
        c = self.published.pop(name, None)
        if c is None or not c.can_erase:
            return None
        token = self.tokens.get(name, c.digest)
        erase_id = self.sim.open_erase(name, c.digest)
        sends = []
        if self.cfg.use_traces and name in self.traces:
            for msg in erase_messages_for(self.traces, name, c.digest, token):
                face = self.trace_faces.get((name, c.digest, msg.trace))
                if face is not None:
                    sends.append((msg, face))
        if not sends:
            msg = EraseMessage(name, c.digest, token)
            sends = [(msg, f) for f in sorted(self.served_faces[name])]
        rec = self.sim.metrics.erases[erase_id]
        for msg, face in sends:
            rec.messages += 1
            rec.trace_bytes += trace_bytes(msg.trace)
            self.sim.send(self.node, face, msg)
        self.erased += 1
        return erase_id


# --- simulation --------------------------------------------------------------

class Simulation:
    def __init__(self, topology: Topology, routes: RouteTable, *,
                 router_config: Optional[RouterConfig] = None,
                 router_overrides: Optional[dict] = None,
                 consumers: Optional[ConsumerConfig] = None,
                 producer: Optional[ProducerConfig] = None,
                 adversary: Optional[AdversaryConfig] = None,
                 seed: int = 1, duration: float = 10.0,
                 sweep_interval: Optional[float] = 1.0,
                 headers: Optional[dict] = None,
                 time_erases: bool = True):
        self.topology = topology
        self.routes = routes
        self.seed = seed
        self.duration = duration
        self.rng = random.Random(seed)
        self.queue = EventQueue()
        self.headers = headers or dict(HEADER_BYTES)
        self.time_erases = time_erases
        self.adj = topology.adjacency()
        self.metrics = Metrics(seed, duration, dict(topology.nodes))
        self._erase_index: dict[tuple[Name, bytes], int] = {}

        ids = topology.numeric_ids()
        base = router_config or RouterConfig()
        overrides = router_overrides or {}
        self.routers: dict[str, Router] = {}
        for node in topology.routers:
            r = Router(node, ids[node], self.adj[node], overrides.get(node, base), self.rng)
            for prefix, faces in routes.entries.get(node, []):
                for f in faces:
                    r.fib.add(prefix, f)
            self.routers[node] = r

        pcfg = producer or ProducerConfig()
        pnode = pcfg.node or (topology.producers[0] if topology.producers else None)
        if pnode is None or topology.nodes.get(pnode) != "producer":
            raise ConfigError(f"producer node {pnode!r} is not a producer in the topology")
        self.producer = Producer(self, pnode, pcfg)

        self.adversary = None
        if adversary is not None:
            if topology.nodes.get(adversary.node) != "consumer":
                raise ConfigError(f"adversary node {adversary.node!r} must be a consumer node")
            self.adversary = Adversary(self, adversary.node, adversary,
                                       self._single_face(adversary.node), Name.parse(pcfg.prefix))

        ccfg = consumers or ConsumerConfig()
        nodes = ccfg.nodes if ccfg.nodes is not None else topology.consumers
        self.consumers: dict[str, Consumer] = {}
        for i, node in enumerate(nodes):
            if topology.nodes.get(node) != "consumer":
                raise ConfigError(f"consumer attach point {node!r} is not a consumer node")
            if self.adversary is not None and node == self.adversary.node:
                continue
            offset = ccfg.stagger * i
            if ccfg.jitter:
                offset += self.rng.uniform(0.0, 1.0 / ccfg.rate)
            self.consumers[node] = Consumer(self, node, ccfg, self._single_face(node), offset)

        if sweep_interval:
            self.sweep_interval = sweep_interval
            self.queue.schedule(sweep_interval, self._sweep)

    def _single_face(self, node: str) -> int:
        faces = sorted(self.adj[node])
        if not faces:
            raise ConfigError(f"{node} has no links")
        return faces[0]

    # -- transport ------------------------------------------------------------

    def send(self, node: str, face: int, msg: Message) -> None:
        peer, peer_face, delay = self.adj[node][face]
        size = message_size_bytes(msg, self.headers)
        cls = message_class(msg)
        self.metrics.counters[node][_OUT[cls]] += size
        if cls == "erase" and msg.trace:
            self.metrics.counters[node]["EraseTraceBytesOut"] += trace_bytes(msg.trace)
        self.metrics.link_sent[(node, face)] += size
        self.queue.schedule(self.queue.now + delay, self._deliver, peer, peer_face, msg, size)

    def _deliver(self, node: str, face: int, msg: Message, size: int) -> None:
        cls = message_class(msg)
        self.metrics.counters[node][_IN[cls]] += size
        self.metrics.link_recv[(node, face)] += size
        now = self.queue.now
        router = self.routers.get(node)
        if router is None:
            agent = self._agent(node)
            if agent is not None:
                agent.receive(msg, face)
            return
        if cls == "interest":
            out = router.on_interest(msg, face, now)
        elif cls == "content":
            out = router.on_content(msg, face, now)
        elif cls == "nack":
            out = router.on_nack(msg, face, now)
        else:
            eid = self._erase_index.get((msg.name, msg.digest))
            if eid is not None:
                self.metrics.erases[eid].reached.add(node)
            before = len(router.deletions)
            if self.time_erases:
                t0 = time.perf_counter()
                out = router.on_erase(msg, face, now)
                self.metrics.erase_times_ms[node].append((time.perf_counter() - t0) * 1000.0)
            else:
                out = router.on_erase(msg, face, now)
            for d in router.deletions[before:]:
                if not d.verified:
                    raise AssertionError(f"{node} deleted {d.name} without a verified token")
                self.metrics.deletions.append(d)
                if eid is not None:
                    self.metrics.erases[eid].deleted.add(node)
        for m, f in out:
            self.send(node, f, m)

    def _agent(self, node: str):
        if node == self.producer.node:
            return self.producer
        if self.adversary is not None and node == self.adversary.node:
            return self.adversary
        return self.consumers.get(node)

    def _sweep(self) -> None:
        now = self.queue.now
        for node in sorted(self.routers):
            self.routers[node].sweep(now, self.rng)
        nxt = now + self.sweep_interval
        if nxt <= self.duration:
            self.queue.schedule(nxt, self._sweep)

    def open_erase(self, name: Name, digest: bytes) -> int:
        now = self.queue.now
        erase_id = len(self.metrics.erases)
        cached = frozenset(n for n, r in self.routers.items() if r.caches(name, digest, now))
        self.metrics.erases[erase_id] = EraseRecord(erase_id, name, digest, now, cached)
        self._erase_index[(name, digest)] = erase_id
        return erase_id

    # -- main loop ------------------------------------------------------------

    def run(self, max_events: Optional[int] = None) -> Metrics:
        """Run agents until ``duration``, then drain in-flight messages."""
        q = self.queue
        n = 0
        while len(q):
            action, args = q.pop()
            action(*args)
            n += 1
            if max_events is not None and n >= max_events:
                break
        self.metrics.events = n
        self.metrics.end_time = q.now
        self._collect()
        return self.metrics

    def _collect(self) -> None:
        m = self.metrics
        for node, r in self.routers.items():
            c = r.counters
            for key, value in vars(c).items():
                m.counters[node][key] = value
            m.counters[node]["deletions"] = len(r.deletions)
            m.counters[node]["cache_entries"] = len(r.cs)
            m.counters[node]["pit_entries"] = len(r.pit)
        for node, con in self.consumers.items():
            for key in ("sent", "satisfied", "nacked", "unsolicited"):
                m.counters[node][f"interests_{key}"] = getattr(con, key)
            m.counters[node]["interests_pending"] = len(con.pending)
        p = self.producer
        m.counters[p.node]["published"] = len(p.tokens)
        m.counters[p.node]["erases_issued"] = p.erased
        m.counters[p.node]["traces_stored"] = len(p.traces)
        if self.adversary is not None:
            m.counters[self.adversary.node]["forged_erases"] = self.adversary.forged_sent


def run(topology: Topology, routes: RouteTable, seed: int = 1, duration: float = 10.0,
        **kwargs) -> Metrics:
    return Simulation(topology, routes, seed=seed, duration=duration, **kwargs).run()
