"""Network topologies: file format, builders, and shortest-path FIB population.

Topology files are line oriented::

    # comment
    node <id> <role>                                  role: router | consumer | producer
    link <idA> <faceA> <idB> <faceB> <delay_ms>

Blank lines and text after ``#`` are ignored. Fields are whitespace separated.
Face ids are integers in [0, 65535] and must be unique per node. Node numeric
ids (used as router ids in traces) follow declaration order, starting at 0.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Union

from .messages import Name

ROLES = ("router", "consumer", "producer")
DEFAULT_DELAY_MS = 10.0
BUNDLED = {"dfn30": "dfn30.topo", "att134": "att134.topo"}


class TopologyError(Exception):
    pass


class ParseError(TopologyError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class ValidationError(TopologyError):
    pass


@dataclass(frozen=True)
class Link:
    a: str
    face_a: int
    b: str
    face_b: int
    delay: float  # seconds


@dataclass
class Topology:
    nodes: dict[str, str] = field(default_factory=dict)  # id -> role, declaration order
    links: list[Link] = field(default_factory=list)

    def add_node(self, node_id: str, role: str) -> None:
        if role not in ROLES:
            raise ValidationError(f"unknown role {role!r} for node {node_id}")
        if node_id in self.nodes:
            raise ValidationError(f"duplicate node {node_id}")
        self.nodes[node_id] = role

    def add_link(self, a: str, face_a: int, b: str, face_b: int,
                 delay: float = DEFAULT_DELAY_MS / 1000) -> None:
        self.links.append(Link(a, face_a, b, face_b, delay))

    def index(self, node_id: str) -> int:
        return list(self.nodes).index(node_id)

    def numeric_ids(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    def with_role(self, role: str) -> list[str]:
        return [n for n, r in self.nodes.items() if r == role]

    @property
    def routers(self) -> list[str]:
        return self.with_role("router")

    @property
    def consumers(self) -> list[str]:
        return self.with_role("consumer")

    @property
    def producers(self) -> list[str]:
        return self.with_role("producer")

    def adjacency(self) -> dict[str, dict[int, tuple[str, int, float]]]:
        """node -> face -> (peer, peer_face, delay)."""
        adj: dict[str, dict[int, tuple[str, int, float]]] = {n: {} for n in self.nodes}
        for ln in self.links:
            adj[ln.a][ln.face_a] = (ln.b, ln.face_b, ln.delay)
            adj[ln.b][ln.face_b] = (ln.a, ln.face_a, ln.delay)
        return adj

    def faces(self, node_id: str) -> list[int]:
        return sorted(self.adjacency()[node_id])

    def validate(self) -> "Topology":
        seen: set[tuple[str, int]] = set()
        for ln in self.links:
            for node, face in ((ln.a, ln.face_a), (ln.b, ln.face_b)):
                if node not in self.nodes:
                    raise ValidationError(f"link references undeclared node {node}")
                if not 0 <= face < 1 << 16:
                    raise ValidationError(f"face {face} of {node} out of range")
                if (node, face) in seen:
                    raise ValidationError(f"duplicate face {face} on node {node}")
                seen.add((node, face))
            if ln.a == ln.b:
                raise ValidationError(f"self loop on {ln.a}")
            if ln.delay < 0:
                raise ValidationError("negative link delay")
        if not self.nodes:
            raise ValidationError("empty topology")
        adj = self.adjacency()
        start = next(iter(self.nodes))
        reached = {start}
        todo = [start]
        while todo:
            for peer, _, _ in adj[todo.pop()].values():
                if peer not in reached:
                    reached.add(peer)
                    todo.append(peer)
        if len(reached) != len(self.nodes):
            missing = sorted(set(self.nodes) - reached)
            raise ValidationError(f"graph is disconnected; unreachable: {missing[:5]}")
        if self.routers:
            for n, role in self.nodes.items():
                if role != "router" and not any(
                        self.nodes[p] == "router" for p, _, _ in adj[n].values()):
                    raise ValidationError(f"{role} {n} is not attached to any router")
        return self

    def dumps(self) -> str:
        lines = [f"node {n} {r}" for n, r in self.nodes.items()]
        lines += [
            f"link {ln.a} {ln.face_a} {ln.b} {ln.face_b} {ln.delay * 1000:g}" for ln in self.links
        ]
        return "\n".join(lines) + "\n"


def load_topology(text: str) -> Topology:
    t = Topology()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "node":
                if len(parts) != 3:
                    raise ParseError(lineno, "expected: node <id> <role>")
                t.add_node(parts[1], parts[2])
            elif kind == "link":
                if len(parts) != 6:
                    raise ParseError(lineno, "expected: link <idA> <faceA> <idB> <faceB> <delay_ms>")
                try:
                    fa, fb, delay = int(parts[2]), int(parts[4]), float(parts[5])
                except ValueError:
                    raise ParseError(lineno, "face ids must be integers and delay a number") from None
                t.add_link(parts[1], fa, parts[3], fb, delay / 1000)
            else:
                raise ParseError(lineno, f"unknown directive {kind!r}")
        except ValidationError as exc:
            raise ParseError(lineno, str(exc)) from None
    return t.validate()


def load_topology_file(path: Union[str, Path]) -> Topology:
    return load_topology(Path(path).read_text())


def load_bundled(name: str) -> Topology:
    if name not in BUNDLED:
        raise KeyError(f"no bundled topology {name!r}; have {sorted(BUNDLED)}")
    text = resources.files("bead.data").joinpath(BUNDLED[name]).read_text()
    return load_topology(text)


# --- builders ----------------------------------------------------------------

def build_line(n_routers: int, delay: float = DEFAULT_DELAY_MS / 1000) -> Topology:
    """consumer c0 - r0 - ... - r{n-1} - producer p0. Face 0 faces the consumer side."""
    t = Topology()
    t.add_node("c0", "consumer")
    for i in range(n_routers):
        t.add_node(f"r{i}", "router")
    t.add_node("p0", "producer")
    chain = ["c0"] + [f"r{i}" for i in range(n_routers)] + ["p0"]
    for left, right in zip(chain, chain[1:]):
        t.add_link(left, 0 if left == "c0" else 1, right, 0, delay)
    return t.validate()


def build_tree(h: int, delay: float = DEFAULT_DELAY_MS / 1000) -> Topology:
    """Binary tree of height h: producer at the root, 2**h consumers at the leaves.

    Level ``l`` (1 <= l < h) holds 2**(h-l) routers, 2**h - 2 in total. Every node
    reaches its parent on face 0 and its children on faces 1 and 2.
    """
    if h < 1:
        raise ValueError("height must be >= 1")
    t = Topology()
    levels: list[list[str]] = []
    levels.append([f"c{i}" for i in range(2 ** h)])
    for lvl in range(1, h):
        levels.append([f"r{lvl}_{i}" for i in range(2 ** (h - lvl))])
    levels.append(["p0"])
    for lvl, nodes in enumerate(levels):
        role = "consumer" if lvl == 0 else "producer" if lvl == h else "router"
        for n in nodes:
            t.add_node(n, role)
    for lvl in range(h):
        for i, child in enumerate(levels[lvl]):
            parent = levels[lvl + 1][i // 2]
            t.add_link(child, 0, parent, 1 + i % 2, delay)
    return t.validate()


def random_topology(n_routers: int, seed: int, n_consumers: int = 8,
                    extra_links: Optional[int] = None,
                    delay: float = DEFAULT_DELAY_MS / 1000) -> Topology:
    """Connected random router graph (random tree plus chords) with attached consumers
    and a single producer."""
    rng = random.Random(seed)
    t = Topology()
    routers = [f"r{i}" for i in range(n_routers)]
    for r in routers:
        t.add_node(r, "router")
    next_face = {r: 0 for r in routers}

    def link(a, b):
        fa, fb = next_face[a], next_face[b]
        next_face[a] += 1
        next_face[b] += 1
        t.add_link(a, fa, b, fb, delay)

    edges = set()
    for i in range(1, n_routers):
        j = rng.randrange(i)
        edges.add((j, i))
        link(routers[j], routers[i])
    if extra_links is None:
        extra_links = n_routers // 3
    for _ in range(extra_links):
        i, j = sorted(rng.sample(range(n_routers), 2)) if n_routers > 1 else (0, 0)
        if i != j and (i, j) not in edges:
            edges.add((i, j))
            link(routers[i], routers[j])
    for c in range(n_consumers):
        cid = f"c{c}"
        t.add_node(cid, "consumer")
        r = routers[rng.randrange(n_routers)]
        t.add_link(cid, 0, r, next_face[r], delay)
        next_face[r] += 1
    t.add_node("p0", "producer")
    r = routers[rng.randrange(n_routers)]
    t.add_link("p0", 0, r, next_face[r], delay)
    next_face[r] += 1
    return t.validate()


# --- routing -----------------------------------------------------------------

@dataclass
class RouteTable:
    """Per-node FIB entries: node -> list of (prefix, faces)."""

    entries: dict[str, list[tuple[Name, set[int]]]] = field(default_factory=dict)
    producers: dict[Name, str] = field(default_factory=dict)

    def faces(self, node: str, prefix: Union[str, Name]) -> set[int]:
        prefix = Name.parse(prefix)
        for p, faces in self.entries.get(node, []):
            if p == prefix:
                return set(faces)
        return set()

    def walk(self, t: Topology, start: str, prefix: Union[str, Name]) -> list[str]:
        """Follow FIB faces from ``start``; raises if the walk loops or dead-ends."""
        prefix = Name.parse(prefix)
        target = self.producers[prefix]
        adj = t.adjacency()
        path = [start]
        seen = {start}
        node = start
        while node != target:
            faces = self.faces(node, prefix)
            if not faces:
                raise ValidationError(f"FIB walk dead-ends at {node}")
            node = adj[node][min(faces)][0]
            if node in seen:
                raise ValidationError(f"FIB walk loops at {node}")
            seen.add(node)
            path.append(node)
        return path


def populate_fibs(t: Topology, producer_prefixes: dict) -> RouteTable:
    """Shortest-hop FIB entry per node per prefix, ties broken by lowest neighbor index.

    Only routers carry transit traffic; consumers and producers are endpoints.
    """
    adj = t.adjacency()
    order = t.numeric_ids()
    table = RouteTable(entries={n: [] for n in t.nodes})
    for prefix, producer in producer_prefixes.items():
        prefix = Name.parse(prefix)
        if t.nodes.get(producer) != "producer":
            raise ValidationError(f"{producer} is not a producer node")
        table.producers[prefix] = producer
        dist = {producer: 0}
        queue = deque([producer])
        while queue:
            u = queue.popleft()
            if u != producer and t.nodes[u] != "router":
                continue
            for v, _, _ in adj[u].values():
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        for node in t.nodes:
            if node == producer or node not in dist:
                continue
            best = None
            for face, (peer, _, _) in sorted(adj[node].items()):
                if dist.get(peer) != dist[node] - 1:
                    continue
                if peer != producer and t.nodes[peer] != "router":
                    continue
                key = (order[peer], face)
                if best is None or key < best:
                    best = key
            if best is not None:
                table.entries[node].append((prefix, {best[1]}))
    return table


def reverse_flood_reach(t: Topology, routes: RouteTable, prefix: Union[str, Name],
                        origin: Optional[str] = None) -> set[str]:
    """Routers reachable from ``origin`` (default: the producer) by hops that never
    leave a router through one of its FIB faces for ``prefix``."""
    prefix = Name.parse(prefix)
    origin = origin or routes.producers[prefix]
    adj = t.adjacency()
    reached: set[str] = set()
    queue = deque([origin])
    visited = {origin}
    while queue:
        u = queue.popleft()
        blocked = routes.faces(u, prefix) if t.nodes[u] == "router" else set()
        for face, (v, _, _) in adj[u].items():
            if face in blocked or v in visited:
                continue
            visited.add(v)
            if t.nodes[v] == "router":
                reached.add(v)
                queue.append(v)
    return reached


def neighbors(t: Topology, node: str) -> Iterable[str]:
    return [p for p, _, _ in t.adjacency()[node].values()]
