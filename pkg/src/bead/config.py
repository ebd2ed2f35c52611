"""Scenario files: INI-style ``key = value`` lines grouped under ``[section]`` headers.

Sections::

    [scenario]       topology (path, relative to the file, or bundled:<name>), seed,
                     duration, out, sweep_interval
    [router]         defaults for every router
    [router:edge]    overrides for routers with an attached consumer
    [router:core]    overrides for all other routers
    [router:<id>]    overrides for one router (applied last)
    [consumers]      rate, prefix, start, stop, jitter, max_interests, can_erase, nodes
    [producer]       node, prefix, content_size, expiry, erase_fraction, erase_period,
                     erase_start, erase_stop, use_traces, can_erase
    [adversary]      node, targets, forged, start, attack_at, spacing (optional)
    [headers]        interest, content, erase, nack (bytes)

Router keys: cache_capacity, history (lossless|bloom|cbf|none), history_capacity,
chunk_count, chunk_window_s, m_bits, k, expected_n, k_max, reset_threshold,
counter_bits, mean_expiry_s, marking, flood_fallback (flood|drop),
in_cache_history, history_insert (on_forward|on_evict), honor_can_erase.
An empty value means "unset". ``#`` and ``;`` start comments.
"""

from __future__ import annotations

import configparser
import hashlib
import typing
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from .forwarder import RouterConfig
from .histories import HISTORY_TYPES
from .messages import HEADER_BYTES
from .simulator import AdversaryConfig, ConfigError, ConsumerConfig, ProducerConfig
from .topology import Topology, TopologyError, load_bundled, load_topology_file

BUNDLED_SCENARIOS = {"dfn30": "dfn30.cfg", "att134": "att134.cfg"}

_ROUTER_KEYS = {
    "cache_capacity": ("router", int),
    "marking": ("router", "bool", "marking_enabled"),
    "flood_fallback": ("router", str),
    "in_cache_history": ("router", "bool"),
    "history_insert": ("router", str),
    "honor_can_erase": ("router", "bool"),
    "history": ("history", str, "type"),
    "history_capacity": ("history", int, "capacity_entries"),
    "chunk_count": ("history", int),
    "chunk_window_s": ("history", float),
    "m_bits": ("history", int),
    "k": ("history", "k"),
    "expected_n": ("history", int),
    "k_max": ("history", int),
    "reset_threshold": ("history", float),
    "counter_bits": ("history", int),
    "mean_expiry_s": ("history", float),
}

_NULLABLE = {"capacity_entries", "chunk_window_s", "expected_n", "k_max", "reset_threshold",
             "mean_expiry_s"}


@dataclass
class ScenarioConfig:
    topology: Topology
    topology_source: str
    seed: int
    duration: float
    out: Optional[Path]
    sweep_interval: float
    router: RouterConfig
    router_overrides: dict
    consumers: ConsumerConfig
    producer: ProducerConfig
    adversary: Optional[AdversaryConfig]
    headers: dict
    digest: str = ""
    source: Optional[Path] = None
    extra: dict = field(default_factory=dict)


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _convert(kind, value: str, key: str):
    try:
        if kind == "bool":
            return _bool(value)
        if kind == "k":
            return value if value == "auto" else int(value)
        if kind is int:
            return int(float(value)) if "e" in value.lower() else int(value)
        return kind(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def _router_config(base: RouterConfig, section) -> RouterConfig:
    rkw, hkw = {}, {}
    for key, raw in section.items():
        if key not in _ROUTER_KEYS:
            raise ConfigError(f"unknown router key {key!r}")
        entry = _ROUTER_KEYS[key]
        target, kind = entry[0], entry[1]
        attr = entry[2] if len(entry) > 2 else key
        value = None if raw.strip() == "" else _convert(kind, raw.strip(), key)
        (rkw if target == "router" else hkw)[attr] = value
    hkw = {k: v for k, v in hkw.items() if v is not None or k in _NULLABLE}
    history = replace(base.history, **hkw)
    if history.type not in HISTORY_TYPES:
        raise ConfigError(f"history must be one of {HISTORY_TYPES}, got {history.type!r}")
    rkw = {k: v for k, v in rkw.items() if v is not None}
    try:
        return replace(base, history=history, **rkw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _dataclass_from(cls, section, name: str):
    hints = typing.get_type_hints(cls)
    kw = {}
    for key, raw in section.items():
        if key not in hints:
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        raw = raw.strip()
        if raw == "":
            continue
        hint = hints[key]
        base = next((a for a in typing.get_args(hint) if a is not type(None)), hint)
        if typing.get_origin(base) is list or base is list:
            kw[key] = [n.strip() for n in raw.split(",") if n.strip()]
        elif base is bool:
            kw[key] = _bool(raw)
        elif base in (int, float):
            kw[key] = _convert(base, raw, key)
        else:
            kw[key] = raw
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"[{name}]: {exc}") from None


def resolve_topology(source: str, base_dir: Path) -> Topology:
    source = source.strip()
    if source.startswith("bundled:"):
        try:
            return load_bundled(source.split(":", 1)[1])
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    path = Path(source)
    if not path.is_absolute():
        path = base_dir / path
    if not path.is_file():
        raise ConfigError(f"topology file not found: {path}")
    return load_topology_file(path)


def _edge_routers(t: Topology) -> set[str]:
    adj = t.adjacency()
    return {
        r for r in t.routers
        if any(t.nodes[p] == "consumer" for p, _, _ in adj[r].values())
    }


def parse_scenario(text: str, base_dir: Path = Path("."), source: Optional[Path] = None) -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if not cp.has_section("scenario"):
        raise ConfigError("missing [scenario] section")
    sc = cp["scenario"]
    if "topology" not in sc:
        raise ConfigError("[scenario] needs a topology")
    if not sc.get("seed", "").strip():
        raise ConfigError("[scenario] needs an explicit seed")
    try:
        topology = resolve_topology(sc["topology"], base_dir)
    except TopologyError as exc:
        raise ConfigError(f"topology: {exc}") from None

    known_sections = {"scenario", "router", "consumers", "producer", "adversary", "headers"}
    for name in cp.sections():
        if name not in known_sections and not name.startswith("router:"):
            raise ConfigError(f"unknown section [{name}]")

    router = _router_config(RouterConfig(), cp["router"]) if cp.has_section("router") else RouterConfig()
    edges = _edge_routers(topology)
    overrides = {}
    for r in topology.routers:
        cls = "edge" if r in edges else "core"
        cfg = router
        if cp.has_section(f"router:{cls}"):
            cfg = _router_config(cfg, cp[f"router:{cls}"])
        if cp.has_section(f"router:{r}"):
            cfg = _router_config(cfg, cp[f"router:{r}"])
        if cfg is not router:
            overrides[r] = cfg
    for name in cp.sections():
        if name.startswith("router:"):
            target = name.split(":", 1)[1]
            if target not in ("edge", "core") and target not in topology.nodes:
                raise ConfigError(f"[{name}] names no router in the topology")

    consumers = _dataclass_from(ConsumerConfig, cp["consumers"] if cp.has_section("consumers") else {}, "consumers")
    producer = _dataclass_from(ProducerConfig, cp["producer"] if cp.has_section("producer") else {}, "producer")
    adversary = None
    if cp.has_section("adversary"):
        if "node" not in cp["adversary"]:
            raise ConfigError("[adversary] needs a node")
        adversary = _dataclass_from(AdversaryConfig, cp["adversary"], "adversary")

    headers = dict(HEADER_BYTES)
    if cp.has_section("headers"):
        for key, raw in cp["headers"].items():
            if key not in headers:
                raise ConfigError(f"unknown header class {key!r}")
            headers[key] = _convert(int, raw.strip(), key)

    out = sc.get("out", "").strip()
    try:
        seed = int(sc["seed"])
        duration = float(sc.get("duration", "10"))
        sweep = float(sc.get("sweep_interval", "1.0"))
    except ValueError as exc:
        raise ConfigError(f"[scenario]: {exc}") from None
    return ScenarioConfig(
        topology=topology,
        topology_source=sc["topology"].strip(),
        seed=seed,
        duration=duration,
        out=(base_dir / out) if out else None,
        sweep_interval=sweep,
        router=router,
        router_overrides=overrides,
        consumers=consumers,
        producer=producer,
        adversary=adversary,
        headers=headers,
        digest=hashlib.sha256(text.encode()).hexdigest(),
        source=source,
    )


def load_scenario(path: str) -> ScenarioConfig:
    if path.startswith("bundled:"):
        name = path.split(":", 1)[1]
        if name not in BUNDLED_SCENARIOS:
            raise ConfigError(f"no bundled scenario {name!r}; have {sorted(BUNDLED_SCENARIOS)}")
        text = resources.files("bead.data").joinpath(BUNDLED_SCENARIOS[name]).read_text()
        return parse_scenario(text, Path("."), None)
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_scenario(p.read_text(), p.parent, p)
