"""Command-line front end.

    bead run --config <path|bundled:NAME> [--seed N] [--out DIR]
    bead analyze saturation --storage 4GiB --entry 32B --rate 3200
    bead analyze bloom --m 4GiB --n 2e8 [--k-max K] [--rate R]
    bead analyze marking --height 16 [--hops 16]

Exit codes: 0 success, 2 configuration or usage error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path

from . import __version__
from .histories import (
    bloom_saturation_time, false_positive_rate, false_positive_rate_k, optimal_k, saturation_time,
)
from .marking import TRACE_TUPLE_BYTES, aggregated_trace_size, interest_growth
from .simulator import ConfigError, Simulation, measure_erase_processing
from .topology import TopologyError, populate_fibs

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

# binary multiples throughout: 4 GB of history is 2**32 bytes
_UNITS = {
    "": 1, "b": 1,
    "k": 2 ** 10, "kb": 2 ** 10, "kib": 2 ** 10,
    "m": 2 ** 20, "mb": 2 ** 20, "mib": 2 ** 20,
    "g": 2 ** 30, "gb": 2 ** 30, "gib": 2 ** 30,
    "t": 2 ** 40, "tb": 2 ** 40, "tib": 2 ** 40,
}
_QTY = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)\s*([A-Za-z]*)\s*$")


def parse_quantity(text: str, suffix: str = "b") -> float:
    """'4GiB' -> 4294967296. Also accepts '100Mbps' style rates when ``suffix='bps'``."""
    m = _QTY.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"not a quantity: {text!r}")
    value, unit = float(m.group(1)), m.group(2).lower()
    if suffix != "b" and unit.endswith(suffix):
        unit = unit[: -len(suffix)]
    elif suffix != "b" and unit.endswith(suffix.replace("bps", "bit/s")):
        unit = unit[: -len("bit/s")]
    if unit.endswith("i") and unit + "b" in _UNITS:
        unit += "b"
    if unit not in _UNITS:
        raise argparse.ArgumentTypeError(f"unknown unit in {text!r}")
    return value * _UNITS[unit]


def _bytes(text: str) -> float:
    return parse_quantity(text)


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or math.isinf(v):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    if v == 0 or 1e-4 <= abs(v) < 1e15:
        return f"{v:.6f}".rstrip("0").rstrip(".")
    return f"{v:.6e}"


def _table(rows) -> str:
    lines = ["quantity\tvalue\tunit"]
    lines += [f"{q}\t{_fmt(v)}\t{u}" for q, v, u in rows]
    return "\n".join(lines) + "\n"


# --- analyze -----------------------------------------------------------------

def analyze_saturation(args) -> list:
    if args.rate is not None:
        rate = args.rate
    elif args.bandwidth is not None:
        rate = args.bandwidth / 8 / args.content
    else:
        raise ConfigError("give --rate or --bandwidth")
    if not rate > 0:
        raise ConfigError("rate must be positive")
    entries = args.storage / args.entry
    t = saturation_time(entries, rate)
    return [
        ("capacity_entries", int(entries), "entries"),
        ("rate", rate, "entries/s"),
        ("saturation_time", t, "s"),
        ("saturation_time_rounded", round(t), "s"),
        ("saturation_time_hours", t / 3600, "h"),
    ]


def analyze_bloom(args) -> list:
    m_bits = args.m_bits if args.m_bits is not None else args.m * 8
    if not m_bits > 0:
        raise ConfigError("filter size must be positive")
    k = args.k if args.k is not None else optimal_k(m_bits, args.n, args.k_max)
    rows = [
        ("m_bits", int(m_bits), "bits"),
        ("n", args.n, "elements"),
        ("bits_per_element", m_bits / args.n, "bits"),
        ("k_exact", math.log(2) * m_bits / args.n, "hashes"),
        ("k", k, "hashes"),
        ("false_positive_rate", false_positive_rate(m_bits, args.n), "probability"),
        ("false_positive_rate_at_k", false_positive_rate_k(m_bits, args.n, k), "probability"),
    ]
    if args.rate is not None:
        t = bloom_saturation_time(m_bits, k, args.rate)
        rows += [("saturation_time", t, "s"), ("saturation_time_rounded", round(t), "s")]
    return rows


def analyze_marking(args) -> list:
    hops = args.hops if args.hops is not None else args.height
    h = args.height
    return [
        ("trace_tuple", TRACE_TUPLE_BYTES, "bytes"),
        ("interest_growth", interest_growth(hops), "bytes"),
        ("hops", hops, "routers"),
        ("tree_height", h, "levels"),
        ("per_path_erases", 2 ** h, "messages"),
        ("traces_per_path", h - 1, "tuples"),
        ("aggregate_trace", aggregated_trace_size(h), "bytes"),
        ("aggregate_trace_mib", aggregated_trace_size(h) / 2 ** 20, "MiB"),
    ]


# --- run ---------------------------------------------------------------------

def cmd_run(args) -> int:
    from .config import load_scenario

    sc = load_scenario(args.config)
    seed = sc.seed if args.seed is None else args.seed
    out = Path(args.out) if args.out else sc.out
    if out is None:
        raise ConfigError("no output directory: pass --out or set [scenario] out")
    producer = sc.producer.node or (sc.topology.producers[0] if sc.topology.producers else None)
    if producer is None:
        raise ConfigError("topology has no producer")
    routes = populate_fibs(sc.topology, {sc.producer.prefix: producer})
    sim = Simulation(
        sc.topology, routes,
        router_config=sc.router, router_overrides=sc.router_overrides,
        consumers=sc.consumers, producer=sc.producer, adversary=sc.adversary,
        seed=seed, duration=sc.duration, sweep_interval=sc.sweep_interval, headers=sc.headers,
    )
    try:
        metrics = sim.run()
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"bead: simulation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics.to_csv())
    (out / "erase_timing.csv").write_text(metrics.timing_csv())
    manifest = {
        "version": __version__,
        "seed": seed,
        "config": str(args.config),
        "config_sha256": sc.digest,
        "topology": sc.topology_source,
        "duration_s": sc.duration,
        "routers": len(sc.topology.routers),
        "consumers": len(sc.topology.consumers),
        "erase_timing": "host wall-clock, not reproducible across machines",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    timing = measure_erase_processing(metrics)
    slow = [n for n, ms in timing.items() if ms >= 1.0]
    print(f"erase/content bytes (routers): {metrics.erase_to_content_ratio('router'):.6f}")
    print(f"erases issued: {len(metrics.erases)}  deletions: {len(metrics.deletions)}")
    if slow:
        print(f"warning: mean erase processing >= 1 ms at {', '.join(slow)}", file=sys.stderr)
    print(f"wrote {out / 'metrics.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bead", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"bead {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a simulation scenario")
    run.add_argument("--config", required=True, help="scenario file or bundled:NAME")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory (overrides [scenario] out)")
    run.set_defaults(func=cmd_run)

    an = sub.add_parser("analyze", help="history and marking calculators")
    asub = an.add_subparsers(dest="calc", required=True)

    sat = asub.add_parser("saturation", help="lossless history saturation time")
    sat.add_argument("--storage", type=_bytes, required=True, help="history storage, e.g. 4GiB")
    sat.add_argument("--entry", type=_bytes, default=32.0, help="bytes per entry (default 32B)")
    sat.add_argument("--rate", type=_positive, help="content objects per second")
    sat.add_argument("--bandwidth", type=lambda s: parse_quantity(s, "bps"),
                     help="link rate in bits/s, e.g. 100Mbps (binary multiples)")
    sat.add_argument("--content", type=_bytes, default=4096.0, help="content size (default 4096B)")
    sat.set_defaults(func=analyze_saturation)

    bl = asub.add_parser("bloom", help="Bloom filter sizing")
    size = bl.add_mutually_exclusive_group(required=True)
    size.add_argument("--m", type=_bytes, help="filter size in bytes, e.g. 4GiB")
    size.add_argument("--m-bits", type=_positive, help="filter size in bits")
    bl.add_argument("--n", type=_positive, required=True, help="number of elements")
    bl.add_argument("--k-max", type=int)
    bl.add_argument("--k", type=int, help="use this hash count instead of the optimum")
    bl.add_argument("--rate", type=_positive, help="insertions per second, for saturation time")
    bl.set_defaults(func=analyze_bloom)

    mk = asub.add_parser("marking", help="hop-sequence trace sizes")
    mk.add_argument("--height", type=int, required=True, help="tree height h >= 1")
    mk.add_argument("--hops", type=int, help="path length for per-interest growth (default h)")
    mk.set_defaults(func=analyze_marking)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return args.func(args)
        if args.calc == "bloom" and args.k is not None and args.k < 1:
            parser.error("--k must be >= 1")
        if args.calc == "marking" and (args.height < 1 or (args.hops is not None and args.hops < 0)):
            parser.error("--height must be >= 1 and --hops >= 0")
        sys.stdout.write(_table(args.func(args)))
        return 0
    except (ConfigError, TopologyError, ValueError) as exc:
        print(f"bead: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"bead: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
