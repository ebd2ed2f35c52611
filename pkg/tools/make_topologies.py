"""Regenerate the bundled dfn30 / att134 topology files.

Both are documented approximations: the published figures give router counts and
consumer attachment but not a recoverable link layout.

    python3 tools/make_topologies.py src/bead/data
"""

import random
import sys
from pathlib import Path


def _emit(header, consumers_per_edge, n_core, n_edge, core_links, edge_uplinks, producer_at):
    lines = [f"# {line}" for line in header]
    n_consumers = consumers_per_edge * n_edge
    lines += [f"node c{i} consumer" for i in range(n_consumers)]
    lines += [f"node r{i} router" for i in range(n_core + n_edge)]
    lines.append("node p0 producer")
    face = {}

    def nf(node):
        face[node] = face.get(node, -1) + 1
        return face[node]

    def link(a, b, delay=10):
        lines.append(f"link {a} {nf(a)} {b} {nf(b)} {delay}")

    for a, b in core_links:
        link(f"r{a}", f"r{b}")
    for e, ups in enumerate(edge_uplinks):
        for u in ups:
            link(f"r{n_core + e}", f"r{u}")
    for e in range(n_edge):
        for j in range(consumers_per_edge):
            link(f"c{e * consumers_per_edge + j}", f"r{n_core + e}")
    link("p0", f"r{producer_at}")
    return "\n".join(lines) + "\n"


def dfn30():
    rng = random.Random(30)
    n_core, n_edge = 14, 16
    core = [(i, (i + 1) % n_core) for i in range(n_core)]
    core += [(0, 7), (2, 10), (4, 12), (3, 9), (5, 11)]
    ups = []
    for e in range(n_edge):
        first = e % n_core
        picks = [first]
        if e % 3 == 0:
            picks.append((first + rng.randrange(2, n_core - 1)) % n_core)
        ups.append(picks)
    return _emit(
        ["dfn30: approximation of the 30-router German research network (DFN).",
         "14 core routers (r0..r13), 16 edge routers (r14..r29) each serving 10 consumers.",
         "Routers are declared after the 160 consumers, so their numeric ids are 160..189.",
         "Single producer p0 attached to core router r0. All link delays 10 ms."],
        10, n_core, n_edge, core, ups, 0)


def att134():
    rng = random.Random(134)
    n_core, n_edge = 102, 32
    links = []
    degree = [0] * n_core
    # preferential attachment, two links per new router after the seed triangle
    for a, b in ((0, 1), (1, 2), (0, 2)):
        links.append((a, b))
        degree[a] += 1
        degree[b] += 1
    for v in range(3, n_core):
        targets = set()
        while len(targets) < 2:
            pick = rng.choices(range(v), weights=[d + 1 for d in degree[:v]])[0]
            targets.add(pick)
        for u in sorted(targets):
            links.append((u, v))
            degree[u] += 1
            degree[v] += 1
    # edge routers hang off low-degree core routers, as access points do
    leaves = sorted(range(n_core), key=lambda i: (degree[i], i))
    ups = [[leaves[e]] for e in range(n_edge)]
    return _emit(
        ["att134: approximation of the AT&T backbone (>130 routers; 134 fixed here).",
         "102 core routers (r0..r101) grown by preferential attachment, seed 134;",
         "32 edge routers (r102..r133) each serving 5 consumers (160 consumers total).",
         "Routers are declared after the consumers, so their numeric ids are 160..293.",
         "Single producer p0 attached to core hub r0. All link delays 10 ms."],
        5, n_core, n_edge, links, ups, 0)


if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "src/bead/data")
    out.mkdir(parents=True, exist_ok=True)
    (out / "dfn30.topo").write_text(dfn30())
    (out / "att134.topo").write_text(att134())
