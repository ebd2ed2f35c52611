import pytest

from bead.config import load_scenario, parse_scenario
from bead.simulator import ConfigError

BASE = "[scenario]\ntopology = bundled:dfn30\nseed = 3\n"


def test_bundled_scenarios_load():
    for name, routers in (("dfn30", 30), ("att134", 134)):
        sc = load_scenario(f"bundled:{name}")
        assert len(sc.topology.routers) == routers
        assert sc.router.history.type == "lossless"
        assert sc.producer.erase_fraction == 0.5
        assert sc.consumers.rate == 10


def test_router_class_and_node_overrides():
    sc = parse_scenario(BASE + "[router]\ncache_capacity = 50\n"
                        "[router:core]\nhistory = bloom\nm_bits = 4096\nk = 3\n"
                        "[router:r0]\nmarking = yes\n")
    assert sc.router.cache_capacity == 50
    r0 = sc.router_overrides["r0"]
    assert r0.marking_enabled and r0.cache_capacity == 50
    core = [r for r, c in sc.router_overrides.items() if c.history.type == "bloom"]
    edge = [r for r in sc.topology.routers if r not in sc.router_overrides]
    assert len(core) == 14 and len(edge) == 16


def test_adversary_and_headers():
    sc = parse_scenario(BASE + "[adversary]\nnode = c0\nforged = 5\n[headers]\nerase = 128\n")
    assert sc.adversary.forged == 5
    assert sc.headers["erase"] == 128 and sc.headers["content"] == 64


@pytest.mark.parametrize("text", [
    "[scenario]\ntopology = bundled:dfn30\n",
    BASE + "[router]\nwarp = 9\n",
    BASE + "[router]\nhistory = fifo\n",
    BASE + "[router]\nflood_fallback = spray\n",
    BASE + "[producer]\ncolour = red\n",
    BASE + "[bogus]\nx = 1\n",
    BASE + "[router:r999]\ncache_capacity = 1\n",
    BASE + "[adversary]\nforged = 3\n",
    BASE + "[headers]\nping = 3\n",
    BASE + "[router]\nmarking = maybe\n",
    "[scenario]\ntopology = bundled:mars\nseed = 1\n",
    "not ini at all",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_scenario(text)


def test_unknown_bundled_scenario():
    with pytest.raises(ConfigError):
        load_scenario("bundled:mars")
