import random

import pytest
from hypothesis import given, strategies as st

from bead.messages import (
    ContentObject, EraseMessage, Interest, Name, Nack, content_digest, message_size_bytes,
)
from bead.marking import TraceTuple


def test_name_parse_roundtrip():
    n = Name.parse("/prefix/A/17")
    assert n.components == (b"prefix", b"A", b"17")
    assert str(n) == "/prefix/A/17"
    assert Name.parse(str(n)) == n


@pytest.mark.parametrize("bad", ["/", ""])
def test_name_needs_a_component(bad):
    with pytest.raises(ValueError):
        Name.parse(bad)


def test_name_rejects_empty_component():
    with pytest.raises(ValueError):
        Name((b"a", b""))


def test_prefix_relation_brute_force():
    rng = random.Random(7)
    pool = set()
    while len(pool) < 100:
        depth = rng.randint(1, 4)
        pool.add(Name(tuple(rng.choice([b"a", b"b", b"c"]) for _ in range(depth))))
    pool = sorted(pool)
    for p in pool:
        assert p.is_prefix_of(p)
        for q in pool:
            expect = len(p) <= len(q) and all(p.components[i] == q.components[i] for i in range(len(p)))
            assert p.is_prefix_of(q) == expect
            if p.is_prefix_of(q):
                for r in pool:
                    if q.is_prefix_of(r):
                        assert p.is_prefix_of(r)


def test_digest_is_deterministic_and_256_bits(make_content):
    c, _ = make_content()
    assert content_digest(c) == content_digest(c)
    assert len(content_digest(c)) == 32
    assert c.digest == content_digest(c)


def test_digest_changes_with_any_single_payload_byte(make_content):
    rng = random.Random(99)
    c, _ = make_content(payload=bytes(rng.randrange(256) for _ in range(256)))
    base = content_digest(c)
    seen = {base}
    for _ in range(1000):
        payload = bytearray(c.payload)
        i = rng.randrange(len(payload))
        payload[i] = (payload[i] + rng.randrange(1, 256)) % 256
        d = content_digest(ContentObject(c.name, bytes(payload), c.expiry_time, c.token_digest))
        assert d != base
        seen.add(d)


@given(st.binary(max_size=64), st.floats(allow_nan=False))
def test_digest_is_a_function_of_serialization(payload, expiry):
    token_digest = b"\x01" * 32
    a = ContentObject(Name.parse("/x/y"), payload, expiry, token_digest)
    b = ContentObject(Name.parse("/x/y"), bytes(payload), expiry, bytes(token_digest))
    assert a.to_bytes() == b.to_bytes()
    assert content_digest(a) == content_digest(b)


def test_component_boundaries_are_part_of_the_digest():
    td = b"\x00" * 32
    a = ContentObject(Name.parse("/ab/c"), b"", 1.0, td)
    b = ContentObject(Name.parse("/a/bc"), b"", 1.0, td)
    assert content_digest(a) != content_digest(b)


def test_erasable_content_requires_token_digest():
    with pytest.raises(ValueError):
        ContentObject(Name.parse("/a"), b"", 1.0, None, can_erase=True)
    ContentObject(Name.parse("/a"), b"", 1.0, None, can_erase=False)


def test_erase_lengths_checked():
    with pytest.raises(ValueError):
        EraseMessage(Name.parse("/a"), b"\x00" * 32, b"\x00" * 16)


def test_content_size_with_zero_header():
    c = ContentObject(Name.parse("/a"), b"\x00" * 4096, 1.0, b"\x00" * 32)
    assert message_size_bytes(c, {"content": 0}) == 4096


def test_interest_size_with_trace():
    tup = TraceTuple(1, 2, b"\x00" * 32)
    i = Interest(Name.parse("/a"), trace=(tup,) * 16)
    assert message_size_bytes(i) == 32 + 608
    assert message_size_bytes(Interest(Name.parse("/a"))) == 32


def test_default_header_sizes():
    n = Name.parse("/a")
    assert message_size_bytes(EraseMessage(n, b"\x00" * 32, b"\x01" * 32)) == 96
    assert message_size_bytes(ContentObject(n, b"\x00" * 10, 1.0, b"\x00" * 32)) == 74
    assert message_size_bytes(Nack(n)) == 32
