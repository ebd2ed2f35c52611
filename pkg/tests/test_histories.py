import hashlib
import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from bead.histories import (
    BloomHistory, CountingBloomHistory, HistoryConfig, LosslessHistory, NullHistory,
    bloom_indices, bloom_saturation_time, false_positive_rate, false_positive_rate_k,
    make_history, optimal_k, saturation_time,
)


def digest(i) -> bytes:
    return hashlib.sha256(str(i).encode()).digest()


def random_digests(seed, count):
    rng = random.Random(seed)
    return [rng.randbytes(32) for _ in range(count)]


# --- lossless ----------------------------------------------------------------

def test_lossless_insert_then_query():
    h = LosslessHistory()
    assert not h.query(digest(1))
    h.insert(digest(1))
    assert h.query(digest(1))
    assert digest(1) in h


def test_lossless_window_eviction_drops_oldest_chunk():
    # ten digests per simulated second; the 101st insert overflows capacity 100
    h = LosslessHistory(capacity=100, chunk_window=1.0)
    for i in range(100):
        h.insert(digest(i), now=i / 10)
    assert len(h) == 100
    h.insert(digest(100), now=10.0)
    assert all(not h.query(digest(i)) for i in range(10))
    assert all(h.query(digest(i)) for i in range(10, 101))
    assert len(h) == 91
    assert h.evicted_chunks == 1


def test_lossless_count_chunks():
    h = LosslessHistory(capacity=12, chunk_count=12)
    for i in range(13):
        h.insert(digest(i))
    assert not h.query(digest(0))
    assert all(h.query(digest(i)) for i in range(1, 13))
    assert len(h) <= 12


class LosslessOracle:
    """Set-per-chunk reference with the same rotation and eviction rules."""

    def __init__(self, capacity, chunk_count):
        self.capacity = capacity
        self.size = -(-capacity // chunk_count)
        self.chunks = [[]]

    def insert(self, d):
        for c in self.chunks:
            if d in c:
                c.remove(d)
        if len(self.chunks[-1]) >= self.size:
            self.chunks.append([])
        while sum(len(c) for c in self.chunks) >= self.capacity:
            self.chunks.pop(0)
            if not self.chunks:
                self.chunks.append([])
        self.chunks[-1].append(d)

    def members(self):
        return {d for c in self.chunks for d in c}


@settings(max_examples=150, deadline=None)
@given(
    capacity=st.integers(min_value=1, max_value=40),
    chunk_count=st.integers(min_value=1, max_value=12),
    ops=st.lists(st.integers(min_value=0, max_value=60), max_size=300),
)
def test_lossless_matches_oracle(capacity, chunk_count, ops):
    h = LosslessHistory(capacity=capacity, chunk_count=chunk_count)
    ref = LosslessOracle(capacity, chunk_count)
    for x in ops:
        h.insert(digest(x))
        ref.insert(digest(x))
        members = ref.members()
        assert len(h) == len(members) <= capacity
        for probe in range(61):
            assert h.query(digest(probe)) == (digest(probe) in members)


def test_lossless_rejects_bad_capacity():
    with pytest.raises(ValueError):
        LosslessHistory(capacity=0)


# --- bloom -------------------------------------------------------------------

def test_bloom_indices_in_range_and_deterministic():
    d = digest("x")
    a = list(bloom_indices(d, 50, 1009))
    assert a == list(bloom_indices(d, 50, 1009))
    assert all(0 <= i < 1009 for i in a)
    assert len(set(a)) > 40


def test_bloom_fresh_has_no_false_negative():
    h = BloomHistory(1 << 12, 4)
    h.insert(digest(7))
    assert h.query(digest(7))
    assert not BloomHistory(1 << 12, 4).query(digest(7))


def test_bloom_no_false_negatives_1e5():
    ds = random_digests(3, 100_000)
    h = BloomHistory(100_000 * 10, optimal_k(100_000 * 10, 100_000), reset_threshold=None)
    for d in ds:
        h.insert(d)
    assert all(h.query(d) for d in ds)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.binary(min_size=32, max_size=32), max_size=400), st.integers(1, 8))
def test_bloom_no_false_negatives_property(ds, k):
    h = BloomHistory(4096, k, reset_threshold=None)
    for d in ds:
        h.insert(d)
    assert all(h.query(d) for d in ds)


@pytest.mark.parametrize("bits_per_element", [4, 8, 16])
def test_bloom_empirical_fp_within_3x(bits_per_element):
    n = 10_000
    m = bits_per_element * n
    h = BloomHistory(m, optimal_k(m, n), reset_threshold=None)
    for d in random_digests(10, n):
        h.insert(d)
    probes = random_digests(20 + bits_per_element, 200_000)
    fp = sum(h.query(d) for d in probes) / len(probes)
    predicted = false_positive_rate(m, n)
    assert predicted / 3 <= fp <= predicted * 3


def test_bloom_at_171_bits_per_element_has_no_observed_fp():
    n = 1000
    m = round(171.8 * n)
    k = optimal_k(m, n)
    assert k == 119
    assert false_positive_rate(m, n) <= 1e-32
    h = BloomHistory(m, k, reset_threshold=None)
    for d in random_digests(1, n):
        h.insert(d)
    rng = random.Random(2)
    assert not any(h.query(rng.randbytes(32)) for _ in range(1_000_000))


def test_bloom_resets_past_threshold():
    h = BloomHistory(256, 4, reset_threshold=0.5)
    for i in range(200):
        h.insert(digest(i))
        assert h.fill_ratio <= 0.5
    assert h.resets > 0


# --- counting bloom ----------------------------------------------------------

def test_cbf_without_decrements_has_no_false_negatives():
    ds = random_digests(4, 2000)
    h = CountingBloomHistory(20_000, 5)
    for d in ds:
        h.insert(d)
    assert all(h.query(d) for d in ds)
    h.advance(100.0, random.Random(0))  # no mean_expiry: nothing decays
    assert all(h.query(d) for d in ds)


def test_cbf_random_decrements_cause_false_negatives():
    ds = random_digests(5, 1000)
    h = CountingBloomHistory(8000, 5)
    for d in ds:
        h.insert(d)
    h.decrement_random(5 * 200, random.Random(6))
    misses = sum(not h.query(d) for d in ds)
    assert misses > 0
    assert int(h.counters.min()) >= 0


def test_cbf_counters_saturate_and_stay_non_negative():
    h = CountingBloomHistory(64, 3, counter_bits=4)
    d = digest(1)
    for _ in range(40):
        h.insert(d)
    assert int(h.counters.max()) == 15
    h.decrement_random(10_000, random.Random(1))
    assert int(h.counters.min()) == 0 and int(h.counters.max()) == 0


def test_cbf_decay_rate_follows_mean_expiry():
    h = CountingBloomHistory(50_000, 4, mean_expiry=10.0)
    for d in random_digests(8, 1000):
        h.insert(d)
    rng = random.Random(9)
    before = h.occupancy
    h.advance(1.0, rng)
    # one second at mean expiry 10 s sheds about a tenth of the elements
    shed = before - h.occupancy
    assert shed == pytest.approx(before / 10, rel=0.02)


# --- factory -----------------------------------------------------------------

@pytest.mark.parametrize("kind,cls", [
    ("lossless", LosslessHistory), ("bloom", BloomHistory), ("cbf", CountingBloomHistory),
    ("none", NullHistory),
])
def test_make_history(kind, cls):
    h = make_history(HistoryConfig(type=kind, m_bits=1024, k=3))
    assert isinstance(h, cls)


def test_make_history_auto_k_needs_expected_n():
    with pytest.raises(ValueError):
        make_history(HistoryConfig(type="bloom", m_bits=1024))
    h = make_history(HistoryConfig(type="bloom", m_bits=1024, expected_n=100))
    assert h.k == 7


def test_make_history_unknown():
    with pytest.raises(ValueError):
        make_history(HistoryConfig(type="fifo"))


# --- calculators -------------------------------------------------------------

def test_optimal_k_examples():
    assert optimal_k(2**35, 2e8) in (119, 120)
    assert optimal_k(1 / math.log(2), 1) == 1
    assert optimal_k(2**43, 5.7e10) == 107
    assert optimal_k(2**35, 2e8, k_max=64) == 64
    assert optimal_k(1, 1000) == 1


@pytest.mark.parametrize("m,n", [(0, 1), (1, 0), (-5, 3)])
def test_calculators_reject_non_positive(m, n):
    with pytest.raises(ValueError):
        optimal_k(m, n)
    with pytest.raises(ValueError):
        false_positive_rate(m, n)


def test_optimal_k_is_brute_force_minimum():
    rng = random.Random(77)
    for _ in range(20):
        m = rng.randint(1_000, 5_000_000)
        n = rng.randint(10, m // 2)
        top = max(1, int(2 * math.log(2) * m / n))
        # log-space so very small rates still compare
        best = min(range(1, top + 1), key=lambda k: k * math.log(1 - math.exp(-k * n / m)))
        assert optimal_k(m, n) == best


def test_false_positive_rate_examples():
    assert false_positive_rate(1, 1) == pytest.approx(0.6185)
    assert false_positive_rate(2**35, 2e8) <= 1e-32
    direct = 0.6185 ** 10
    assert false_positive_rate(10, 1) == pytest.approx(direct)
    assert direct == pytest.approx(8.2e-3, rel=0.01)
    k = optimal_k(10, 1)
    assert false_positive_rate_k(10, 1, k) == pytest.approx(direct, rel=0.02)


def test_saturation_time_examples():
    assert saturation_time(4 * 2**30 / 32, 3200) == pytest.approx(41_943, abs=1)
    assert saturation_time(2**40 / 32, 335_544_320) == pytest.approx(102.4)
    assert round(saturation_time(2**40 / 32, 335_544_320)) == 102
    assert saturation_time(0, 5) == 0
    with pytest.raises(ValueError):
        saturation_time(10, 0)


def test_bloom_saturation_time_examples():
    assert bloom_saturation_time(2**35, 120, 3200) == pytest.approx(89_478, abs=1)
    assert bloom_saturation_time(2**43, 107, 335_544_320) == pytest.approx(245, abs=1)
    assert bloom_saturation_time(1000, 1000, 4.0) == pytest.approx(1 / 4.0)
    with pytest.raises(ValueError):
        bloom_saturation_time(2**10, 0, 1)
