"""Stream derivation and draw primitives against a pure-int reference.

The reference below re-implements splitmix64 and xoshiro256++ with plain
Python integers masked to 64 bits, so any wraparound or shift bug in the
array-based implementation shows up as a mismatch.
"""

import math

import numpy as np

from rodfluid.rng import RngStream, derive_master, derive_stream, next_u64, \
    rand_below, rand_u01

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
SALT = 0xA3EC647659359ACD


def mix64_ref(x):
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK
    return x ^ (x >> 31)


def rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK


def derive_ref(master, stream_id):
    z = mix64_ref((master ^ mix64_ref((stream_id * SALT + 1) & MASK)) & MASK)
    s = []
    for _ in range(4):
        z = (z + GOLDEN) & MASK
        s.append(mix64_ref(z))
    if s[0] | s[1] | s[2] | s[3] == 0:
        s[0] = GOLDEN
    return s


def next_ref(s):
    result = (rotl((s[0] + s[3]) & MASK, 23) + s[0]) & MASK
    t = (s[1] << 17) & MASK
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = rotl(s[3], 45)
    return result


def test_derive_state_matches_reference():
    for seed in (0, 1, 12345, 2**63, MASK):
        for sid in (0, 1, 2, 77, 10**6):
            got = derive_stream(seed, sid)
            want = derive_ref(seed & MASK, sid & MASK)
            assert got.dtype == np.uint64
            assert [int(v) for v in got] == want, (seed, sid)


def test_next_u64_matches_reference():
    state = derive_stream(12345, 0)
    ref = derive_ref(12345, 0)
    for i in range(2000):
        assert int(next_u64(state)) == next_ref(ref), f"diverged at draw {i}"


def test_frozen_first_draws():
    # pinned so any silent change to the stream layout fails loudly
    state = derive_stream(12345, 0)
    draws = [int(next_u64(state)) for _ in range(4)]
    assert draws == [
        12359345164481273361,
        3046106307427550860,
        5973831676196235864,
        17347677670772104298,
    ]


def test_streams_differ_and_are_reproducible():
    a = derive_stream(12345, 0)
    b = derive_stream(12345, 1)
    c = derive_stream(12346, 0)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.array_equal(a, derive_stream(12345, 0))


def test_rng_stream_wrapper_tracks_raw_state():
    rs = RngStream(42, 7)
    raw = derive_stream(42, 7)
    for _ in range(50):
        assert rs.u64() == int(next_u64(raw))


def test_u01_in_half_open_unit_interval():
    state = derive_stream(9, 0)
    lo = 1.0
    hi = 0.0
    total = 0.0
    n = 20000
    for _ in range(n):
        u = float(rand_u01(state))
        assert 0.0 < u <= 1.0
        lo = min(lo, u)
        hi = max(hi, u)
        total += u
    # mean of Uniform(0,1]: 0.5 +- 5 sigma with sigma = 1/sqrt(12 n)
    assert abs(total / n - 0.5) < 5.0 / math.sqrt(12 * n)
    assert lo < 0.01 and hi > 0.99


def test_u01_is_53_bit_quantised():
    state = derive_stream(3, 1)
    for _ in range(200):
        u = float(rand_u01(state))
        assert u * 9007199254740992.0 == round(u * 9007199254740992.0)


def test_exponential_mean():
    rs = RngStream(2024, 0)
    n = 50000
    total = sum(rs.exponential() for _ in range(n))
    # mean 1, sd 1; allow 5 sigma
    assert abs(total / n - 1.0) < 5.0 / math.sqrt(n)


def test_rand_below_uniform_and_exact_range():
    state = derive_stream(5, 5)
    n = 7
    counts = [0] * n
    draws = 70000
    for _ in range(draws):
        k = int(rand_below(state, np.int64(n)))
        assert 0 <= k < n
        counts[k] += 1
    expect = draws / n
    sigma = math.sqrt(draws * (1 / n) * (1 - 1 / n))
    for k, c in enumerate(counts):
        assert abs(c - expect) < 5 * sigma, (k, c)


def test_rand_below_one_is_always_zero():
    state = derive_stream(1, 1)
    for _ in range(10):
        assert int(rand_below(state, np.int64(1))) == 0


def test_derive_master_spreads_tags():
    seen = {derive_master(12345, t) for t in range(200)}
    assert len(seen) == 200
    assert derive_master(12345, 3) == derive_master(12345, 3)
    assert derive_master(12345, 3) != derive_master(12346, 3)
    for v in seen:
        assert 0 <= v <= MASK
