"""Deterministic random streams shared by both kernel backends.

xoshiro256++ generators seeded through splitmix64, implemented on wrapping
uint64 arithmetic so the numba and interpreted paths consume bit-identical
streams.  Stream splitting rule: the stream for ``(master_seed, stream_id)``
is seeded by chaining four splitmix64 outputs from
``mix64(master_seed XOR mix64(stream_id * 0xA3EC647659359ACD + 1))``,
so replicas, sweep points and analysis phases each get an independent
generator from one master seed.
"""

import numpy as np

from .backend import kernel

U64 = np.uint64

_GOLDEN = 0x9E3779B97F4A7C15
_STREAM_SALT = 0xA3EC647659359ACD


@kernel
def _mix64(x):
    x = (x ^ (x >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> U64(27))) * U64(0x94D049BB133111EB)
    return x ^ (x >> U64(31))


@kernel
def _sm64_step(z):
    z = z + U64(_GOLDEN)
    return z, _mix64(z)


@kernel
def _derive_state(master, stream_id):
    s = np.empty(4, np.uint64)
    z = _mix64(master ^ _mix64(stream_id * U64(_STREAM_SALT) + U64(1)))
    for i in range(4):
        z, v = _sm64_step(z)
        s[i] = v
    if (s[0] | s[1] | s[2] | s[3]) == U64(0):
        s[0] = U64(_GOLDEN)
    return s


@kernel
def next_u64(s):
    x = s[0] + s[3]
    result = ((x << U64(23)) | (x >> U64(41))) + s[0]
    t = s[1] << U64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = (s[3] << U64(45)) | (s[3] >> U64(19))
    return result


@kernel
def rand_u01(s):
    # 53-bit mantissa draw in (0, 1]; never exactly 0 so -log is finite
    return (np.float64(next_u64(s) >> U64(11)) + 1.0) * (1.0 / 9007199254740992.0)


@kernel
def rand_exp(s):
    return -np.log(rand_u01(s))


@kernel
def rand_below(s, n):
    # unbiased integer in [0, n): reject draws below 2**64 mod n
    un = U64(n)
    t = (U64(0) - un) % un
    while True:
        u = next_u64(s)
        if u >= t:
            return np.int64(u % un)


def derive_stream(master_seed: int, stream_id: int = 0) -> np.ndarray:
    """Length-4 uint64 xoshiro256++ state for the given (seed, stream) pair."""
    m = U64(master_seed & 0xFFFFFFFFFFFFFFFF)
    sid = U64(stream_id & 0xFFFFFFFFFFFFFFFF)
    return _derive_state(m, sid)


def derive_master(master_seed: int, tag: int) -> int:
    """A derived 64-bit master seed for an independent experiment phase."""
    with np.errstate(over="ignore"):
        m = U64(master_seed & 0xFFFFFFFFFFFFFFFF)
        t = U64(tag & 0xFFFFFFFFFFFFFFFF)
        return int(_mix64(m ^ _mix64(t * U64(_STREAM_SALT) + U64(0x5851F42D4C957F2D))))


class RngStream:
    """Convenience wrapper holding one stream's mutable state."""

    def __init__(self, master_seed: int, stream_id: int = 0):
        self.state = derive_stream(master_seed, stream_id)

    def u64(self) -> int:
        return int(next_u64(self.state))

    def uniform(self) -> float:
        return float(rand_u01(self.state))

    def exponential(self, rate: float = 1.0) -> float:
        return float(rand_exp(self.state)) / rate

    def below(self, n: int) -> int:
        return int(rand_below(self.state, np.int64(n)))
