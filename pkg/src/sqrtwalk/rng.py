"""Counter-based random streams.

Every simulated path owns an independent Philox4x64-10 stream keyed by
``(master_seed, stream_id)``.  Output word ``i`` of a stream is lane
``i % 4`` of the block computed at counter ``i // 4 + 1``, which is the
same sequence ``numpy.random.Philox(key=(master_seed, stream_id))``
produces through ``random_raw``.  Because a path's draws depend only on
its own key and step index, results do not depend on how paths are
split across threads.
"""

from dataclasses import dataclass

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0

MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus the stream id assigned to replica 0."""

    master_seed: int = 0
    base: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= MAX_SEED:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if not 0 <= int(self.base) <= MAX_SEED:
            raise ValueError("stream base must fit in 64 unsigned bits")

    def offset(self, k):
        """Same master seed, stream ids shifted by ``k``."""
        return SeedSpec(self.master_seed, (int(self.base) + int(k)) % 2**64)

    def as_dict(self):
        return {"master_seed": int(self.master_seed), "stream_base": int(self.base)}


@nb.njit(inline="always")
def _mulhilo(a, b):
    a0 = a & _LO32
    a1 = a >> _S32
    b0 = b & _LO32
    b1 = b >> _S32
    p00 = a0 * b0
    p01 = a0 * b1
    p10 = a1 * b0
    p11 = a1 * b1
    mid = (p00 >> _S32) + (p01 & _LO32) + (p10 & _LO32)
    hi = p11 + (p01 >> _S32) + (p10 >> _S32) + (mid >> _S32)
    return hi, a * b


@nb.njit(cache=True)
def philox_block(c0, c1, c2, c3, k0, k1, out):
    """Philox4x64-10 of counter ``(c0..c3)`` under key ``(k0, k1)`` into ``out[0:4]``."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        n0 = hi1 ^ c1 ^ k0
        n2 = hi0 ^ c3 ^ k1
        c0 = n0
        c1 = lo1
        c2 = n2
        c3 = lo0
    out[0] = c0
    out[1] = c1
    out[2] = c2
    out[3] = c3


@nb.njit(inline="always")
def stream_word(k0, k1, i, buf, state):
    """Word ``i`` of stream ``(k0, k1)``.

    ``buf`` (uint64[4]) caches the current block and ``state[0]`` (int64)
    holds its block index, -1 when empty.
    """
    blk = i >> 2
    if state[0] != blk:
        philox_block(np.uint64(blk + 1), np.uint64(0), np.uint64(0), np.uint64(0),
                     k0, k1, buf)
        state[0] = blk
    return buf[i & 3]


@nb.njit(inline="always")
def word_to_unit(w):
    """Map a 64-bit word to a double in [0, 1) using its top 53 bits."""
    return np.float64(w >> _S11) * _INV53


@nb.njit(cache=True)
def _raw_words(k0, k1, start, count, out):
    buf = np.zeros(4, dtype=np.uint64)
    state = np.full(1, -1, dtype=np.int64)
    for j in range(count):
        out[j] = stream_word(k0, k1, start + j, buf, state)


def raw_words(master_seed, stream_id, count, start=0):
    """First ``count`` words of a stream, from word index ``start``."""
    out = np.empty(int(count), dtype=np.uint64)
    _raw_words(np.uint64(master_seed), np.uint64(stream_id), int(start), int(count), out)
    return out


def uniforms(master_seed, stream_id, count, start=0):
    """Doubles in [0, 1) built from a stream's words."""
    return (raw_words(master_seed, stream_id, count, start) >> np.uint64(11)) * _INV53
