"""Compiled increment sampler shared by every simulation kernel.

Step ``k`` of a path reads a fixed set of stream words, so the increments
of a path do not depend on how far other paths (or earlier calls) ran:

* gaussian: words 2*(k//2) and 2*(k//2)+1 feed one Box-Muller pair
  (cosine branch for even k, sine branch for odd k),
* rademacher: bit k % 64 of word k // 64,
* uniform, sym_pareto, finite_discrete: word k.
"""

import math

import numba as nb
import numpy as np

from .rng import stream_word, word_to_unit

GAUSSIAN = 0
RADEMACHER = 1
UNIFORM = 2
SYM_PARETO = 3
FINITE = 4

_SQRT3 = math.sqrt(3.0)
_TWO_PI = 2.0 * math.pi
_INV53 = 1.0 / 9007199254740992.0
_HALF = np.uint64(1)
_S11 = np.uint64(11)


@nb.njit(inline="always")
def draw(kind, params, vals, cum, k0, k1, step, buf, state):
    if kind == GAUSSIAN:
        j = (step >> 1) << 1
        w1 = stream_word(k0, k1, j, buf, state)
        w2 = stream_word(k0, k1, j + 1, buf, state)
        u1 = (np.float64(w1 >> _S11) + 0.5) * _INV53
        u2 = word_to_unit(w2)
        r = math.sqrt(-2.0 * math.log(u1))
        if step & 1:
            return r * math.sin(_TWO_PI * u2)
        return r * math.cos(_TWO_PI * u2)
    if kind == RADEMACHER:
        w = stream_word(k0, k1, step >> 6, buf, state)
        if (w >> np.uint64(step & 63)) & _HALF:
            return 1.0
        return -1.0
    w = stream_word(k0, k1, step, buf, state)
    if kind == UNIFORM:
        return (2.0 * word_to_unit(w) - 1.0) * _SQRT3
    if kind == SYM_PARETO:
        # params: beta, sigma
        z = (1.0 - word_to_unit(w)) ** (-1.0 / params[0])
        if w & _HALF:
            return params[1] * z
        return -params[1] * z
    u = word_to_unit(w)
    lo = 0
    hi = cum.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        if u < cum[mid]:
            hi = mid
        else:
            lo = mid + 1
    return vals[lo]


@nb.njit(cache=True)
def draw_path(kind, params, vals, cum, k0, k1, nsteps, out):
    buf = np.zeros(4, dtype=np.uint64)
    state = np.full(1, -1, dtype=np.int64)
    for k in range(nsteps):
        out[k] = draw(kind, params, vals, cum, k0, k1, k, buf, state)
