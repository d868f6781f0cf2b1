"""Compiled path kernels.

Path ``r`` of a batch uses stream ``(seed, base + r)``; paths are split
into fixed-size chunks for ``prange``, and every output slot is written by
exactly one path, so results do not depend on the thread count.
"""

import math

import numba as nb
import numpy as np

from ._draw import draw

CHUNK = 2048


@nb.njit(parallel=True, cache=True)
def exit_times(kind, params, vals, cum, c, a, b, horizon, seed, base, n_paths, out):
    """out[r] = T for path r if T <= horizon, else horizon + 1."""
    n_chunks = (n_paths + CHUNK - 1) // CHUNK
    for ch in nb.prange(n_chunks):
        buf = np.zeros(4, dtype=np.uint64)
        state = np.empty(1, dtype=np.int64)
        r_end = min(n_paths, (ch + 1) * CHUNK)
        for r in range(ch * CHUNK, r_end):
            k1 = np.uint64(base + r)
            state[0] = -1
            x = a
            t_exit = horizon + 1
            for n in range(1, horizon + 1):
                x += draw(kind, params, vals, cum, seed, k1, n - 1, buf, state)
                if x <= c * math.sqrt(n + b):
                    t_exit = n
                    break
            out[r] = t_exit


@nb.njit(parallel=True, cache=True)
def positions_at(kind, params, vals, cum, c, a, b, checkpoints, seed, base, n_paths, out):
    """out[r, j] = a + S(checkpoints[j]) if path r survives that long, else NaN."""
    n_chunks = (n_paths + CHUNK - 1) // CHUNK
    n_ck = checkpoints.shape[0]
    horizon = checkpoints[n_ck - 1]
    for ch in nb.prange(n_chunks):
        buf = np.zeros(4, dtype=np.uint64)
        state = np.empty(1, dtype=np.int64)
        r_end = min(n_paths, (ch + 1) * CHUNK)
        for r in range(ch * CHUNK, r_end):
            k1 = np.uint64(base + r)
            state[0] = -1
            x = a
            j = 0
            while j < n_ck and checkpoints[j] == 0:
                out[r, j] = x
                j += 1
            alive = True
            for n in range(1, horizon + 1):
                x += draw(kind, params, vals, cum, seed, k1, n - 1, buf, state)
                if x <= c * math.sqrt(n + b):
                    alive = False
                    break
                while j < n_ck and checkpoints[j] == n:
                    out[r, j] = x
                    j += 1
            if not alive:
                while j < n_ck:
                    out[r, j] = np.nan
                    j += 1
