"""Fast V_p evaluation for compiled kernels.

A table is a flat float64 array so it can be handed to numba functions
unchanged.  Layout::

    [kind, p, c_clip, zlo, h, npts, wmax, ncheb, y..., dy..., d2y..., cheb...]

``kind`` 0 is an integer order (Hermite recurrence in homogeneous form, no
data).  ``kind`` 1 is a non-integer order: psi_p on z in [zlo, zlo + h*(npts-1)]
through quintic Hermite interpolation with exact first and second
derivatives p psi_{p-1} and p (p-1) psi_{p-2}, and beyond that
V_p(x, t) = x^p H(t / x^2) with H(w) = psi_p(z) z^-p, w = z^-2, fitted by a
Chebyshev series on [0, wmax].
"""

import functools
import math

import numba as nb
import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .special_fn import QuadratureConfig, eval_psi, is_integer_order, psi

HEADER = 8
Z_MID = 12.0
GRID_STEP = 0.02
N_CHEB = 24
_TABLE_QUAD = QuadratureConfig(rel_tol=1e-13, abs_tol=1e-300)
# default table reach below the clipping line, in units of z = x / sqrt(t)
Z_BELOW = 3.0


def _psi_triplet(p, z):
    """(psi_{p-2}, psi_{p-1}, psi_p) at z from a single recurrence pass."""
    k = math.floor(p) + 2
    q0 = p - k
    if q0 >= -1.0:
        q0 -= 1.0
        k += 1
    f0 = eval_psi(q0, z, _TABLE_QUAD).value
    f1 = eval_psi(q0 + 1.0, z, _TABLE_QUAD).value
    vals = [f0, f1]
    q = q0 + 1.0
    for _ in range(k - 1):
        f0, f1 = f1, z * f1 - q * f0
        vals.append(f1)
        q += 1.0
    return vals[-3], vals[-2], vals[-1]


@functools.lru_cache(maxsize=64)
def build_table(p, c_clip, zlo=None):
    """Table for V_p clipped below x = c_clip * sqrt(t).

    ``zlo`` defaults to ``Z_BELOW`` below ``c_clip``; the table is only
    valid for z >= zlo.
    """
    p = float(p)
    c_clip = float(c_clip)
    if is_integer_order(p) and round(p) >= 0:
        tab = np.zeros(HEADER)
        tab[0] = 0.0
        tab[1] = float(round(p))
        tab[2] = c_clip
        return tab
    if p <= 0:
        raise ValueError("tables are built for positive orders only")
    if zlo is None:
        zlo = c_clip - Z_BELOW
    zlo = min(float(zlo), Z_MID - 1.0)
    npts = int(math.ceil((Z_MID - zlo) / GRID_STEP)) + 1
    z = zlo + GRID_STEP * np.arange(npts)
    y = np.empty(npts)
    dy = np.empty(npts)
    d2 = np.empty(npts)
    for i, zi in enumerate(z):
        fm2, fm1, f = _psi_triplet(p, zi)
        y[i] = f
        dy[i] = p * fm1
        d2[i] = p * (p - 1.0) * fm2
    zend = z[-1]
    wmax = 1.0 / (zend * zend)

    def hfun(u):
        w = 0.5 * (np.asarray(u) + 1.0) * wmax
        out = np.empty_like(w)
        for j, wj in enumerate(w):
            if wj <= 0.0:
                out[j] = 1.0
            else:
                zz = 1.0 / math.sqrt(wj)
                out[j] = psi(p, zz, _TABLE_QUAD) * zz ** (-p)
        return out

    cheb = npcheb.chebinterpolate(hfun, N_CHEB - 1)
    head = np.array([1.0, p, c_clip, zlo, GRID_STEP, float(npts), wmax, float(N_CHEB)])
    return np.concatenate([head, y, dy, d2, cheb])


@nb.njit(cache=True)
def _clenshaw(coef, off, n, u):
    b1 = 0.0
    b2 = 0.0
    for j in range(n - 1, 0, -1):
        b1, b2 = 2.0 * u * b1 - b2 + coef[off + j], b1
    return u * b1 - b2 + coef[off]


@nb.njit(cache=True)
def psi_tab(tab, z):
    """psi_p(z) from a non-integer table, for zlo <= z <= zlo + h (npts - 1)."""
    h = tab[4]
    npts = int(tab[5])
    s = (z - tab[3]) / h
    i = int(s)
    if i < 0:
        i = 0
    if i > npts - 2:
        i = npts - 2
    s = s - i
    y0 = tab[HEADER + i]
    y1 = tab[HEADER + i + 1]
    d0 = tab[HEADER + npts + i] * h
    d1 = tab[HEADER + npts + i + 1] * h
    e0 = tab[HEADER + 2 * npts + i] * h * h
    e1 = tab[HEADER + 2 * npts + i + 1] * h * h
    s2 = s * s
    s3 = s2 * s
    s4 = s3 * s
    s5 = s4 * s
    h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5
    h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5
    h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5
    h3 = 0.5 * s3 - s4 + 0.5 * s5
    h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5
    h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5
    return h0 * y0 + h1 * d0 + h2 * e0 + h3 * e1 + h4 * d1 + h5 * y1


@nb.njit(cache=True)
def v_eval(tab, x, t):
    """Unclipped V_p(x, t) for x >= zlo sqrt(t) (any x for integer p)."""
    if tab[0] == 0.0:
        n = int(tab[1])
        if n == 0:
            return 1.0
        v0 = 1.0
        v1 = x
        for k in range(1, n):
            v0, v1 = v1, x * v1 - k * t * v0
        return v1
    p = tab[1]
    zend = tab[3] + tab[4] * (tab[5] - 1.0)
    if t > 0.0:
        z = x / math.sqrt(t)
        if z <= zend:
            return t ** (0.5 * p) * psi_tab(tab, z)
    if x <= 0.0:
        return 0.0
    wmax = tab[6]
    ncheb = int(tab[7])
    w = t / (x * x)
    u = 2.0 * w / wmax - 1.0
    return x ** p * _clenshaw(tab, HEADER + 3 * int(tab[5]), ncheb, u)


@nb.njit(cache=True)
def v_clipped(tab, x, t):
    """V_p(x, t) when x >= c sqrt(t), else 0."""
    if x < tab[2] * math.sqrt(t):
        return 0.0
    if t == 0.0 and x <= 0.0:
        return 0.0
    return v_eval(tab, x, t)


@nb.njit(cache=True)
def v_clipped_many(tab, x, t, out):
    for i in range(x.shape[0]):
        out[i] = v_clipped(tab, x[i], t[i])


def clipped_values(tab, x, t):
    """Vectorized clipped V over broadcast arrays."""
    x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    xf = np.ascontiguousarray(x.ravel())
    tf = np.ascontiguousarray(t.ravel())
    out = np.empty_like(xf)
    v_clipped_many(tab, xf, tf, out)
    return out.reshape(x.shape)
