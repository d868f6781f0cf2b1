"""Compiled one-step expectations and drift path sums for clipped V."""

import math

import numba as nb
import numpy as np

from ._draw import FINITE, GAUSSIAN, RADEMACHER, UNIFORM, draw
from ._kernels import CHUNK
from .vtable import psi_tab, v_clipped, v_eval

GAUSS_SPAN = 10.0
GAUSS_PANEL = 2.0
PARETO_PANEL = 2.0
# up-jumps beyond PARETO_FAR (|x| + sqrt(t) + 1) use the large-argument series
PARETO_FAR = 30.0
# beyond this distance from the curve (and for y >= 1) the Gaussian drift of
# the clipped V is below exp(-40) relative and is returned as zero
GAUSS_FAR = 9.0
# from this time on the Gaussian drift is integrated over the killed side only
GAUSS_COMP_T = 16.0
GAUSS_COMP_PANEL = 3.0
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT3 = math.sqrt(3.0)


@nb.njit(cache=True)
def _panels(tab, kind, x, t1, lo, hi, width, glx, glw):
    """int_lo^hi Vbar(x + u, t1) dens(u) du for gaussian / uniform densities."""
    n_pan = max(1, int(math.ceil((hi - lo) / width)))
    h = (hi - lo) / n_pan
    s = 0.0
    for i in range(n_pan):
        mid = lo + (i + 0.5) * h
        for j in range(glx.shape[0]):
            u = mid + 0.5 * h * glx[j]
            v = v_clipped(tab, x + u, t1)
            if kind == GAUSSIAN:
                v *= math.exp(-0.5 * u * u) * _INV_SQRT_2PI
            else:
                v *= 0.5 / _SQRT3
            s += glw[j] * v
    return s * 0.5 * h


@nb.njit(cache=True)
def _pareto_half(tab, x, t1, sign, sigma, beta, vlo, vhi, glx, glw):
    """int over log-jump v in [vlo, vhi] of beta e^{-beta v} Vbar(x + sign sigma e^v, t1)."""
    if vhi <= vlo:
        return 0.0
    n_pan = max(1, int(math.ceil((vhi - vlo) / PARETO_PANEL)))
    h = (vhi - vlo) / n_pan
    s = 0.0
    for i in range(n_pan):
        mid = vlo + (i + 0.5) * h
        for j in range(glx.shape[0]):
            v = mid + 0.5 * h * glx[j]
            ev = math.exp(v)
            s += glw[j] * beta * math.exp(-beta * v) * v_clipped(tab, x + sign * sigma * ev, t1)
    return s * 0.5 * h


@nb.njit(cache=True)
def expect_next(tab, kind, params, vals, probs, glx, glw, x, y):
    """E Vbar(x + X, y + 1)."""
    t1 = y + 1.0
    if kind == RADEMACHER:
        return 0.5 * (v_clipped(tab, x + 1.0, t1) + v_clipped(tab, x - 1.0, t1))
    if kind == FINITE:
        s = 0.0
        for i in range(vals.shape[0]):
            s += probs[i] * v_clipped(tab, x + vals[i], t1)
        return s
    lim = tab[2] * math.sqrt(t1) - x
    if kind == GAUSSIAN:
        lo = max(lim, -GAUSS_SPAN)
        if lo >= GAUSS_SPAN:
            return 0.0
        return _panels(tab, kind, x, t1, lo, GAUSS_SPAN, GAUSS_PANEL, glx, glw)
    if kind == UNIFORM:
        lo = max(lim, -_SQRT3)
        if lo >= _SQRT3:
            return 0.0
        return _panels(tab, kind, x, t1, lo, _SQRT3, 2.0 * _SQRT3, glx, glw)
    # symmetric Pareto: params = (beta, sigma)
    beta = params[0]
    sigma = params[1]
    zpos = max(1.0, lim / sigma)
    vpos = math.log(zpos)
    vfar = max(vpos, math.log(PARETO_FAR * (abs(x) + math.sqrt(t1) + 1.0) / sigma))
    up = _pareto_half(tab, x, t1, 1.0, sigma, beta, vpos, vfar, glx, glw)
    up += _pareto_tail(tab[1], x, t1, sigma, beta, vfar)
    down = 0.0
    zneg = -lim / sigma
    if zneg > 1.0:
        down = _pareto_half(tab, x, t1, -1.0, sigma, beta, 0.0, math.log(zneg), glx, glw)
    return 0.5 * (up + down)


@nb.njit(cache=True)
def _pareto_tail(p, x, t1, sigma, beta, v0):
    """int_{v0}^inf beta e^{-beta v} V(x + sigma e^v, t1) dv for p < beta.

    With u = sigma e^v >> |x|, sqrt(t1), V(x + u, t1) is the series
    sum_j (-1)^j [p]_{2j} / (j! 2^j) t1^j (x + u)^{p - 2j}, and each power
    of x + u is expanded binomially in x / u, so every term integrates in
    closed form.
    """
    acc = 0.0
    aj = 1.0
    inv_u0 = math.exp(-v0) / sigma
    for j in range(7):
        q = p - 2.0 * j
        # sigma^e e^{(e - beta) v0} for e = q - k, updated by 1 / (sigma e^{v0})
        base = beta * math.exp(q * math.log(sigma) + (q - beta) * v0)
        ck = 1.0
        for k in range(16):
            e = q - k
            term = aj * ck * base / (beta - e)
            acc += term
            if abs(term) <= 1e-17 * abs(acc):
                break
            ck *= (q - k) / (k + 1.0) * x
            base *= inv_u0
        if aj == 0.0:
            break
        aj *= -(p - 2.0 * j) * (p - 2.0 * j - 1.0) * t1 / (2.0 * (j + 1.0))
    return acc


@nb.njit(cache=True)
def _gauss_killed(tab, x, t1, glx, glw):
    """-int_{u <= c sqrt(t1) - x} phi(u) V(x + u, t1) du, or NaN when the
    range leaves the table.

    Since E V(x + X, t + 1) = V(x, t) for unclipped V, this equals the
    Gaussian drift at any x above the curve, without cancellation.  The
    integrand behaves like a normal density in u with variance
    t1 / (t1 - 1) centred at x / (t1 - 1), which sets the lower limit.
    """
    hi = tab[2] * math.sqrt(t1) - x
    sig = math.sqrt(t1 / (t1 - 1.0))
    mid = x / (t1 - 1.0)
    s = max((mid - hi) / sig, 0.0)
    lo = mid - sig * math.sqrt(s * s + 64.0)
    if lo >= hi:
        return 0.0
    integer = tab[0] == 0.0
    rt = math.sqrt(t1)
    if not integer and (x + lo) / rt < tab[3]:
        return math.nan
    n_pan = max(1, int(math.ceil((hi - lo) / GAUSS_COMP_PANEL)))
    h = (hi - lo) / n_pan
    acc = 0.0
    for i in range(n_pan):
        m = lo + (i + 0.5) * h
        for j in range(glx.shape[0]):
            u = m + 0.5 * h * glx[j]
            if integer:
                v = v_eval(tab, x + u, t1)
            else:
                v = psi_tab(tab, (x + u) / rt)
            acc += glw[j] * math.exp(-0.5 * u * u) * v
    scale = 1.0 if integer else t1 ** (0.5 * tab[1])
    return -acc * scale * 0.5 * h * _INV_SQRT_2PI


@nb.njit(cache=True)
def drift(tab, kind, params, vals, probs, glx, glw, x, y):
    """f(x, y) = E Vbar(x + X, y + 1) - Vbar(x, y)."""
    if kind == GAUSSIAN and y >= 1.0:
        if x - tab[2] * math.sqrt(y) > GAUSS_FAR:
            return 0.0
        if y + 1.0 >= GAUSS_COMP_T and x > tab[2] * math.sqrt(y):
            f = _gauss_killed(tab, x, y + 1.0, glx, glw)
            if not math.isnan(f):
                return f
    return expect_next(tab, kind, params, vals, probs, glx, glw, x, y) - v_clipped(tab, x, y)


@nb.njit(cache=True)
def drift_many(tab, kind, params, vals, probs, glx, glw, x, y, out):
    for i in range(x.shape[0]):
        out[i] = drift(tab, kind, params, vals, probs, glx, glw, x[i], y[i])


@nb.njit(parallel=True, cache=True)
def decomp_sums(tab, kind, params, vals, cum, probs, glx, glw, c, starts, b, n_max,
                seed, base, n_paths, sums, alive, ck, abs_ck):
    """Drift path sums from each start point, common random numbers across starts.

    sums[j, r]   = sum of f(a_j + S(k), b + k) over k < min(T, n_max)
    alive[j, r]  = 1 when path r from start j is still alive after n_max steps
    abs_ck[j, r, i] = running sum of |f_k| over k < min(T, ck[i])
    """
    n_chunks = (n_paths + CHUNK - 1) // CHUNK
    n_start = starts.shape[0]
    n_ck = ck.shape[0]
    for ch in nb.prange(n_chunks):
        buf = np.zeros(4, dtype=np.uint64)
        state = np.empty(1, dtype=np.int64)
        r_end = min(n_paths, (ch + 1) * CHUNK)
        for r in range(ch * CHUNK, r_end):
            k1 = np.uint64(base + r)
            for j in range(n_start):
                state[0] = -1
                x = starts[j]
                s = 0.0
                sa = 0.0
                i_ck = 0
                live = True
                for k in range(n_max):
                    while i_ck < n_ck and ck[i_ck] == k:
                        abs_ck[j, r, i_ck] = sa
                        i_ck += 1
                    fk = drift(tab, kind, params, vals, probs, glx, glw, x, b + k)
                    s += fk
                    sa += abs(fk)
                    x += draw(kind, params, vals, cum, seed, k1, k, buf, state)
                    if x <= c * math.sqrt(b + k + 1.0):
                        live = False
                        break
                while i_ck < n_ck:
                    abs_ck[j, r, i_ck] = sa
                    i_ck += 1
                sums[j, r] = s
                alive[j, r] = 1 if live else 0
