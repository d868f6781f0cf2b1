"""Scalar evaluation of psi_p(x) = exp(x^2/4) D_p(x) and the space-time
functions V_p(x, t) = t^(p/2) psi_p(x / sqrt(t)).

Three evaluation routes are used:

* nonnegative integer ``p``: the probabilists' Hermite polynomial He_p,
* ``p < 0``: the Laplace-type integral
  ``psi_p(x) = Gamma(-p)^-1 int_0^inf exp(-x s - s^2/2) s^(-p-1) ds``,
* other ``p > 0``: two base values at exponents in [-2, 0) lifted with the
  three-term recurrence ``psi_p = x psi_{p-1} + (1-p) psi_{p-2}``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

INTEGER_TOL = 1e-12
SMALL_ORDER = 0.05
_EPS = float(np.finfo(float).eps)


class PsiRangeError(ArithmeticError):
    """A value fell outside the double range."""

    def __init__(self, p, x, t=None):
        self.p, self.x, self.t = p, x, t
        where = f"p={p!r}, x={x!r}" + ("" if t is None else f", t={t!r}")
        super().__init__(f"value out of floating range at {where}")


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message, achieved_error):
        self.achieved_error = achieved_error
        super().__init__(f"{message} (achieved error estimate {achieved_error:.3e})")


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    tail_eps: float = 1e-16
    max_refinements: int = 30

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.tail_eps > 0):
            raise ValueError("quadrature tolerances must be positive")
        if int(self.max_refinements) < 1:
            raise ValueError("max_refinements must be at least 1")


DEFAULT_QUAD = QuadratureConfig()


@dataclass(frozen=True)
class SpaceTimePoint:
    x: float
    t: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.t)):
            raise ValueError("space-time point must be finite")
        if self.t < 0:
            raise ValueError(f"time must be nonnegative, got t={self.t}")


@dataclass(frozen=True)
class PsiValue:
    value: float
    est_error: float


def is_integer_order(p):
    return abs(p - round(p)) < INTEGER_TOL


def hermite_e(n, x):
    """He_n(x) by the upward three-term recurrence."""
    if n == 0:
        return 1.0
    h0, h1 = 1.0, float(x)
    for k in range(1, n):
        h0, h1 = h1, x * h1 - k * h0
    return h1


def _hermite_scale(n, ax):
    # sum of |coefficient| * |x|^k, the rounding scale of He_n(x)
    g0, g1 = 1.0, ax
    if n == 0:
        return 1.0
    for k in range(1, n):
        g0, g1 = g1, ax * g1 + k * g0
    return g1


def _quad(fun, lo, hi, cfg, points=None, what="psi"):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(fun, lo, hi, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                             limit=5 * int(cfg.max_refinements),
                             points=points, full_output=1)
    val, err = out[0], out[1]
    # a flagged result is still accepted at the requested or round-off level
    if len(out) > 3 and not err <= 10 * max(cfg.abs_tol, (cfg.rel_tol + 1e3 * _EPS) * abs(val)):
        raise QuadratureError(f"quadrature for {what} did not converge", abs(err))
    return val, err


def _psi_negative(q, x, cfg):
    """Integral representation for q < 0."""
    a = -q
    inv_a = 1.0 / a

    # (0, 1): s = u^(1/a) turns s^(a-1) ds into du / a.
    def head(u):
        s = u ** inv_a
        return math.exp(-x * s - 0.5 * s * s)

    points = None
    if x > 1.0:
        # mass concentrates near s ~ 1/x; give the integrator a hint
        pts = sorted({min(1.0, k / x) ** a for k in (1.0, 4.0, 16.0)} - {1.0})
        points = pts or None
    r = special.rgamma(a)
    if a < SMALL_ORDER:
        # u = s^a is too stiff for tiny a; subtract the unit part instead, whose
        # integral s^(a-1) over (0, 1) is 1/a and pairs with 1/Gamma(a)
        def head_rem(s):
            return s ** (a - 1.0) * math.expm1(-x * s - 0.5 * s * s)

        pts = None if points is None else [u ** inv_a for u in points]
        v0, e0 = _quad(head_rem, 0.0, 1.0, cfg, points=pts)
        v0 += inv_a
    else:
        v0, e0 = _quad(head, 0.0, 1.0, cfg, points=points)
        v0 *= inv_a
        e0 *= inv_a

    # (1, S): truncate once the integrand is below tail_eps (relative to its peak if > 1)
    def logf(s):
        return -x * s - 0.5 * s * s + (a - 1.0) * math.log(s)

    disc = x * x + 4.0 * (a - 1.0)
    s_peak = 1.0
    if disc >= 0:
        root = 0.5 * (-x + math.sqrt(disc))
        s_peak = max(1.0, root)
    peak = logf(s_peak)
    log_thr = math.log(cfg.tail_eps) + max(0.0, peak)
    step = 1.0
    s_hi = s_peak + step
    while logf(s_hi) >= log_thr:
        step *= 2.0
        s_hi = s_peak + step
    v1, e1 = 0.0, 0.0
    if logf(1.0) >= log_thr or s_peak > 1.0:
        shift = max(0.0, peak)

        def tail(s):
            return math.exp(logf(s) - shift)

        pts = [s_peak] if 1.0 < s_peak < s_hi else None
        v1, e1 = _quad(tail, 1.0, s_hi, cfg, points=pts)
        scale = math.exp(shift)
        v1 *= scale
        e1 *= scale
    val = (v0 + v1) * r
    err = (e0 + e1) * abs(r) + math.exp(log_thr) * abs(r)
    return val, err


def _psi_lifted(p, x, cfg):
    """Non-integer p > 0 (or forced): recurrence from base exponents in [-2, 0)."""
    k = math.floor(p) + 2
    q0 = p - k
    if q0 >= -1.0:  # guard against rounding in floor
        k += 1
        q0 -= 1.0
    # the recurrence can cancel a couple of digits for negative x, so the
    # base values are computed tighter than the caller's target
    base = QuadratureConfig(rel_tol=max(cfg.rel_tol * 1e-3, 1e-13),
                            abs_tol=max(cfg.abs_tol * 1e-3, 1e-300),
                            tail_eps=cfg.tail_eps * 1e-3,
                            max_refinements=cfg.max_refinements)
    f0, e0 = _psi_negative(q0, x, base)
    f1, e1 = _psi_negative(q0 + 1.0, x, base)
    q = q0 + 1.0
    for _ in range(k - 1):
        # psi_{q+1} = x psi_q - q psi_{q-1}
        f0, f1 = f1, x * f1 - q * f0
        e0, e1 = e1, abs(x) * e1 + abs(q) * e0
        q += 1.0
    return f1, e1


def eval_psi(p, x, cfg=DEFAULT_QUAD, *, route="auto"):
    """psi_p(x) with an error estimate.

    ``route`` may be ``"auto"`` or ``"recurrence"``; the latter forces the
    base-exponent recurrence even for integer ``p`` (used to cross-check the
    Hermite route).
    """
    p = float(p)
    x = float(x)
    if not (math.isfinite(p) and math.isfinite(x)):
        raise ValueError(f"psi requires finite arguments, got p={p}, x={x}")
    if route not in ("auto", "recurrence"):
        raise ValueError(f"unknown route {route!r}")
    if route == "auto" and is_integer_order(p) and round(p) >= 0:
        n = int(round(p))
        val = hermite_e(n, x)
        err = _EPS * (n + 1) * _hermite_scale(n, abs(x))
    elif p < 0 and route == "auto":
        val, err = _psi_negative(p, x, cfg)
    else:
        if p < 0:
            val, err = _psi_negative(p, x, cfg)
        else:
            val, err = _psi_lifted(p, x, cfg)
    if not math.isfinite(val):
        raise PsiRangeError(p, x)
    return PsiValue(float(val), float(abs(err)))


def psi(p, x, cfg=DEFAULT_QUAD):
    """Plain float psi_p(x)."""
    return eval_psi(p, x, cfg).value


def _as_point(pt, t=None):
    if isinstance(pt, SpaceTimePoint):
        return pt
    if t is None:
        pt, t = pt
    return SpaceTimePoint(float(pt), float(t))


def eval_V(p, pt, cfg=DEFAULT_QUAD):
    """V_p(x, t) = t^(p/2) psi_p(x / sqrt t); V_p(x, 0) = x^p for x > 0."""
    pt = _as_point(pt)
    x, t = pt.x, pt.t
    if t == 0.0:
        if x <= 0:
            raise ValueError(f"V_p(x, 0) needs x > 0, got x={x}")
        try:
            val = x ** p
        except OverflowError:
            raise PsiRangeError(p, x, t) from None
    else:
        if is_integer_order(p) and round(p) >= 0:
            val = _v_integer(int(round(p)), x, t)
        else:
            rt = math.sqrt(t)
            val = t ** (0.5 * p) * eval_psi(p, x / rt, cfg).value
    if not math.isfinite(val):
        raise PsiRangeError(p, x, t)
    return float(val)


def _v_integer(n, x, t):
    # V_{k+1} = x V_k - k t V_{k-1}, the Hermite recurrence in homogeneous form
    if n == 0:
        return 1.0
    v0, v1 = 1.0, x
    for k in range(1, n):
        v0, v1 = v1, x * v1 - k * t * v0
    return v1


def eval_V_clipped(p, pt, cfg=DEFAULT_QUAD, *, c=None):
    """V_p above the curve x = c(p) sqrt(t), zero below.

    ``c`` may be passed when c(p) is already known.
    """
    pt = _as_point(pt)
    if c is None:
        from .exponent_solver import c_of_p

        c = c_of_p(p).value
    x, t = pt.x, pt.t
    if x < c * math.sqrt(t):
        return 0.0
    if t == 0.0 and x == 0.0:
        return 0.0
    return eval_V(p, pt, cfg)


def dV_dx(p, pt, cfg=DEFAULT_QUAD):
    """p V_{p-1}(x, t)."""
    pt = _as_point(pt)
    if pt.t <= 0:
        raise ValueError("dV_dx is evaluated at t > 0 only")
    if p == 0:
        return 0.0
    return p * eval_V(p - 1.0, pt, cfg)


def dV_dt(p, pt, cfg=DEFAULT_QUAD):
    """-p (p - 1) V_{p-2}(x, t) / 2."""
    pt = _as_point(pt)
    if pt.t <= 0:
        raise ValueError("dV_dt is evaluated at t > 0 only")
    k = p * (p - 1.0)
    if k == 0:
        return 0.0
    return -0.5 * k * eval_V(p - 2.0, pt, cfg)
