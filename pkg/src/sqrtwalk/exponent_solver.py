"""Exponents p(c) (first positive root of p -> psi_p(c)) and c(p) (largest
real zero of psi_p), found by coarse scanning plus bisection."""

import functools
import math
from dataclasses import dataclass

from .special_fn import DEFAULT_QUAD, hermite_e, psi

SCAN_STEP = 0.25
P_MAX = 64.0
DEFAULT_TOL = 1e-10


class ExponentSolveError(RuntimeError):
    def __init__(self, message, scan):
        self.scan = scan
        super().__init__(message)


@dataclass(frozen=True)
class ExponentSolveResult:
    value: float
    bracket_lo: float
    bracket_hi: float
    residual: float
    iterations: int

    def as_dict(self):
        return {"value": self.value, "bracket_lo": self.bracket_lo,
                "bracket_hi": self.bracket_hi, "residual": self.residual,
                "iterations": self.iterations}


def _bisect(fun, lo, hi, flo, tol):
    """Bisect until the bracket is narrower than ``tol`` and |f(mid)| <= tol
    (or the bracket cannot shrink further in floating point)."""
    it = 0
    while True:
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        it += 1
        if fm == 0.0:
            return mid, lo, hi, 0.0, it
        if (hi - lo <= tol and abs(fm) <= tol) or not lo < mid < hi:
            return mid, lo, hi, abs(fm), it
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid


def _result(root, lo, hi, res, it, tol, snap):
    # an exact root landing on a midpoint leaves a zero-width bracket
    if not lo < root < hi:
        lo, hi = root - 0.5 * tol, root + 0.5 * tol
    if snap is not None:
        root, res = snap(root, lo, hi, res)
    return ExponentSolveResult(float(root), float(lo), float(hi), float(res), int(it))


@functools.lru_cache(maxsize=256)
def p_of_c(c, tol=DEFAULT_TOL):
    """Smallest p > 0 with psi_p(c) = 0."""
    c = float(c)
    if not math.isfinite(c):
        raise ValueError("c must be finite")
    if not tol > 0:
        raise ValueError("tol must be positive")

    def fun(p):
        return psi(p, c, DEFAULT_QUAD)

    lo = tol
    flo = fun(lo)
    scan = [(lo, flo)]
    k = 0
    while True:
        k += 1
        hi = tol + k * SCAN_STEP
        if hi > P_MAX:
            raise ExponentSolveError(
                f"no sign change of psi_p({c}) for p up to {P_MAX}", scan)
        fhi = fun(hi)
        scan.append((hi, fhi))
        if fhi == 0.0:
            return ExponentSolveResult(hi, hi - 0.5 * tol, hi + 0.5 * tol, 0.0, len(scan))
        if (fhi > 0) != (flo > 0):
            break
        lo, flo = hi, fhi

    root, blo, bhi, res, it = _bisect(fun, lo, hi, flo, tol)

    def snap(r, blo, bhi, res):
        # when the bracket holds an integer order with an exact Hermite zero,
        # report that integer
        n = round(r)
        if n >= 1 and blo <= n <= bhi and abs(hermite_e(n, c)) <= res:
            return float(n), abs(hermite_e(n, c))
        return r, res

    return _result(root, blo, bhi, res, it + len(scan), tol, snap)


@functools.lru_cache(maxsize=256)
def c_of_p(p, tol=DEFAULT_TOL):
    """Largest real zero of psi_p."""
    p = float(p)
    if not (math.isfinite(p) and tol > 0):
        raise ValueError("p must be finite and tol positive")
    if p <= 0:
        raise ValueError(f"psi_p has no real zero for p <= 0 (p={p})")

    def fun(x):
        return psi(p, x, DEFAULT_QUAD)

    hi = 2.0 * math.sqrt(p) + 4.0
    x_lo = -(2.0 * math.sqrt(abs(p)) + 8.0)
    fhi = fun(hi)
    scan = [(hi, fhi)]
    while True:
        lo = hi - SCAN_STEP
        if lo < x_lo:
            raise ExponentSolveError(f"no zero of psi_{p} above {x_lo}", scan)
        flo = fun(lo)
        scan.append((lo, flo))
        if flo == 0.0:
            return ExponentSolveResult(lo, lo - 0.5 * tol, lo + 0.5 * tol, 0.0, len(scan))
        if (flo > 0) != (fhi > 0):
            break
        hi, fhi = lo, flo

    root, blo, bhi, res, it = _bisect(fun, lo, hi, flo, tol)

    def snap(r, blo, bhi, res):
        if abs(r) < tol and blo <= 0.0 <= bhi and abs(fun(0.0)) <= res:
            return 0.0, abs(fun(0.0))
        return r, res

    return _result(root, blo, bhi, res, it + len(scan), tol, snap)
