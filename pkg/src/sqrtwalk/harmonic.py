"""The space-time harmonic function W(a, b) of the killed walk.

W is reached two ways:

* direct limit: W_n(a, b) = E[V(a + S(n), b + n); T > n] on a doubling
  grid of n until successive values agree,
* drift decomposition: with f(x, y) = E Vbar(x + X, y + 1) - Vbar(x, y),
  optional stopping of the martingale Vbar(a + S(k), b + k) - sum_{j<k} f_j
  gives W_n(a, b) = Vbar(a, b) + E sum_{k < min(T, n)} f(a + S(k), b + k).

Both are unbiased for the same finite-horizon quantity W_n, which is what
makes the finite-horizon harmonicity check below exact in expectation.
The module also audits the supermartingale corrections h and g and
estimates the tail constant kappa(c).
"""

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate, interpolate

from . import _hkernels, _kernels
from .exponent_solver import c_of_p, p_of_c
from .mc_engine import (DEFAULT_BATCH, MIN_SURVIVORS, _batches, _seed,
                        estimate_survival, fit_tail_exponent)
from .special_fn import DEFAULT_QUAD, SpaceTimePoint, eval_V, eval_V_clipped
from .vtable import build_table, clipped_values
from .walk_model import Boundary, survival_measures

GL_X, GL_W = legendre.leggauss(16)
PLATEAU_TOL = 1e-3
N_START = 1024
N_CAP = 16384
BIAS_LIMIT = 0.01
AUDIT_TOL = 1e-8
HARMONIC_HORIZON = 256
HARMONIC_NODES = 32
GAUSS_FAR_SCALAR = 6.0


class PlateauWarning(UserWarning):
    pass


class MomentError(ValueError):
    """The step law lacks the moment needed for E Vbar(x + X, y + 1)."""


class GridTooCoarseError(RuntimeError):
    pass


class SearchExhaustedError(RuntimeError):
    pass


@dataclass(frozen=True)
class WEstimate:
    a: float
    b: float
    value: float
    stderr: float
    method: str
    n_used: int
    trials: int = 0
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError("stderr must be nonnegative")
        if self.method not in ("direct_limit", "drift_decomposition"):
            raise ValueError(f"unknown method {self.method!r}")

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DriftValue:
    x: float
    y: float
    value: float
    est_error: float

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class AuditConfig:
    """Correction h (p1 > 1) or g (p1 <= 1) for the auxiliary exponent p1.

    ``c`` is the boundary coefficient whose exponent p(c) bounds p1.
    """

    c: float
    p1: float
    delta: float
    C: float
    R: float
    gamma: float

    def __post_init__(self):
        pc = p_of_c(self.c).value
        if not 0 < self.p1 < pc:
            raise ValueError(f"need 0 < p1 < p(c) = {pc}, got {self.p1}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.C < 0 or not self.R > 0:
            raise ValueError("need C >= 0 and R > 0")

    @property
    def form(self):
        return "h" if self.p1 > 1 else "g"

    @property
    def c_p1(self):
        return c_of_p(self.p1).value

    def as_dict(self):
        d = asdict(self)
        d["form"] = self.form
        return d


@dataclass(frozen=True)
class KappaEstimate:
    c: float
    value: float
    stderr: float
    n_grid: list
    per_n: list = field(default_factory=list)
    converged: bool = True
    trend_z: float = 0.0
    w: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("kappa estimate must be positive")

    def as_dict(self):
        return asdict(self)


# ----------------------------------------------------------------------
# model setup


class _Model:
    """Exponent, V table and kernel arguments for one (c, law) pair."""

    def __init__(self, c, dist):
        self.c = float(c)
        self.dist = dist
        self.p = p_of_c(self.c).value
        if not dist.abs_moment_finite(self.p):
            raise MomentError(
                f"E|X|^{self.p:.4g} is infinite for {dist.kind}(beta={dist.beta}); "
                "the drift of V is undefined")
        self.tab = build_table(self.p, self.c)
        code, params, vals, cum = dist.kernel_spec()
        self.code = code
        self.params = params
        self.vals = vals
        self.cum = cum
        self.probs = np.ones(1)
        if dist.kind == "finite_discrete":
            self.probs = np.asarray(dist.probs, float)

    def vbar(self, x, t):
        return clipped_values(self.tab, x, t)

    def drift(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        xf = np.ascontiguousarray(x.ravel())
        yf = np.ascontiguousarray(y.ravel())
        out = np.empty_like(xf)
        _hkernels.drift_many(self.tab, self.code, self.params, self.vals, self.probs,
                             GL_X, GL_W, xf, yf, out)
        return out.reshape(x.shape)


_MODELS = {}


def model(c, dist):
    key = (float(c), dist)
    m = _MODELS.get(key)
    if m is None:
        m = _MODELS[key] = _Model(c, dist)
    return m


# ----------------------------------------------------------------------
# drift


def _density(dist):
    if dist.kind == "gaussian":
        return lambda u: math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi), -math.inf, math.inf
    if dist.kind == "uniform":
        r = math.sqrt(3.0)
        return lambda u: 0.5 / r, -r, r
    s, beta = dist.sigma, dist.beta
    return (lambda u: 0.5 * beta * s ** beta * abs(u) ** (-beta - 1) if abs(u) >= s else 0.0,
            -math.inf, math.inf)


def expect_scalar(fun, dist, kinks=(), cfg=DEFAULT_QUAD):
    """(E fun(X), error estimate): exact sums for atoms, adaptive quadrature
    otherwise.  ``kinks`` are points where ``fun`` is not smooth."""
    if dist.is_discrete:
        v, q = dist.atoms()
        return float(sum(qi * fun(vi) for vi, qi in zip(v, q))), 0.0
    dens, lo, hi = _density(dist)
    cuts = sorted({float(k) for k in kinks if lo < k < hi})
    if dist.kind == "sym_pareto":
        cuts = sorted(set(cuts) | {-dist.sigma, dist.sigma})
    edges = [lo] + cuts + [hi]
    total, err = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for u0, u1 in zip(edges[:-1], edges[1:]):
            if dist.kind == "sym_pareto" and u0 >= -dist.sigma and u1 <= dist.sigma:
                continue
            val, e = integrate.quad(lambda u: fun(u) * dens(u), u0, u1,
                                    epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=200)
            total += val
            err += e
    return total, err


def drift_f(x, y, dist, c, cfg=DEFAULT_QUAD):
    """f(x, y) = E Vbar_{p(c)}(x + X, y + 1) - Vbar_{p(c)}(x, y).

    Finite sums for atomic laws; adaptive quadrature against the density
    otherwise.  Unclipped V is an exact martingale for Gaussian steps when
    y > 0, so far from the curve f is computed as minus the clipped-away
    mass, which avoids cancellation between two nearly equal numbers.
    """
    if y < 0:
        raise ValueError("need y >= 0")
    pc = p_of_c(c).value
    if not dist.abs_moment_finite(pc):
        raise MomentError(f"E|X|^{pc:.4g} is infinite for {dist.kind}(beta={dist.beta})")
    lim = c * math.sqrt(y + 1.0) - x
    if dist.kind == "gaussian" and y > 0 and x - c * math.sqrt(y) > GAUSS_FAR_SCALAR:
        dens = _density(dist)[0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(
                lambda u: eval_V(pc, SpaceTimePoint(x + u, y + 1.0), cfg) * dens(u),
                lim - 15.0, lim, epsabs=0.0, epsrel=cfg.rel_tol, limit=200)
        return DriftValue(float(x), float(y), float(-val), float(err))
    here = eval_V_clipped(pc, SpaceTimePoint(x, y), cfg, c=c)
    ev, err = expect_scalar(
        lambda u: eval_V_clipped(pc, SpaceTimePoint(x + u, y + 1.0), cfg, c=c),
        dist, kinks=(lim,), cfg=cfg)
    return DriftValue(float(x), float(y), float(ev - here),
                      float(err + 4 * np.finfo(float).eps * abs(here)))


# ----------------------------------------------------------------------
# W estimators


def _check_start(a, b, c):
    Boundary(float(c), float(a), float(b))


def _direct_paths(m, a, b, checkpoints, trials, seed, batch=DEFAULT_BATCH):
    """Per-path V(a + S(n), b + n) 1{T > n} for each checkpoint n (trials x k)."""
    code, params, vals, cum = m.dist.kernel_spec()
    ck = np.asarray(checkpoints, dtype=np.int64)
    res = np.empty((trials, ck.size))
    pos = np.empty((min(batch, trials), ck.size))
    for start, size in _batches(trials, batch):
        view = pos[:size]
        _kernels.positions_at(code, params, vals, cum, m.c, float(a), float(b), ck,
                              np.uint64(seed.master_seed),
                              np.uint64((seed.base + start) % 2**64), size, view)
        alive = ~np.isnan(view)
        vals_v = np.zeros_like(view)
        t = np.broadcast_to(float(b) + ck.astype(float), view.shape)
        vals_v[alive] = m.vbar(view[alive], t[alive])
        res[start:start + size] = vals_v
    return res


def estimate_W_direct(a, b, dist, c, trials, seed, plateau_tol=PLATEAU_TOL,
                      n_start=N_START, n_cap=N_CAP):
    """W(a, b) as the plateau of W_n on the doubling grid n_start, 2 n_start, ...

    Stops at the first n with |W_2n - W_n| <= max(plateau_tol |W_2n|,
    2 se), se being the standard error of the paired per-path difference.
    ``n_start = 0`` with ``n_cap = 0`` returns V(a, b) exactly.
    """
    _check_start(a, b, c)
    seed = _seed(seed)
    m = model(c, dist)
    trials = int(trials)
    if trials < 2:
        raise ValueError("need at least 2 trials")
    if n_cap == 0:
        v = float(m.vbar(float(a), float(b)))
        return WEstimate(float(a), float(b), v, 0.0, "direct_limit", 0, trials,
                         {"plateau_reached": True})
    grid = [int(n_start)]
    while grid[-1] < n_cap:
        grid.append(min(2 * grid[-1], int(n_cap)))
    per = _direct_paths(m, a, b, grid, trials, seed)
    means = per.mean(axis=0)
    ses = per.std(axis=0, ddof=1) / math.sqrt(trials)
    history = [{"n": n, "value": float(mu), "stderr": float(se)}
               for n, mu, se in zip(grid, means, ses)]
    for i in range(len(grid) - 1):
        diff = per[:, i + 1] - per[:, i]
        se_d = diff.std(ddof=1) / math.sqrt(trials)
        if abs(means[i + 1] - means[i]) <= max(plateau_tol * abs(means[i + 1]), 2 * se_d):
            return WEstimate(float(a), float(b), float(means[i + 1]), float(ses[i + 1]),
                             "direct_limit", grid[i + 1], trials,
                             {"plateau_reached": True, "history": history})
    warnings.warn(f"W_n plateau not reached by n={grid[-1]}", PlateauWarning, stacklevel=2)
    return WEstimate(float(a), float(b), float(means[-1]), float(ses[-1]), "direct_limit",
                     grid[-1], trials, {"plateau_reached": False, "history": history})


def _decomp_paths(m, starts, b, n_max, trials, seed, checkpoints=()):
    """Per-path W-samples Vbar(start, b) + drift sum, CRN across starts."""
    starts = np.ascontiguousarray(np.atleast_1d(np.asarray(starts, float)))
    ck = np.asarray(checkpoints, dtype=np.int64)
    sums = np.empty((starts.size, trials))
    alive = np.empty((starts.size, trials), dtype=np.int8)
    abs_ck = np.empty((starts.size, trials, ck.size))
    _hkernels.decomp_sums(m.tab, m.code, m.params, m.vals, m.cum, m.probs, GL_X, GL_W,
                          m.c, starts, float(b), int(n_max), np.uint64(seed.master_seed),
                          np.uint64(seed.base), trials, sums, alive, ck, abs_ck)
    v0 = m.vbar(starts, np.full(starts.size, float(b)))
    return sums + v0[:, None], alive, abs_ck


def default_n_max(a):
    return int(100 * (1 + a * a))


def estimate_W_decomp(a, b, dist, c, trials, seed, n_max=None):
    """W(a, b) = Vbar(a, b) + E sum_{k<T} f(a + S(k), b + k), paths capped at n_max.

    Capped paths keep their partial sum; more than 1% capped paths sets
    the ``biased`` flag.
    """
    _check_start(a, b, c)
    seed = _seed(seed)
    m = model(c, dist)
    trials = int(trials)
    if trials < 2:
        raise ValueError("need at least 2 trials")
    n_max = default_n_max(a) if n_max is None else int(n_max)
    samples, alive, _ = _decomp_paths(m, [a], b, n_max, trials, seed)
    s = samples[0]
    capped = float(alive[0].mean())
    flags = {"capped_fraction": capped, "biased": capped > BIAS_LIMIT}
    if flags["biased"]:
        warnings.warn(f"{100 * capped:.2f}% of paths reached n_max={n_max}", PlateauWarning,
                      stacklevel=2)
    return WEstimate(float(a), float(b), float(s.mean()), float(s.std(ddof=1) / math.sqrt(trials)),
                     "drift_decomposition", n_max, trials, flags)


def drift_summability(a, b, dist, c, trials, seed, checkpoints):
    """Mean running sum of |f_k| at each checkpoint, with the mean increment
    between consecutive checkpoints and its standard error."""
    _check_start(a, b, c)
    seed = _seed(seed)
    m = model(c, dist)
    ck = sorted(int(k) for k in checkpoints)
    _, _, abs_ck = _decomp_paths(m, [a], b, ck[-1], int(trials), seed, ck)
    A = abs_ck[0]
    inc = np.diff(A, axis=1)
    return {"checkpoints": ck, "mean_abs_sum": A.mean(axis=0).tolist(),
            "increment": inc.mean(axis=0).tolist(),
            "increment_stderr": (inc.std(axis=0, ddof=1) / math.sqrt(A.shape[0])).tolist()}


# ----------------------------------------------------------------------
# harmonicity


def _killed_density(c, a, b, steps, h=0.02, span=9.0):
    """Sub-density of a + S(steps) on {T > steps} for Gaussian steps.

    Each step is a convolution with the normal density on a grid that
    starts exactly at that step's curve point, so the jump of the killed
    density sits on a grid edge.  Integration uses Simpson weights.
    """
    lo = c * math.sqrt(b + 1.0)
    hi = a + span
    n = int(math.ceil((hi - lo) / h)) + 1
    n += (n + 1) % 2
    y = lo + h * np.arange(n)
    dens = np.exp(-0.5 * (y - a) ** 2) / math.sqrt(2 * math.pi)
    for k in range(2, steps + 1):
        w = _simpson_weights(y.size, y[1] - y[0])
        lo = c * math.sqrt(b + k)
        hi = y[-1] + span
        n = int(math.ceil((hi - lo) / h)) + 1
        n += (n + 1) % 2
        ynew = lo + h * np.arange(n)
        kern = np.exp(-0.5 * (ynew[:, None] - y[None, :]) ** 2) / math.sqrt(2 * math.pi)
        dens = kern @ (w * dens)
        y = ynew
    return y, dens


def _simpson_weights(n, h):
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def verify_harmonicity(a, b, dist, c, trials, seed, steps=1, horizon=HARMONIC_HORIZON,
                       perturb=1.0, nodes=HARMONIC_NODES, grid_trials=None):
    """Compare W_{N+m}(a, b) with E[W_N(a + S(m), b + m); T > m].

    ``m = steps`` and ``N = horizon``.  Both sides are estimated with the
    drift decomposition on independent streams, so the identity holds
    exactly in expectation for every N.  Atomic laws use the exact killed
    distribution after m steps.  Gaussian steps use Gauss-Legendre nodes
    on the support of the killed density with common random numbers
    across nodes.  The same rule applied to E[Vbar(a + S(m), b + m); T > m]
    is compared with a fine-grid value; that gap enters the combined error
    as a systematic term, and a gap above both a tenth of the statistical
    error and 1e-8 relative raises :class:`GridTooCoarseError`.  ``perturb``
    multiplies the right-hand W values (a sensitivity control).
    """
    _check_start(a, b, c)
    seed = _seed(seed)
    m = model(c, dist)
    trials = int(trials)
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be at least 1")
    lhs_s, _, _ = _decomp_paths(m, [a], b, horizon + steps, trials, seed)
    lhs = float(lhs_s[0].mean())
    lhs_se = float(lhs_s[0].std(ddof=1) / math.sqrt(trials))
    report = {"a": float(a), "b": float(b), "c": float(c), "steps": steps, "horizon": horizon,
              "dist": dist.as_dict(), "lhs": lhs, "lhs_stderr": lhs_se, "perturb": perturb}
    b1 = float(b) + steps
    sub = seed.offset(1 << 40)
    if dist.is_discrete:
        bd = Boundary(float(c), float(a), float(b))
        pos, mass = survival_measures(bd, dist, steps)[-1]
        rhs, var = 0.0, 0.0
        for i, (y, q) in enumerate(zip(pos, mass)):
            s, _, _ = _decomp_paths(m, [y], b1, horizon, trials, sub.offset(i * trials))
            rhs += q * perturb * s[0].mean()
            var += (q * perturb) ** 2 * s[0].var(ddof=1) / trials
        rhs_se = math.sqrt(var)
        report["endpoints"] = len(pos)
    else:
        if dist.kind != "gaussian":
            raise NotImplementedError("continuous harmonicity check supports Gaussian steps")
        yk, dens = _killed_density(float(c), float(a), float(b), steps)
        fine = _simpson_weights(yk.size, yk[1] - yk[0]) * dens
        # Gauss-Legendre nodes only where the density is not negligible
        live = np.flatnonzero(dens > 1e-18 * dens.max())
        y0, y1 = yk[live[0]], yk[live[-1]]
        gx, gw = legendre.leggauss(int(nodes))
        ynod = y0 + 0.5 * (y1 - y0) * (gx + 1.0)
        wnod = 0.5 * (y1 - y0) * gw * interpolate.CubicSpline(yk, dens)(ynod)

        def vb(y):
            return m.vbar(y, np.full(np.size(y), b1))

        ref = float(fine @ vb(yk))
        quad_gap = abs(float(wnod @ vb(ynod)) - ref)
        gt = int(grid_trials or trials)
        s, _, _ = _decomp_paths(m, ynod, b1, horizon, gt, sub)
        per = perturb * (wnod @ s)
        rhs = float(per.mean())
        rhs_se = float(per.std(ddof=1) / math.sqrt(gt))
        report.update(nodes=int(nodes), killed_mass=float(fine.sum()), quad_gap=quad_gap)
        if quad_gap > max(0.1 * math.hypot(lhs_se, rhs_se), 1e-8 * abs(ref)):
            raise GridTooCoarseError(
                f"{nodes}-node rule misses E[Vbar; T > m] by {quad_gap:.3g}, "
                f"not small against the statistical error; raise nodes")
    comb = math.sqrt(lhs_se ** 2 + rhs_se ** 2 + report.get("quad_gap", 0.0) ** 2)
    disc = lhs - rhs
    z = disc / comb if comb > 0 else (0.0 if disc == 0 else math.inf)
    report.update(rhs=float(rhs), rhs_stderr=float(rhs_se), discrepancy=float(disc),
                  combined_stderr=float(comb), z=float(z), passed=bool(abs(z) <= 3.0))
    return report


# ----------------------------------------------------------------------
# supermartingale audit


class _Correction:
    def __init__(self, cfg):
        self.cfg = cfg
        self.cp = cfg.c_p1
        self.tab = build_table(cfg.p1, self.cp)
        self.q = cfg.p1 - cfg.delta

    def __call__(self, x, t):
        cfg = self.cfg
        x = np.asarray(x, float)
        t = np.asarray(t, float)
        if cfg.form == "h":
            v = clipped_values(self.tab, x + cfg.R, t)
            corr = cfg.C * np.abs(x + cfg.R) ** self.q
        else:
            v = clipped_values(self.tab, x + cfg.R, t + cfg.R)
            corr = cfg.C * (t + cfg.R) ** (0.5 * self.q)
        return np.maximum(v - corr, 0.0)


def canonical_region(cfg, t_exp_max=16, d_values=None):
    """(x, t) grid: t in {0, 1, 2, 4, ..., 2^t_exp_max}, x = (c(p1)+gamma) sqrt(t) + d."""
    if d_values is None:
        d_values = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0] + [2.0 ** k for k in range(2, 13)]
    ts = [0.0] + [2.0 ** k for k in range(t_exp_max + 1)]
    edge = cfg.c_p1 + cfg.gamma
    pts = [(edge * math.sqrt(t) + d, t) for t in ts for d in d_values]
    # x must stay positive where V(x, 0) = x^p is used
    return [(x, t) for x, t in pts if x + cfg.R > 0]


def audit_supermartingale(cfg, dist, sample_points, tol=AUDIT_TOL):
    """One-step drift of the correction at every sample point.

    PASS when the largest drift is at most ``tol`` and the correction is
    not identically zero on the sample (a zero function passes vacuously).
    """
    pts = np.asarray(sample_points, float).reshape(-1, 2)
    edge = cfg.c_p1 + cfg.gamma
    bad = pts[:, 0] < edge * np.sqrt(pts[:, 1]) - 1e-12
    if np.any(bad):
        x, t = pts[np.argmax(bad)]
        raise ValueError(f"point (x={x}, t={t}) lies below (c(p1)+gamma) sqrt(t) = "
                         f"{edge * math.sqrt(t)}")
    hfun = _Correction(cfg)
    x, t = pts[:, 0], pts[:, 1]
    here = hfun(x, t)
    if dist.is_discrete:
        v, q = dist.atoms()
        nxt = sum(qi * hfun(x + vi, t + 1.0) for vi, qi in zip(v, q))
    else:
        nxt = np.array([expect_scalar(lambda u, xx=xx, tt=tt: float(hfun(xx + u, tt + 1.0)), dist,
                                      kinks=())[0] for xx, tt in zip(x, t)])
    drifts = nxt - here
    i = int(np.argmax(drifts))
    positive = int(np.count_nonzero(here > 0))
    nondegenerate = positive >= max(1, len(pts) // 2)
    return {"config": cfg.as_dict(), "dist": dist.as_dict(), "points": int(len(pts)),
            "max_drift": float(drifts[i]),
            "worst_point": {"x": float(x[i]), "t": float(t[i]), "drift": float(drifts[i]),
                            "tolerance": tol},
            "positive_points": positive, "nondegenerate": bool(nondegenerate),
            "excursions": int(np.count_nonzero(drifts > tol)),
            "passed": bool(drifts[i] <= tol and nondegenerate)}


def search_correction_constants(c, p1, delta, gamma, dist, k_max=20, m_max=20, tol=AUDIT_TOL,
                                allow_unit=False):
    """First (C, R) = (2^k, 2^m), scanned by increasing k + m, whose correction
    passes the audit on the canonical region grid.

    p1 = 1 is excluded unless ``allow_unit`` is set, in which case it is
    handled with the time-power form g.
    """
    if p1 == 1 and not allow_unit:
        raise ValueError("p1 = 1 is excluded; pass allow_unit=True to use the g form")
    if not delta > 0 or not gamma > 0:
        raise ValueError("delta and gamma must be positive")
    for s in range(k_max + m_max + 1):
        for k in range(max(0, s - m_max), min(k_max, s) + 1):
            cfg = AuditConfig(float(c), float(p1), float(delta), 2.0 ** k, 2.0 ** (s - k),
                              float(gamma))
            rep = audit_supermartingale(cfg, dist, canonical_region(cfg), tol)
            if rep["passed"]:
                return cfg.C, cfg.R, rep
    raise SearchExhaustedError(f"no (C, R) with C <= 2^{k_max}, R <= 2^{m_max} passed")


# ----------------------------------------------------------------------
# kappa


def estimate_kappa(c, a, b, dist, n_grid, trials, seed, w=None, w_trials=None, w_n_max=None):
    """kappa(n) = p_hat(n) n^{p(c)/2} / W(a, b), averaged over the top
    half-decade of usable n.

    ``w`` may be a precomputed :class:`WEstimate`; otherwise W is taken
    from the drift decomposition with paths capped at max(n_grid).  A
    trend across the averaged points larger than 3 standard errors marks
    the estimate as not converged.
    """
    _check_start(a, b, c)
    seed = _seed(seed)
    n_grid = sorted(int(n) for n in n_grid)
    pc = p_of_c(c).value
    bd = Boundary(float(c), float(a), float(b))
    curve = estimate_survival(bd, dist, n_grid, trials, seed)
    usable = [e for e in curve if e.survivors >= MIN_SURVIVORS]
    if not usable:
        raise ValueError("fewer than 100 survivors at every n of the grid")
    if w is None:
        w = estimate_W_decomp(a, b, dist, c, int(w_trials or trials), seed.offset(1 << 48),
                              n_max=w_n_max or n_grid[-1])
    per = [{"n": e.n, "kappa": e.p_hat * e.n ** (pc / 2) / w.value,
            "rel_err": e.stderr / e.p_hat} for e in usable]
    n_top = usable[-1].n
    top = [r for r in per if r["n"] >= n_top / math.sqrt(10.0) * (1 - 1e-12)]
    kap = np.array([r["kappa"] for r in top])
    rel = np.array([r["rel_err"] for r in top])
    value = float(np.mean(kap))
    trend_z = 0.0
    converged = True
    if len(top) >= 3:
        fit = fit_tail_exponent([e for e in usable if e.n >= top[0]["n"]], 1)
        trend = fit.slope + pc / 2
        trend_z = trend / fit.slope_stderr if fit.slope_stderr > 0 else 0.0
        converged = abs(trend_z) <= 3.0
    # the averaged points share paths, so their mean error is bounded by
    # the mean of their relative errors rather than shrunk by sqrt(k)
    rel_p = float(np.mean(rel))
    rel_w = w.stderr / w.value
    se = value * math.hypot(rel_p, rel_w)
    return KappaEstimate(float(c), value, float(se), n_grid, per, bool(converged),
                         float(trend_z), w.as_dict())
