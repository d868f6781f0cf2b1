"""Monte Carlo survival curves, local probabilities and tail-exponent fits."""

import math
from dataclasses import asdict, dataclass

import numba as nb
import numpy as np

from . import _kernels
from .rng import SeedSpec

DEFAULT_BATCH = 1 << 20
MIN_SURVIVORS = 100


def set_threads(threads):
    """Use up to ``threads`` workers in compiled kernels (a hint only)."""
    if threads is None:
        return
    nb.set_num_threads(max(1, min(int(threads), nb.config.NUMBA_NUM_THREADS)))


@dataclass(frozen=True)
class SurvivalEstimate:
    n: int
    survivors: int
    trials: int
    p_hat: float
    stderr: float

    @classmethod
    def from_counts(cls, n, survivors, trials):
        p = survivors / trials
        return cls(int(n), int(survivors), int(trials), p, math.sqrt(p * (1.0 - p) / trials))

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TailFit:
    slope: float
    intercept: float
    slope_stderr: float
    n_range: tuple
    points: int = 0
    naive_stderr: float = float("nan")

    def as_dict(self):
        d = asdict(self)
        d["n_range"] = list(self.n_range)
        return d


@dataclass(frozen=True)
class LocalProbEstimate:
    n: int
    bin_lo: float
    bin_width: float
    p_hat: float
    stderr: float
    count: int = 0
    trials: int = 0

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValueError("bin width must be positive")

    def as_dict(self):
        return asdict(self)


def _seed(seed):
    return seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))


def _batches(trials, batch):
    start = 0
    while start < trials:
        size = min(batch, trials - start)
        yield start, size
        start += size


def exit_time_histogram(bd, dist, horizon, trials, seed, batch=DEFAULT_BATCH):
    """Counts of T = 1..horizon (index n) with index horizon+1 for survivors."""
    seed = _seed(seed)
    code, params, vals, cum = dist.kernel_spec()
    counts = np.zeros(horizon + 2, dtype=np.int64)
    out = np.empty(min(batch, trials), dtype=np.int64)
    for start, size in _batches(trials, batch):
        view = out[:size]
        _kernels.exit_times(code, params, vals, cum, float(bd.c), float(bd.a), float(bd.b),
                            int(horizon), np.uint64(seed.master_seed),
                            np.uint64((seed.base + start) % 2**64), size, view)
        counts += np.bincount(view, minlength=horizon + 2)
    return counts


def estimate_survival(bd, dist, horizons, trials, seed, batch=DEFAULT_BATCH):
    """P(T > n) for each n in ``horizons`` from one pass per path.

    Each path is run to max(horizons) and only its exit time is kept, so
    the estimates are exactly nested.
    """
    horizons = [int(h) for h in horizons]
    if int(trials) < 1:
        raise ValueError("trials must be at least 1")
    if not horizons:
        raise ValueError("horizons must be non-empty")
    if any(h < 1 for h in horizons) or any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("horizons must be positive and strictly increasing")
    trials = int(trials)
    counts = exit_time_histogram(bd, dist, horizons[-1], trials, seed, batch)
    # survivors beyond n = number of exit times > n
    beyond = trials - np.cumsum(counts)
    return [SurvivalEstimate.from_counts(h, int(beyond[h]), trials) for h in horizons]


def fit_tail_exponent(curve, n_min, n_max=None, min_survivors=MIN_SURVIVORS):
    """Weighted least squares of log p_hat on log n.

    Only points with n_min <= n <= n_max and at least ``min_survivors``
    survivors are used; weights are (p_hat / stderr)^2.  Survival counts at
    different n come from the same paths and are positively correlated,
    so the reported ``slope_stderr`` is the sandwich error under the exact
    nested-binomial covariance Cov(log p_i, log p_j) = (1 - p_i)/(N p_i)
    for n_i <= n_j.  ``naive_stderr`` is the textbook independent-point
    value, kept for reference.
    """
    pts = [e for e in curve
           if e.n >= n_min and (n_max is None or e.n <= n_max)
           and e.p_hat > 0 and e.survivors >= min_survivors]
    pts.sort(key=lambda e: e.n)
    if len(pts) < 3:
        raise ValueError(f"need at least 3 usable points, have {len(pts)}")
    x = np.log([e.n for e in pts])
    y = np.log([e.p_hat for e in pts])
    rel = np.array([e.stderr / e.p_hat if e.stderr > 0 else 0.0 for e in pts])
    if np.any(rel == 0):
        # exact curves carry no noise; fall back to equal weights
        w = np.ones_like(x)
    else:
        w = 1.0 / rel ** 2
    X = np.column_stack([np.ones_like(x), x])
    XtW = X.T * w
    A = XtW @ X
    coef = np.linalg.solve(A, XtW @ y)
    Ainv = np.linalg.inv(A)
    naive = math.sqrt(Ainv[1, 1]) if np.all(rel > 0) else 0.0
    # nested-event covariance of the log estimates
    var = rel ** 2
    idx = np.arange(len(pts))
    cov = var[np.minimum.outer(idx, idx)]
    if all(e.trials == pts[0].trials for e in pts):
        sand = Ainv @ XtW @ cov @ XtW.T @ Ainv
        se = math.sqrt(max(sand[1, 1], 0.0))
    else:
        se = naive
    return TailFit(float(coef[1]), float(coef[0]), float(se),
                   (pts[0].n, pts[-1].n), len(pts), float(naive))


def scaled_tail_check(curve, exponent, scale=1.0, top_fraction=0.5, z=3.0):
    """Boundedness diagnostic for p_hat(n) n^exponent / scale.

    Fits a line to the log of the scaled values over the top part of the
    log-n range (weighted as in :func:`fit_tail_exponent`) and calls the
    sequence bounded when the fitted growth rate is not significantly
    positive.  Returns a dict with the values, the running maximum, the
    growth rate and its error.
    """
    pts = [e for e in curve if e.survivors >= MIN_SURVIVORS]
    if len(pts) < 3:
        raise ValueError("need at least 3 well-populated points")
    n = np.array([e.n for e in pts], float)
    vals = np.array([e.p_hat for e in pts]) * n ** exponent / scale
    run_max = np.maximum.accumulate(vals)
    lo = math.exp(math.log(n[0]) + (1 - top_fraction) * (math.log(n[-1]) - math.log(n[0])))
    top = [e for e in pts if e.n >= lo * (1 - 1e-12)]
    if len(top) < 3:
        top = pts[-3:]
    fit = fit_tail_exponent(top, 1)
    growth = fit.slope + exponent
    return {"n": n.tolist(), "scaled": vals.tolist(), "running_max": run_max.tolist(),
            "growth_rate": growth, "growth_stderr": fit.slope_stderr,
            "bounded": bool(growth <= z * fit.slope_stderr + 1e-9)}


def estimate_local_prob(bd, dist, n, bins, trials, seed, batch=DEFAULT_BATCH):
    """Frequencies of {a + S(n) in (lo, lo + width]} together with {T > n}."""
    n = int(n)
    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if n < 0:
        raise ValueError("n must be nonnegative")
    bins = [(float(lo), float(w)) for lo, w in bins]
    for lo, w in bins:
        if not w > 0:
            raise ValueError("bin widths must be positive")
    order = sorted(bins)
    for (lo1, w1), (lo2, _) in zip(order, order[1:]):
        if lo2 < lo1 + w1:
            raise ValueError(f"bins ({lo1}, {lo1 + w1}] and ({lo2}, ...] overlap")
    seed = _seed(seed)
    code, params, vals, cum = dist.kernel_spec()
    ck = np.array([n], dtype=np.int64)
    lows = np.array([b[0] for b in bins])
    highs = np.array([b[0] + b[1] for b in bins])
    counts = np.zeros(len(bins), dtype=np.int64)
    out = np.empty((min(batch, trials), 1))
    for start, size in _batches(trials, batch):
        view = out[:size]
        _kernels.positions_at(code, params, vals, cum, float(bd.c), float(bd.a), float(bd.b),
                              ck, np.uint64(seed.master_seed),
                              np.uint64((seed.base + start) % 2**64), size, view)
        pos = view[:, 0]
        pos = pos[~np.isnan(pos)]
        for i in range(len(bins)):
            counts[i] += int(np.count_nonzero((pos > lows[i]) & (pos <= highs[i])))
    res = []
    for (lo, w), k in zip(bins, counts):
        p = k / trials
        res.append(LocalProbEstimate(n, lo, w, p, math.sqrt(p * (1 - p) / trials), int(k), trials))
    return res
