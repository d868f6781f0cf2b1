import math

import numpy as np
import pytest

from sqrtwalk import mc_engine as mc
from sqrtwalk.rng import SeedSpec
from sqrtwalk.walk_model import Boundary, IncrementDistribution, enumerate_survival

RAD = IncrementDistribution.rademacher()


def test_survival_example_matches_enumeration():
    (est,) = mc.estimate_survival(Boundary(0, 1, 0), RAD, [3], 200_000, SeedSpec(1))
    assert est.p_hat == pytest.approx(est.survivors / est.trials)
    assert abs(est.p_hat - 0.375) <= 4 * est.stderr


def test_estimate_fields():
    e = mc.SurvivalEstimate.from_counts(10, 25, 100)
    assert e.p_hat == 0.25 and e.stderr == pytest.approx(math.sqrt(0.25 * 0.75 / 100))


@pytest.mark.parametrize("kw", [dict(trials=0), dict(horizons=[]), dict(horizons=[4, 2]),
                                dict(horizons=[0, 3])])
def test_survival_preconditions(kw):
    args = dict(bd=Boundary(0, 1, 0), dist=RAD, horizons=[1, 2], trials=10, seed=0)
    args.update(kw)
    with pytest.raises(ValueError):
        mc.estimate_survival(**args)


def test_nested_curve_is_nonincreasing():
    curve = mc.estimate_survival(Boundary(1, 2, 1), IncrementDistribution.gaussian(),
                                 list(range(1, 200, 7)), 20_000, SeedSpec(3))
    s = [e.survivors for e in curve]
    assert all(b <= a for a, b in zip(s, s[1:]))


def test_determinism_across_threads_and_batches():
    bd, dist = Boundary(0.5, 1.0, 0.0), IncrementDistribution.gaussian()
    ref = mc.estimate_survival(bd, dist, [1, 10, 100], 30_000, SeedSpec(9, 4))
    for threads, batch in [(1, 1 << 20), (2, 4096), (4, 777)]:
        mc.set_threads(threads)
        assert mc.estimate_survival(bd, dist, [1, 10, 100], 30_000, SeedSpec(9, 4),
                                    batch=batch) == ref
    mc.set_threads(1)


def test_different_seeds_differ():
    bd = Boundary(0, 1, 0)
    a = mc.estimate_survival(bd, RAD, [50], 10_000, 1)
    b = mc.estimate_survival(bd, RAD, [50], 10_000, 2)
    assert a != b


def test_oracle_equivalence_finite_discrete():
    dist = IncrementDistribution.finite_discrete([(-2.0, 0.2), (0.5, 0.8)])
    cells = ok = 0
    for c, a, b in [(0.0, 0.7, 0.0), (0.5, 1.0, 1.0), (-0.5, 0.2, 0.5)]:
        bd = Boundary(c, a, b)
        exact = enumerate_survival(bd, dist, 20)
        curve = mc.estimate_survival(bd, dist, range(1, 21), 100_000, SeedSpec(5))
        for e, p in zip(curve, exact):
            cells += 1
            ok += abs(e.p_hat - p) <= 4 * max(e.stderr, 1e-12)
    assert ok >= 0.99 * cells


# ---------------------------------------------------------------- tail fit

def _synthetic(n, p, trials=10**9):
    return [mc.SurvivalEstimate(int(k), int(round(q * trials)), trials, q, 0.0)
            for k, q in zip(n, p)]


def test_fit_exact_power_law():
    n = 2 ** np.arange(4, 12)
    fit = mc.fit_tail_exponent(_synthetic(n, 7 * n ** -1.5), 1)
    assert fit.slope == pytest.approx(-1.5, abs=1e-12)
    assert math.exp(fit.intercept) == pytest.approx(7.0, rel=1e-10)
    assert fit.n_range == (16, 2048)


def test_fit_needs_three_points():
    n = np.array([10, 20])
    with pytest.raises(ValueError):
        mc.fit_tail_exponent(_synthetic(n, 1.0 / n), 1)


def test_fit_drops_sparse_points():
    n = 2 ** np.arange(1, 9)
    curve = [mc.SurvivalEstimate.from_counts(k, s, 10_000)
             for k, s in zip(n, [5000, 3000, 1500, 800, 400, 200, 90, 10])]
    fit = mc.fit_tail_exponent(curve, 1)
    assert fit.n_range == (2, 64) and fit.points == 6


def test_fit_slope_recovers_known_exponent_with_noise():
    # Bernoulli survival with P(T > n) = n^-0.75 for n >= 1 via T = U^(-4/3)
    rng = np.random.default_rng(0)
    t = rng.random(400_000) ** (-1 / 0.75)
    n = 2 ** np.arange(2, 12)
    curve = [mc.SurvivalEstimate.from_counts(k, int(np.sum(t > k)), t.size) for k in n]
    fit = mc.fit_tail_exponent(curve, 1)
    assert abs(fit.slope + 0.75) <= 4 * fit.slope_stderr
    assert fit.slope_stderr >= fit.naive_stderr


def test_scaled_tail_check():
    n = 2 ** np.arange(3, 14)
    flat = mc.scaled_tail_check(_synthetic(n, 3 * n ** -1.0), 1.0)
    assert flat["bounded"] and flat["growth_rate"] == pytest.approx(0, abs=1e-10)
    growing = mc.scaled_tail_check(_synthetic(n, 3 * n ** -0.8), 1.0)
    assert growing["growth_rate"] == pytest.approx(0.2)
    assert np.all(np.diff(growing["running_max"]) >= 0)


# ---------------------------------------------------------------- local probabilities

def test_local_prob_example():
    # [DERIVED] surviving 3-step paths from 1 ending at 2: (2,3,2) and (2,1,2)
    (e,) = mc.estimate_local_prob(Boundary(0, 1, 0), RAD, 3, [(1.5, 1.0)], 200_000, SeedSpec(2))
    assert abs(e.p_hat - 0.25) <= 4 * e.stderr


def test_local_prob_partition_sums_to_survival():
    bd, dist, n, trials = Boundary(0.5, 1.5, 1.0), IncrementDistribution.gaussian(), 40, 50_000
    lo = 0.5 * math.sqrt(n + 1.0)
    bins = [(lo + k, 1.0) for k in range(200)]
    est = mc.estimate_local_prob(bd, dist, n, bins, trials, SeedSpec(8))
    (surv,) = mc.estimate_survival(bd, dist, [n], trials, SeedSpec(8))
    assert abs(sum(e.p_hat for e in est) - surv.p_hat) <= 1e-12


def test_local_prob_far_bin_is_empty():
    (e,) = mc.estimate_local_prob(Boundary(0, 1, 0), RAD, 5, [(1e6, 1.0)], 1000, 0)
    assert e.p_hat == 0 and e.count == 0


@pytest.mark.parametrize("bins", [[(0.0, 1.0), (0.5, 1.0)], [(0.0, 0.0)]])
def test_local_prob_bin_validation(bins):
    with pytest.raises(ValueError):
        mc.estimate_local_prob(Boundary(0, 1, 0), RAD, 3, bins, 10, 0)


def test_local_prob_estimate_invariant():
    with pytest.raises(ValueError):
        mc.LocalProbEstimate(1, 0.0, 0.0, 0.0, 0.0)
