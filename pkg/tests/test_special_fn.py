import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import hermite_e as npherm

from sqrtwalk import special_fn as sf
from sqrtwalk.exponent_solver import c_of_p, p_of_c

# [DERIVED] psi_p(x) = exp(x^2/4) D_p(x) from mpmath.pcfd at 30 digits, frozen.
MPMATH_PSI = [
    (0.5, 0.0, 0.58136831701911858),
    (0.5, 1.3, 1.202098070617694),
    (0.5, -2.0, -2.4599245330821462),
    (1.5, 2.0, 2.5729038897609842),
    (2.5, -1.0, 1.3003289659313673),
    (-0.5, 1.0, 0.83856108120975601),
    (-1.5, -3.0, 433.88375914846254),
    (-2.7, 4.0, 0.018354266197278543),
    (3.4248, 2.0, 9.8752135032119576e-5),
    (0.648835, -0.5, 7.5123897938273258e-7),
    (6.3, -5.5, -45586.71357575004),
    (7.7, 5.0, 54549.425717353785),
]


def mp_psi(p, x):
    with mpmath.workdps(30):
        return float(mpmath.pcfd(p, x) * mpmath.exp(mpmath.mpf(x) ** 2 / 4))


def close(got, ref, rel):
    return abs(got - ref) <= rel * max(abs(ref), 1.0)


# ---------------------------------------------------------------- examples

@pytest.mark.parametrize("p, x, expected", [
    (0, 3.7, 1.0),
    (2, 1.0, 0.0),
    (-1, 0.0, math.sqrt(math.pi / 2)),
    (3, 2.0, 2.0),
])
def test_psi_trivial_values(p, x, expected):
    assert sf.psi(p, x) == pytest.approx(expected, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("p, x, expected", MPMATH_PSI)
def test_psi_against_frozen_mpmath(p, x, expected):
    assert close(sf.psi(p, x), expected, 1e-8)


def test_psi_returns_error_estimate():
    r = sf.eval_psi(-0.5, 1.0)
    assert isinstance(r, sf.PsiValue)
    assert math.isfinite(r.est_error) and r.est_error >= 0


@pytest.mark.parametrize("p, x, t, expected", [
    (2, 3.0, 0.0, 9.0),
    (1, 4.0, 9.0, 4.0),
    (2, 2.0, 1.0, 3.0),
])
def test_V_values(p, x, t, expected):
    assert sf.eval_V(p, sf.SpaceTimePoint(x, t)) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("x, t, expected", [(1.0, 4.0, 0.0), (3.0, 4.0, 5.0), (2.0, 4.0, 0.0)])
def test_V_clipped_values(x, t, expected):
    assert sf.eval_V_clipped(2, sf.SpaceTimePoint(x, t)) == pytest.approx(expected, abs=1e-12)


def test_V_clipped_at_the_curve_matches_unclipped():
    # x = c(2) sqrt(t) is a zero of V_2, so clipping changes nothing there
    pt = sf.SpaceTimePoint(2.0, 4.0)
    assert sf.eval_V(2, pt) == pytest.approx(0.0, abs=1e-12)
    assert sf.eval_V_clipped(2, pt) == pytest.approx(sf.eval_V(2, pt), abs=1e-12)


def test_derivative_values():
    assert sf.dV_dx(2, sf.SpaceTimePoint(5.0, 1.0)) == pytest.approx(10.0)
    assert sf.dV_dt(2, sf.SpaceTimePoint(5.0, 1.0)) == pytest.approx(-1.0)
    assert sf.dV_dx(3, sf.SpaceTimePoint(2.0, 1.0)) == pytest.approx(9.0)


# ---------------------------------------------------------------- errors

def test_non_finite_inputs_rejected():
    with pytest.raises(ValueError):
        sf.eval_psi(float("nan"), 1.0)
    with pytest.raises(ValueError):
        sf.eval_psi(1.5, float("inf"))


def test_V_at_time_zero_needs_positive_x():
    with pytest.raises(ValueError):
        sf.eval_V(1.5, sf.SpaceTimePoint(0.0, 0.0))
    with pytest.raises(ValueError):
        sf.eval_V(2, sf.SpaceTimePoint(-1.0, 0.0))


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        sf.SpaceTimePoint(1.0, -1e-9)


def test_derivatives_need_positive_time():
    with pytest.raises(ValueError):
        sf.dV_dx(2, sf.SpaceTimePoint(1.0, 0.0))
    with pytest.raises(ValueError):
        sf.dV_dt(2, sf.SpaceTimePoint(1.0, 0.0))


def test_overflow_raises_range_error():
    with pytest.raises(sf.PsiRangeError) as info:
        sf.eval_V(400, sf.SpaceTimePoint(1e3, 0.0))
    assert info.value.p == 400


def test_quadrature_failure_reports_achieved_error():
    cfg = sf.QuadratureConfig(rel_tol=1e-15, abs_tol=1e-300, max_refinements=1)
    with pytest.raises(sf.QuadratureError) as info:
        sf.eval_psi(-1.9, 8.0, cfg)
    assert info.value.achieved_error > 0


@pytest.mark.parametrize("kw", [dict(rel_tol=0), dict(abs_tol=-1), dict(tail_eps=0),
                                dict(max_refinements=0)])
def test_quadrature_config_validation(kw):
    with pytest.raises(ValueError):
        sf.QuadratureConfig(**kw)


def test_integer_detection_threshold():
    assert sf.is_integer_order(2 + 1e-13)
    assert not sf.is_integer_order(2 + 1e-9)


# ---------------------------------------------------------------- properties

XGRID = np.round(np.arange(-6.0, 6.0 + 1e-9, 0.1), 10)


@pytest.mark.parametrize("n", range(11))
def test_hermite_oracle(n):
    ref = npherm.hermeval(XGRID, [0] * n + [1])
    got = np.array([sf.psi(n, x) for x in XGRID])
    scale = np.maximum(np.abs(ref), 1.0)
    assert np.max(np.abs(got - ref) / scale) <= 1e-9


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_recurrence_route_matches_hermite_route(n):
    xs = XGRID[::5]
    for x in xs:
        ref = sf.psi(n, x)
        got = sf.eval_psi(n, x, route="recurrence").value
        assert close(got, ref, 1e-6), (n, x, got, ref)


@settings(max_examples=60, deadline=None)
@given(p=st.floats(-4, 8), x=st.floats(-6, 6))
def test_recurrence_residual(p, x):
    a = sf.psi(p, x)
    b = sf.psi(p - 1, x)
    c = sf.psi(p - 2, x)
    # residual relative to the largest term: at negative x the terms cancel
    scale = max(abs(a), abs(x * b), abs((1 - p) * c), 1.0)
    assert abs(a - x * b - (1 - p) * c) <= 1e-8 * scale


@settings(max_examples=40, deadline=None)
@given(p=st.floats(-3, 7), x=st.floats(-6, 6))
def test_matches_mpmath(p, x):
    assert close(sf.psi(p, x), mp_psi(p, x), 1e-7)


@settings(max_examples=60, deadline=None)
@given(p=st.floats(0.05, 7), x=st.floats(-6, 6))
def test_derivative_matches_finite_difference(p, x):
    h = 1e-4
    fd = (sf.psi(p, x + h) - sf.psi(p, x - h)) / (2 * h)
    exact = p * sf.psi(p - 1, x)
    assert abs(fd - exact) <= 1e-5 * max(abs(exact), 1.0)


@settings(max_examples=40, deadline=None)
@given(p=st.floats(0.1, 5), x=st.floats(-4, 6), t=st.floats(0.2, 9))
def test_V_derivatives_match_finite_differences(p, x, t):
    pt = sf.SpaceTimePoint(x, t)
    h = 1e-5
    fx = (sf.eval_V(p, sf.SpaceTimePoint(x + h, t)) - sf.eval_V(p, sf.SpaceTimePoint(x - h, t)))
    ft = (sf.eval_V(p, sf.SpaceTimePoint(x, t + h)) - sf.eval_V(p, sf.SpaceTimePoint(x, t - h)))
    vx, vt = sf.dV_dx(p, pt), sf.dV_dt(p, pt)
    scale = max(abs(sf.eval_V(p, pt)), 1.0)
    assert abs(fx / (2 * h) - vx) <= 1e-5 * max(scale, abs(vx))
    assert abs(ft / (2 * h) - vt) <= 1e-5 * max(scale, abs(vt))


def test_V_solves_backward_heat_equation():
    # dV/dt = -1/2 d2V/dx2
    for p in (0.65, 1.7, 3.2):
        for x, t in [(0.5, 1.0), (2.0, 3.0), (-1.0, 2.0)]:
            h = 1e-3
            vxx = (sf.eval_V(p, (x + h, t)) - 2 * sf.eval_V(p, (x, t))
                   + sf.eval_V(p, (x - h, t))) / h ** 2
            assert sf.dV_dt(p, (x, t)) == pytest.approx(-0.5 * vxx, rel=1e-4, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(q=st.floats(-4, -0.01), x=st.floats(-6, 6))
def test_negative_orders_positive(q, x):
    assert sf.psi(q, x) > 0


@pytest.mark.parametrize("q", [-0.3, -1.0, -2.5])
def test_negative_orders_decreasing(q):
    vals = [sf.psi(q, x) for x in np.linspace(-5, 5, 81)]
    assert np.all(np.diff(vals) < 0)


@pytest.mark.parametrize("p", [0.5, 2.0, 3.4])
def test_large_argument_asymptotics(p):
    sups = []
    for z in (5, 10, 20, 50):
        ratios = []
        for t in (1.0, 10.0, 100.0):
            for k in (1.0, 1.5, 3.0, 10.0):
                x = k * z * math.sqrt(t)
                ratios.append(abs(sf.eval_V(p, (x, t)) / x ** p - 1))
        sups.append(max(ratios))
    assert all(b < a for a, b in zip(sups, sups[1:]))
    # leading correction term is p(p-1) t / (2 x^2), worst at x = z sqrt t
    assert sups[-1] <= 1.01 * p * abs(p - 1) / (2 * 50 ** 2)


def _sample_above(c, gamma=0.0, n=400, seed=0):
    rng = np.random.default_rng(seed)
    t = np.exp(rng.uniform(np.log(0.05), np.log(1e4), n))
    d = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n))
    x = c * np.sqrt(t) + gamma * np.sqrt(t) + d
    return x, t


@pytest.mark.parametrize("c", [-0.5, 0.5, 1.0])
def test_distance_sandwich(c):
    # V_{p(c)}(x,t) / (x - c sqrt t)^{p(c)} stays in a positive band once the gap
    # exceeds gamma sqrt t, and the band shrinks toward 1 as gamma grows
    p = p_of_c(c).value
    spread = []
    for gamma in (0.5, 1.0, 2.0):
        x, t = _sample_above(c, gamma, seed=7)
        r = np.array([sf.eval_V(p, (xi, ti)) for xi, ti in zip(x, t)]) / (x - c * np.sqrt(t)) ** p
        assert r.min() > 0 and np.all(np.isfinite(r))
        spread.append(np.abs(np.log(r)).max())
    assert spread[0] > spread[1] > spread[2]


@pytest.mark.parametrize("p", [0.65, 1.5, 2.0, 3.4])
def test_ratio_of_consecutive_orders_bounded(p):
    c = c_of_p(p).value
    x, t = _sample_above(c, 0.0, seed=3)
    ratio = np.array([sf.eval_V(p, (xi, ti)) / (sf.eval_V(p - 1, (xi, ti)) * (xi - c * math.sqrt(ti)))
                      for xi, ti in zip(x, t)])
    assert ratio.min() > 0.05 and ratio.max() < 20


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_fractional_order_power_bound(p):
    c = c_of_p(p).value
    x, t = _sample_above(c, 0.0, seed=4)
    r = np.array([sf.eval_V(p, (xi, ti)) for xi, ti in zip(x, t)]) / (x - c * np.sqrt(t)) ** p
    assert r.max() < 10.0
    x2, t2 = _sample_above(c, 0.0, n=2000, seed=5)
    r2 = np.array([sf.eval_V(p, (xi, ti)) for xi, ti in zip(x2, t2)]) / (x2 - c * np.sqrt(t2)) ** p
    assert r2.max() <= 1.05 * max(r.max(), 1.0)
