import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vbflow import oracles, scalars

ns = st.sampled_from([2.0, 3.0, 5.0, 10.0])
reals = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False)

# Oracle values computed once with the quadrature / golden-section references and frozen here.
THETA_2_HALF = 0.5
THETA_2_ONE = 1.1931471805599454  # 1/2 + ln 2
GAMMA_PLUS_2_1_15 = 0.07213177477483104
GAMMA_MINUS_2_1_025 = 0.9318528194400547
F_STAR_2_1 = 0.125


def close(a, b, tol=1e-10):
    return abs(a - b) <= tol * max(1.0, abs(b))


# ---------------------------------------------------------------- cut-off


@pytest.mark.parametrize("s, expected", [(5.0, 2.0), (0.1, 0.5), (1.0, 1.0)])
def test_cutoff_examples(s, expected):
    assert scalars.cutoff_T(2, s) == expected


def test_cutoff_index_must_be_at_least_two():
    with pytest.raises(ValueError, match=">= 2"):
        scalars.cutoff_T(1.5, 1.0)


@settings(max_examples=200, deadline=None)
@given(n=ns, s=reals, t=reals)
def test_cutoff_properties(n, s, t):
    a, b = scalars.cutoff_T(n, s), scalars.cutoff_T(n, t)
    assert 1 / n <= a <= n
    assert (a == s) == (1 / n <= s <= n)
    assert abs(a - b) <= abs(s - t)
    if s <= t:
        assert a <= b


# ---------------------------------------------------------------- Theta


def test_theta_examples():
    assert scalars.theta(2, 0.0) == 0.0
    assert close(scalars.theta(2, 0.5), THETA_2_HALF)
    assert close(scalars.theta(2, 1.0), THETA_2_ONE)
    assert 1 / 8 <= scalars.theta(2, 1.0) <= 2


def test_theta_oracle_values_frozen():
    assert close(oracles.theta_quad(2, 0.5), THETA_2_HALF)
    assert close(oracles.theta_quad(2, 1.0), 0.5 + math.log(2))


@settings(max_examples=100, deadline=None)
@given(n=ns, s=reals)
def test_theta_matches_quadrature_and_bound(n, s):
    th = scalars.theta(n, s)
    assert close(th, oracles.theta_quad(n, s))
    tiny = 1e-300  # s**2 may be subnormal, where relative precision is lost
    assert s * s / n**2 * (1 - 1e-12) - tiny <= 2 * th <= n**2 * s * s * (1 + 1e-12) + tiny


@settings(max_examples=100, deadline=None)
@given(n=ns, a=reals, b=reals)
def test_theta_monotone_away_from_zero(n, a, b):
    # Theta' (s) = s / T_n(s)^2 has the sign of s
    lo, hi = min(a, b), max(a, b)
    if lo >= 0:
        assert scalars.theta(n, lo) <= scalars.theta(n, hi)
    if hi <= 0:
        assert scalars.theta(n, lo) >= scalars.theta(n, hi)


# ---------------------------------------------------------------- barriers


def test_barrier_plus_examples():
    assert scalars.barrier_plus(2, 1.5, 1.5) == 0
    assert scalars.barrier_plus(2, 1.5, 0.5) == 0
    assert close(scalars.barrier_plus(2, 1.0, 1.5), GAMMA_PLUS_2_1_15)
    assert close(oracles.barrier_plus_quad(2, 1.0, 1.5), math.log(1.5) - 1 / 3)


def test_barrier_minus_examples():
    assert scalars.barrier_minus(2, 0.5, 0.5) == 0
    assert scalars.barrier_minus(2, 0.5, 1.0) == 0
    assert close(scalars.barrier_minus(2, 1.0, 0.25), GAMMA_MINUS_2_1_025)
    assert close(oracles.barrier_minus_quad(2, 1.0, 0.25), 1.625 - math.log(2))


def test_barrier_preconditions():
    with pytest.raises(ValueError):
        scalars.barrier_plus(2, 0.5, 1.0)
    with pytest.raises(ValueError):
        scalars.barrier_minus(2, 1.5, 1.0)


@settings(max_examples=100, deadline=None)
@given(n=ns, t=reals, bmax=st.floats(1.0, 4.0), bmin=st.floats(0.1, 1.0))
def test_barriers_match_quadrature(n, t, bmax, bmin):
    gp = scalars.barrier_plus(n, bmax, t)
    gm = scalars.barrier_minus(n, bmin, t)
    assert close(gp, oracles.barrier_plus_quad(n, bmax, t))
    assert close(gm, oracles.barrier_minus_quad(n, bmin, t))
    assert gp >= 0 and gm >= 0
    assert (gp > 0) == (t > bmax)
    assert (gm > 0) == (t < bmin)


@settings(max_examples=100, deadline=None)
@given(n=ns, a=reals, b=reals)
def test_barriers_monotone(n, a, b):
    lo, hi = min(a, b), max(a, b)
    assert scalars.barrier_plus(n, 1.2, lo) <= scalars.barrier_plus(n, 1.2, hi)
    assert scalars.barrier_minus(n, 0.8, lo) >= scalars.barrier_minus(n, 0.8, hi)


def _midpoint_convex(g, a, b, lam):
    mid = g(lam * a + (1 - lam) * b)
    return mid <= lam * g(a) + (1 - lam) * g(b) + 1e-9 * (1 + abs(a) + abs(b)) ** 2


@settings(max_examples=100, deadline=None)
@given(n=ns, bmin=st.floats(0.1, 1.0), a=reals, b=reals, lam=st.floats(0, 1))
def test_gamma_minus_convex(n, bmin, a, b, lam):
    assert _midpoint_convex(lambda t: scalars.barrier_minus(n, bmin, t), a, b, lam)


@settings(max_examples=100, deadline=None)
@given(bmax=st.floats(1.0, 4.0), a=reals, b=reals, lam=st.floats(0, 1))
def test_gamma_plus_convex_when_cutoff_below_twice_bmax(bmax, a, b, lam):
    # Gamma_+' = (t - b_max) / T_n(t)^2 is nondecreasing as long as n <= 2 b_max
    n = 2.0 * bmax if bmax >= 1.0 else 2.0
    assert _midpoint_convex(lambda t: scalars.barrier_plus(n, bmax, t), a, b, lam)


@settings(max_examples=100, deadline=None)
@given(n=ns, a=st.floats(-100.0, 0.1), b=st.floats(-100.0, 0.1), lam=st.floats(0, 1))
def test_theta_convex_below_band(n, a, b, lam):
    # Theta_n = n^2 s^2 / 2 on (-inf, 1/n], and 1/n >= 0.1 for every sampled n
    assert _midpoint_convex(lambda s: scalars.theta(n, s), a, b, lam)


def test_theta_and_gamma_plus_are_not_convex_in_general():
    """Inside [1/n, n] the weight 1/T_n^2 = 1/s^2 decays; frozen counterexamples."""
    assert close(scalars.theta(2, 1.0), 1.1931471805599454)
    assert scalars.theta(2, 1.0) > 0.5 * (scalars.theta(2, 0.0) + scalars.theta(2, 2.0)) + 0.2
    mid = oracles.barrier_plus_quad(10, 1.2, 6.0)
    chord = 0.5 * (oracles.barrier_plus_quad(10, 1.2, 3.0) + oracles.barrier_plus_quad(10, 1.2, 9.0))
    assert close(mid, 0.809437912434106) and close(chord, 0.7322635428748825)
    assert close(scalars.barrier_plus(10, 1.2, 6.0), mid)
    assert mid > chord


@settings(max_examples=100, deadline=None)
@given(n=ns, a=reals, b=reals, lam=st.floats(0, 1))
def test_F_and_F_star_convex(n, a, b, lam):
    assert _midpoint_convex(lambda s: scalars.rothe_F(n, s), a, b, lam)
    assert _midpoint_convex(lambda s: scalars.rothe_F_star(n, s), a, b, lam)


# ---------------------------------------------------------------- f, F, F*


@pytest.mark.parametrize("s, expected", [(0.5, 2.0), (2.0, 3.5), (-1.0, -4.0)])
def test_f_examples(s, expected):
    assert close(scalars.rothe_f(2, s), expected)
    assert close(oracles.f_quad(2, s), expected)


def test_F_examples():
    assert scalars.rothe_F(2, 0.0) == 0
    assert close(scalars.rothe_F(2, 0.5), 0.5)
    assert close(oracles.F_quad(2, 0.5), 0.5)
    for s in (-3.0, 0.1, 1.0, 5.0):
        F = scalars.rothe_F(2, s)
        assert s * s / 8 <= F <= 2 * s * s


def test_F_star_examples():
    assert scalars.rothe_F_star(2, 0.0) == 0
    a = 1.0
    assert close(scalars.rothe_F(2, a) + scalars.rothe_F_star(2, scalars.rothe_f(2, a)), a * scalars.rothe_f(2, a), 1e-12)
    assert close(scalars.rothe_F_star(2, 1.0), F_STAR_2_1)
    assert abs(oracles.F_star_golden(2, 1.0, scalars.rothe_F) - F_STAR_2_1) <= 1e-8


@settings(max_examples=100, deadline=None)
@given(n=ns, s=reals)
def test_f_and_F_match_quadrature(n, s):
    assert close(scalars.rothe_f(n, s), oracles.f_quad(n, s))
    assert close(scalars.rothe_F(n, s), oracles.F_quad(n, s))
    assert close(scalars.rothe_f_inverse(n, scalars.rothe_f(n, s)), s, 1e-12)
    F = scalars.rothe_F(n, s)
    tiny = 1e-300
    assert scalars.lower_F_constant(n) * s * s * (1 - 1e-12) - tiny <= F <= scalars.upper_F_constant(n) * s * s * (1 + 1e-12) + tiny


@settings(max_examples=60, deadline=None)
@given(n=ns, y=st.floats(-40.0, 40.0))
def test_F_star_routes_agree(n, y):
    assert abs(scalars.rothe_F_star(n, y) - oracles.F_star_golden(n, y, scalars.rothe_F)) <= 1e-8 * max(1.0, abs(y))


@settings(max_examples=200, deadline=None)
@given(n=ns, a=reals, b=reals)
def test_fenchel_young(n, a, b):
    F, Fs = scalars.rothe_F(n, a), scalars.rothe_F_star(n, b)
    assert F + Fs >= a * b - 1e-9 * max(1.0, abs(a * b))
    fa = scalars.rothe_f(n, a)
    assert abs(F + scalars.rothe_F_star(n, fa) - a * fa) <= 1e-9 * max(1.0, abs(a * fa))


@pytest.mark.parametrize("n", [2.0, 5.0, 10.0])
def test_f_is_derivative_of_F_at_second_order(n):
    s = np.linspace(-3 * n, 3 * n, 101) + 0.0137  # avoid landing exactly on the kinks
    errs = []
    for h in (1e-3, 1e-4):
        fd = (scalars.rothe_F(n, s + h) - scalars.rothe_F(n, s - h)) / (2 * h)
        errs.append(np.max(np.abs(fd - scalars.rothe_f(n, s))))
    # between kinks F is piecewise polynomial/log, so the error is O(h^2) until
    # cancellation (about eps * max|F| / h) takes over
    floor = 1e-16 * float(np.max(scalars.rothe_F(n, s))) / 1e-4
    assert errs[1] <= errs[0] / 10**1.9 or errs[1] <= 10 * floor


@pytest.mark.parametrize("n", [2.0, 5.0])
def test_f_strictly_increasing(n):
    s = np.linspace(-5 * n, 5 * n, 5001)
    assert np.all(np.diff(scalars.rothe_f(n, s)) > 0)


def test_barrier_bounds_from_values():
    b = scalars.BarrierBounds.from_values(np.array([0.5, 1.2, 3.0]))
    assert b.b_max == 3.0 and b.b_min == 0.5
    b = scalars.BarrierBounds.from_values(np.array([1.1, 1.3]))
    assert b.b_min == 1.0
    assert b.admits(2.0) and not b.admits(1.2)
    with pytest.raises(ValueError):
        scalars.BarrierBounds.from_values(np.array([0.0, 1.0]))
