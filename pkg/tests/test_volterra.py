import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import hankel1, hankel2

from hille_atlas.volterra import (HypothesisViolation, PerturbationField, asymptotic_pair, gronwall_envelope,
                                  half_plane_edge, inverse_square_field, oscillatory_decompose,
                                  successive_approximation, tail_integral, zero_field)

BETA = 5 / 36
NU = 1 / 3  # w'' + (1 + BETA/z^2) w = 0 is solved by sqrt(z) H_nu(z) with nu^2 = 1/4 - BETA


def e_plus_exact(z):
    z = np.asarray(z, dtype=complex)
    return np.sqrt(np.pi * z / 2) * np.exp(1j * (NU * np.pi / 2 + np.pi / 4)) * hankel1(NU, z)


def e_minus_exact(z):
    z = np.asarray(z, dtype=complex)
    return np.sqrt(np.pi * z / 2) * np.exp(-1j * (NU * np.pi / 2 + np.pi / 4)) * hankel2(NU, z)


def test_field_validation():
    with pytest.raises(ValueError):
        PerturbationField(lambda t: 0 * t, side="up")
    with pytest.raises(ValueError):
        PerturbationField(lambda t: 0 * t, delta0=0.5, delta=0.4)
    pf = inverse_square_field(BETA)
    assert pf.R == pytest.approx(1 / math.sin(0.5))
    assert pf.in_domain(10.0) and not pf.in_domain(-10.0)
    assert inverse_square_field(BETA, "minus").in_domain(-10.0)


def test_tail_integral_closed_forms():
    assert tail_integral(zero_field(), 3.0) == 0
    assert tail_integral(inverse_square_field(BETA), 10.0) == pytest.approx(5 / 360, rel=1e-9)
    pf = PerturbationField(lambda t: np.exp(-t), delta0=1.6, delta=2.0)
    assert tail_integral(pf, 5.0) == pytest.approx(math.exp(-5), rel=1e-9)


def test_slow_field_is_rejected():
    with pytest.raises(HypothesisViolation):
        tail_integral(PerturbationField(lambda t: 1 / t), 10.0)


def test_zero_field_gives_the_base_exactly():
    z = np.array([10, 20 + 3j])
    sol = successive_approximation(zero_field(), "exp+", z)
    assert sol.iterations == 0
    assert np.array_equal(sol.w, np.exp(1j * z))
    pair = asymptotic_pair(zero_field(), z)
    assert np.all(pair.v_bounds == 0)


def test_exp_plus_matches_hankel_and_bound():
    pf = inverse_square_field(BETA)
    sol = successive_approximation(pf, "exp+", [10.0])
    err = abs(sol.w[0] - e_plus_exact(10.0))
    assert err < 1e-10
    bound = math.exp(5 / 360) - 1
    assert sol.bound[0] == pytest.approx(bound, rel=1e-8)
    assert abs(sol.w[0] - cmath.exp(10j)) <= bound


def test_complex_points_match_hankel():
    pf = inverse_square_field(BETA)
    z = np.array([8 + 2j, 15 - 1j, 30 + 5j])
    p = successive_approximation(pf, "exp+", z)
    m = successive_approximation(pf, "exp-", z)
    assert np.allclose(p.w, e_plus_exact(z), rtol=1e-9)
    assert np.allclose(m.w, e_minus_exact(z), rtol=1e-9)
    assert np.all(np.abs(p.w - np.exp(1j * z)) <= p.bound)


def test_sin_base_is_the_combination():
    pf = inverse_square_field(BETA)
    z0 = 0.3 + 0.1j
    z = np.array([12.0, 12.5 + 0.4j])
    s = successive_approximation(pf, "sin", z, z0=z0)
    expect = (cmath.exp(-1j * z0) * e_plus_exact(z) - cmath.exp(1j * z0) * e_minus_exact(z)) / 2j
    assert np.allclose(s.w, expect, rtol=1e-9)
    with pytest.raises(ValueError):
        successive_approximation(pf, "cos", z)


def test_pair_bounds_and_ode_residual():
    pf = inverse_square_field(BETA)
    x = np.linspace(10, 100, 91)
    pair = asymptotic_pair(pf, x)
    assert np.all(pair.v_bounds < 0.015) and np.all(pair.zero_free)
    h = 1e-3
    for kappa, E in ((1, pair.E_plus), (-1, pair.E_minus)):
        base = "exp+" if kappa == 1 else "exp-"
        xs = np.concatenate([x - h, x + h])
        w = successive_approximation(pf, base, xs, tol=1e-13).w
        wm, wp = w[: len(x)], w[len(x):]
        second = (wp - 2 * E + wm) / h ** 2
        resid = np.abs(second + (1 + BETA / x ** 2) * E)
        assert np.max(resid / np.abs(E)) < 1e-6


def test_derivative_matches_difference_quotient():
    pf = inverse_square_field(BETA)
    sol = successive_approximation(pf, "exp+", [20.0, 20.0 + 1e-5])
    assert sol.dw[0] == pytest.approx((sol.w[1] - sol.w[0]) / 1e-5, rel=1e-4)


@pytest.mark.parametrize("c1, c2, b, z0", [(1 / 2j, -1 / 2j, 1, 0), (0.5, 0.5, None, -math.pi / 2)])
def test_oscillatory_decompose(c1, c2, b, z0):
    bb, zz = oscillatory_decompose(c1, c2)
    if b is not None:
        assert bb == pytest.approx(b)
    assert abs(bb) == pytest.approx(1)
    # b sin(z - z0) reproduces c1 e^{iz} + c2 e^{-iz}
    for z in (0.3, 1 + 1j):
        assert bb * cmath.sin(z - zz) == pytest.approx(c1 * cmath.exp(1j * z) + c2 * cmath.exp(-1j * z))
    assert ((zz - z0) / math.pi).real == pytest.approx(round(((zz - z0) / math.pi).real), abs=1e-12)


def test_gronwall_envelope():
    assert gronwall_envelope(lambda t: math.exp(-t), lambda t: 1.0, 0.0) == pytest.approx(math.e, rel=1e-9)
    assert gronwall_envelope(lambda t: math.exp(-t), lambda t: 0.0, 1.0) == 0
    assert gronwall_envelope(lambda t: 0.0, lambda t: 2.5, 1.0) == pytest.approx(2.5)


def test_half_plane_edge_level():
    pf = inverse_square_field(BETA)
    gamma = 0.5
    x = half_plane_edge(pf, gamma)
    level = 1 + math.sin(gamma) / math.cosh(gamma)
    if x > pf.R:
        assert math.exp(tail_integral(pf, x)) == pytest.approx(level, rel=1e-8)
    assert math.exp(tail_integral(pf, x * 1.01)) < level


@settings(max_examples=25, deadline=None)
@given(st.floats(10, 200), st.floats(-3, 3))
def test_certified_bound_holds(x, y):
    pf = inverse_square_field(BETA)
    z = complex(x, y)
    sol = successive_approximation(pf, "exp+", [z])
    assert abs(sol.w[0] - cmath.exp(1j * z)) <= sol.bound[0] * (1 + 1e-9) + 1e-13
    assert abs(sol.w[0] - e_plus_exact(z)) <= 1e-9 * abs(sol.w[0])
