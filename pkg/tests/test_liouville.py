import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hille_atlas.equation import NormalizedEquation, e_n
from hille_atlas.liouville import LiouvilleContext, LiouvilleError, perturbation_T

AIRY = NormalizedEquation.from_Q([0, 1])
QUAD = NormalizedEquation.from_Q([-2, 0, 1])
CUBIC = NormalizedEquation.from_Q([1, 1, 0, 1])


def _quad_antiderivative(t):
    # independent closed form of int sqrt(t^2 - 2) dt for real t > sqrt(2)
    s = math.sqrt(t * t - 2)
    return 0.5 * t * s - math.log(t + s)


def test_forward_closed_form_airy():
    ctx = LiouvilleContext(AIRY, 0, R=1.0)
    ev = ctx.forward(4.0)
    assert ev.zeta == pytest.approx(2 / 3 * (8 - 2 ** 1.5), rel=1e-14)
    assert ctx.forward(ctx.z0).zeta == 0


def test_forward_matches_closed_form_quadratic():
    ctx = LiouvilleContext(QUAD, 0)
    z0 = ctx.z0.real
    expect = _quad_antiderivative(20.0) - _quad_antiderivative(z0)
    assert ctx.forward(20.0).zeta == pytest.approx(expect, rel=1e-13)
    assert ctx.series(20.0).zeta == pytest.approx(expect, rel=1e-10)


def test_series_K_airy():
    ctx = LiouvilleContext(AIRY, 0, R=1.0)
    ev = ctx.series(100.0)
    assert ev.K == pytest.approx(-(2 / 100) ** 1.5, rel=1e-12)


def test_series_coefficients_quadratic_log_term():
    ser = LiouvilleContext(QUAD, 0).expansion(6)
    assert ser.log_index == 2
    assert ser.c[2] == pytest.approx(-1)


def test_monomial_series_is_pure_constant():
    ctx = LiouvilleContext(NormalizedEquation.from_Q([0, 0, 0, 1]), 1)
    ser = ctx.expansion(8)
    assert np.all(ser.c[2:] == 0)
    z = 50 * cmath.exp(1j * ctx.psi)
    assert ctx.series(z).K == pytest.approx(-complex(ctx.u(ctx.z0)) / complex(ctx.u(z)), rel=1e-12)


def test_series_requires_large_z():
    with pytest.raises(LiouvilleError):
        LiouvilleContext(QUAD, 0).series(1.0)


def test_inverse_of_closed_form():
    ctx = LiouvilleContext(AIRY, 0, R=1.0)
    assert ctx.inverse(2 / 3 * (8 - 2 ** 1.5)) == pytest.approx(4.0, rel=1e-12)


@pytest.mark.parametrize("Q", [AIRY, QUAD, CUBIC])
def test_inverse_round_trip(Q):
    rng = np.random.default_rng(11)
    for j in range(Q.n + 2):
        ctx = LiouvilleContext(Q, j)
        mod = ctx.R_tilde * (2 + 50 * rng.random(100))
        ang = math.pi * j + (math.pi - ctx.delta) * (2 * rng.random(100) - 1)
        zetas = mod * np.exp(1j * ang)
        z = ctx.inverse_many(zetas)
        back, _ = ctx.forward_many(z)
        assert np.max(np.abs(back - zetas) / np.abs(zetas)) < 1e-9


def test_inverse_outside_image_is_rejected():
    ctx = LiouvilleContext(AIRY, 0)
    with pytest.raises(LiouvilleError):
        ctx.inverse(-5 * ctx.R_tilde)  # arg pi lies outside |arg| <= pi - delta


def test_preimage_of_large_real_zeta_hugs_the_ray():
    ctx = LiouvilleContext(QUAD, 0)
    z = ctx.inverse_many([1e3, 1e4, 1e5])
    offsets = np.abs(np.angle(z))
    C = 2 * math.pi / (QUAD.n + 2) * ctx.estimate_C0()  # v0 = 0
    assert np.all(offsets < C * e_n(np.abs(z), 2))


def test_perturbation_airy_is_inverse_square():
    ctx = LiouvilleContext(AIRY, 0, R=1.0)
    z = np.geomspace(3, 1e4, 100)
    zeta = 2 / 3 * z ** 1.5  # zeta measured from 0
    assert np.allclose(perturbation_T(AIRY, z), -5 / (36 * zeta ** 2), rtol=1e-12)
    assert ctx.perturbation_T(10.0) == pytest.approx(-5 / 16 * 10.0 ** -3)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_perturbation_monomial(n):
    Q = NormalizedEquation.from_Q([0] * n + [1])
    z = 3 - 2j
    assert perturbation_T(Q, z) == pytest.approx(-(n / 16) * (n + 4) * z ** (-n - 2), rel=1e-12)


def test_perturbation_plateau_quadratic():
    ctx = LiouvilleContext(QUAD, 0)
    vals = []
    for r in (1e3, 1e4):
        zeta, _, _ = ctx.series_many([r])
        vals.append(abs(perturbation_T(QUAD, r) * zeta[0] ** 2))
    assert abs(vals[0] / vals[1] - 1) < 0.1


def test_preimage_real_line_for_monomial():
    ctx = LiouvilleContext(NormalizedEquation.from_Q([0, 0, 1]), 0)
    curve = ctx.preimage_horizontal(0.0, np.linspace(3 * ctx.R_tilde, 50 * ctx.R_tilde, 20))
    assert np.all(np.abs(curve.z.imag) <= 1e-12 * np.abs(curve.z))
    assert np.all(curve.z.real > 0)
    assert curve.satisfied


def test_preimage_offset_decays_like_inverse_u():
    ctx = LiouvilleContext(AIRY, 0)
    offs = ctx.preimage_horizontal(1.0, [1e2, 1e3]).offsets
    # z = (3/2 (zeta + u(z0)))^{2/3}, so the angle is (2/3) atan(v0 / (u + u(z0)))
    u0 = complex(ctx.u(ctx.z0)).real
    expect = [2 / 3 * math.atan(1.0 / (u + u0)) for u in (1e2, 1e3)]
    assert offs == pytest.approx(expect, rel=1e-9)
    doubled = ctx.preimage_horizontal(2.0, [1e3]).offsets[0]
    assert doubled <= 2 * offs[1] + 1e-6


def test_univalence_monomial_ratio_is_one():
    rep = LiouvilleContext(NormalizedEquation.from_Q([0, 0, 0, 1]), 0).univalence_probe(200, seed=1)
    assert rep.min_ratio == pytest.approx(1.0, abs=1e-9)


def test_univalence_quadratic():
    rep = LiouvilleContext(QUAD, 0, R=10).univalence_probe(10_000, seed=2)
    assert rep.passed and rep.min_ratio >= 0.5


@pytest.mark.parametrize("Q", [QUAD, CUBIC])
def test_root_identities(Q):
    rng = np.random.default_rng(5)
    for j in range(Q.n + 2):
        ctx = LiouvilleContext(Q, j)
        r = ctx.R * (1 + 100 * rng.random(10_000))
        a = ctx.psi + ctx.half_width * (2 * rng.random(10_000) - 1) * 0.999
        z = r * np.exp(1j * a)
        q = Q.Q(z)
        assert np.max(np.abs(ctx.A(z) ** 2 - q) / np.abs(q)) < 1e-12
        assert np.max(np.abs(ctx.B(z) ** 4 - q) / np.abs(q)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(5, 1e4), st.floats(-0.99, 0.99), st.sampled_from([AIRY, QUAD, CUBIC]))
def test_K_geometry(r, frac, Q):
    ctx = LiouvilleContext(Q, 0)
    z = r * ctx.R * cmath.exp(1j * (ctx.psi + frac * ctx.half_width))
    K = ctx.series(z).K
    assert abs(cmath.phase(1 + K)) <= math.pi / 2 * abs(K) + 1e-15
    if r > 1e3:
        assert abs(1 + K) == pytest.approx(1, abs=0.05)
