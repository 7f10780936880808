import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import airy

from hille_atlas.equation import validate
from hille_atlas.ode import (OK, OdeError, OdeState, _coeffs, integrate_path, march_arc, march_segment,
                             ray_profile, taylor_step, wronskian)

AIRY = validate([0, 1])
CUBIC = validate([1 + 0.5j, -0.3, 0.2j, 1])


def airy_state(z):
    """State of Ai(-z) at z."""
    w = -complex(z)
    # the complex routine mishandles a signed-zero imaginary part on the negative axis
    ai, aip, _, _ = airy(w.real) if w.imag == 0 else airy(w)
    return OdeState(complex(z), complex(ai), -complex(aip))


def even_solution(z):
    # solution with f(0) = 1, f'(0) = 0 from Ai and Bi; the Wronskian Ai Bi' - Ai' Bi is 1/pi
    a0, ap0, b0, bp0 = airy(0.0)
    ai, aip, bi, bip = airy(-z)
    return math.pi * (bp0 * ai - ap0 * bi)


def test_taylor_coefficients():
    q = np.array([0, 1], dtype=complex)
    a = np.empty(10, dtype=complex)
    _coeffs(q, 1 + 0j, 0j, 9, a)
    assert a[3] == pytest.approx(-1 / 6)
    assert a[6] == pytest.approx(1 / 180)
    assert a[9] == pytest.approx(-1 / 12960)


def test_taylor_step_value():
    st_ = taylor_step(AIRY, OdeState(0j, 1 + 0j, 0j), 1.0)
    assert st_.f.real == pytest.approx(even_solution(1.0), rel=1e-14)
    assert st_.f.real == pytest.approx(0.8388123, abs=1e-7)


def test_trivial_solution_stays_zero():
    st_ = taylor_step(AIRY, OdeState(0j, 0j, 0j), 0.5 + 0.5j)
    assert st_.f == 0 and st_.fp == 0


def test_step_is_reversible():
    s0 = OdeState(0.3 + 0.1j, 0.7 - 0.2j, 1.1j)
    s1 = taylor_step(CUBIC, s0, 0.4 - 0.3j)
    s2 = taylor_step(CUBIC, s1, -(0.4 - 0.3j))
    assert abs(s2.f - s0.f) <= 1e-12 * abs(s0.f)
    assert abs(s2.fp - s0.fp) <= 1e-12 * abs(s0.fp)


def test_oversized_step_is_refused():
    with pytest.raises(OdeError):
        taylor_step(CUBIC, OdeState(0j, 1 + 0j, 0j), 30.0, max_order=40)


def test_integrate_path_value():
    sol = integrate_path(AIRY, OdeState(0j, 1 + 0j, 0j), [0, 1], samples_per_unit=4)
    assert not sol.truncated
    assert sol.final.true_f.real == pytest.approx(even_solution(1.0), rel=1e-13)
    assert len(sol.samples) == 5
    with pytest.raises(ValueError):
        integrate_path(AIRY, OdeState(1j, 1 + 0j, 0j), [0, 1])


def test_airy_far_along_real_axis():
    tr = march_segment(AIRY, airy_state(0.0), 40.0)
    ref = airy_state(40.0)
    assert abs(tr.end.true_f - ref.f) < 1e-12
    assert abs(tr.end.true_fp - ref.fp) < 1e-11


@pytest.mark.parametrize("z", [5 + 3j, -4 + 2j, 3 - 6j])
def test_airy_complex_points(z):
    tr = march_segment(AIRY, airy_state(0.0), z)
    ref = airy_state(z)
    assert abs(tr.end.true_f - ref.f) <= 1e-10 * abs(ref.f)


def test_blow_up_is_rescaled_not_overflowed():
    prof = ray_profile(AIRY, math.pi, 200.0, OdeState(0j, 1 + 0j, 0j), n_samples=50)
    assert not prof.truncated and np.all(np.isfinite(prof.log_f))
    slope = prof.log_f[-1] / 200.0 ** 1.5
    assert slope == pytest.approx(2 / 3, rel=0.02)


def test_ray_profile_matches_growing_airy():
    # on z = -x the solution Bi(-z) is Bi(x), which grows like exp((2/3) x^{3/2})
    _, _, b0, bp0 = airy(0.0)
    prof = ray_profile(AIRY, math.pi, 30.0, OdeState(0j, complex(b0), -complex(bp0)), n_samples=30)
    ref = np.log(airy(prof.r)[2])
    assert np.allclose(prof.log_f, ref, rtol=1e-12, atol=1e-12)


def test_trivial_profile_is_flagged():
    prof = ray_profile(AIRY, 0.0, 5.0, OdeState(0j, 0j, 0j))
    assert prof.trivial and np.all(prof.log_f == -np.inf)
    with pytest.raises(ValueError):
        ray_profile(AIRY, 0.0, 1e-4, OdeState(0j, 1 + 0j, 0j))


def test_wronskian_examples():
    s = OdeState(1j, 2 + 1j, -0.5j)
    assert wronskian(s, s) == 0
    assert wronskian(OdeState(0j, 1 + 0j, 0j), OdeState(0j, 0j, 1 + 0j)) == 1
    with pytest.raises(ValueError):
        wronskian(OdeState(0j, 1 + 0j, 0j), OdeState(1j, 0j, 1 + 0j))


def test_arc_phase_counts_airy_zeros():
    # the circle |z - 5| = 2 encloses the zeros 4.088, 5.521 and 6.787 of Ai(-z)
    start = airy_state(3.0)
    tr = march_arc(AIRY, start, 5 + 0j, math.pi, 3 * math.pi, track_phase=True)
    assert tr.status == OK
    assert abs(tr.end.z - 3.0) < 1e-12
    assert abs(tr.end.true_f - start.f) < 1e-11
    assert tr.phase / (2 * math.pi) == pytest.approx(3, abs=1e-9)
    assert tr.min_dist < 0.6  # closest approach, to the zero at 6.787


def test_sampled_fractions():
    fr = np.linspace(0, 1, 11)
    tr = march_segment(AIRY, airy_state(0.0), 8.0, fracs=fr)
    assert [s.z for s in tr.samples] == pytest.approx(list(8.0 * fr))
    for s in tr.samples:
        assert s.true_f == pytest.approx(airy_state(s.z).f, abs=1e-12)


poly = st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False), min_size=2, max_size=4)
point = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


def _amplification(p1, p2, sol):
    """max_k |M_end M_k^-1| |s_k|: how far a unit relative error at any sample can grow by the end.

    p1, p2 are the solutions started at the identity on the same path, so M_k is their
    fundamental matrix at sample k.
    """
    def M(a, b):
        return np.array([[a.true_f, b.true_f], [a.true_fp, b.true_fp]])
    end = M(p1.samples[-1], p2.samples[-1])
    return max(np.linalg.norm(end @ np.linalg.inv(M(a, b)), 2) * math.hypot(abs(s.true_f), abs(s.true_fp))
               for a, b, s in zip(p1.samples, p2.samples, sol.samples))


def _size(s):
    return abs(s.true_f) + abs(s.true_fp)


@settings(max_examples=40, deadline=None)
@given(poly, point, point, point)
def test_path_independence_and_wronskian(coeffs, mid1, mid2, end):
    P = validate(coeffs + [1])
    s1 = OdeState(0j, 1 + 0j, 0j)
    s2 = OdeState(0j, 0j, 1 + 0j)
    a1, a2 = (integrate_path(P, s, [0, mid1, end], samples_per_unit=4) for s in (s1, s2))
    b1, b2 = (integrate_path(P, s, [0, mid2, end], samples_per_unit=4) for s in (s1, s2))
    # errors are judged against the conditioning of each path, not the size of the answer
    amp = max(_amplification(a1, a2, a1), _amplification(b1, b2, b1))
    err = abs(a1.final.true_f - b1.final.true_f) + abs(a1.final.true_fp - b1.final.true_fp)
    assert err <= 1e-13 * amp
    W = wronskian(a1.final, a2.final)
    bound = _size(a1.final) * _amplification(a1, a2, a2) + _size(a2.final) * _amplification(a1, a2, a1)
    assert abs(W - 1) <= 1e-13 * bound
