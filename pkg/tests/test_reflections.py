import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xtinct.reflections import (
    OutOfSphereError,
    ReflectionError,
    enumerate_peaks,
    extinction_mask,
    is_extinct,
    position_invariant,
    q_from_two_theta,
    q_of,
    reciprocal,
    two_theta,
)
from xtinct.symmetry import LatticeParams, lattice_from_free_params, system_by_name


def _cubic(a):
    return lattice_from_free_params(system_by_name("cubic"), (a,))


def test_reciprocal_cubic():
    rl = reciprocal(_cubic(10.0))
    assert math.isclose(rl.a_star, 0.1, rel_tol=1e-14)
    assert rl.a_star == rl.b_star == rl.c_star
    for c in (rl.cos_alpha_star, rl.cos_beta_star, rl.cos_gamma_star):
        assert abs(c) < 1e-15


def test_reciprocal_tetragonal():
    lat = lattice_from_free_params(system_by_name("tetragonal"), (5.0, 10.0))
    rl = reciprocal(lat)
    assert math.isclose(rl.a_star, 0.2, rel_tol=1e-14)
    assert math.isclose(rl.c_star, 0.1, rel_tol=1e-14)
    assert abs(rl.cos_gamma_star) < 1e-14


def test_reciprocal_hexagonal():
    lat = lattice_from_free_params(system_by_name("hexagonal"), (4.0, 3.0))
    rl = reciprocal(lat)
    # a* = 2/(a*sqrt(3)), cos(gamma*) = 1/2 for gamma = 120 deg
    assert math.isclose(rl.a_star, 2.0 / (4.0 * math.sqrt(3.0)), rel_tol=1e-12)
    assert math.isclose(rl.c_star, 1.0 / 3.0, rel_tol=1e-12)
    assert math.isclose(rl.cos_gamma_star, 0.5, rel_tol=1e-9)
    assert abs(rl.cos_alpha_star) < 1e-12


@pytest.mark.parametrize(
    "hkl,expected",
    [((1, 0, 0), 0.01), ((1, 1, 1), 0.03), ((2, 1, 0), 0.05)],
)
def test_q_of_cubic(hkl, expected):
    rl = reciprocal(_cubic(10.0))
    assert math.isclose(q_of(rl, hkl), expected, rel_tol=1e-12)


def test_q_of_tetragonal():
    lat = lattice_from_free_params(system_by_name("tetragonal"), (5.0, 10.0))
    assert math.isclose(q_of(reciprocal(lat), (1, 0, 1)), 0.05, rel_tol=1e-12)


def test_q_of_rejects_origin():
    with pytest.raises(ReflectionError):
        q_of(reciprocal(_cubic(10.0)), (0, 0, 0))


def test_two_theta_d3():
    # d = 3 A at Cu K-alpha1; frozen from 2*asin(1.5406/6) evaluated at
    # 30 digits: 29.7565874068366 degrees
    assert math.isclose(two_theta(1.0 / 9.0, 1.5406), 29.7565874068366, abs_tol=1e-10)


def test_two_theta_backscatter_limit():
    lam = 1.5406
    assert math.isclose(two_theta(4.0 / lam**2, lam), 180.0, abs_tol=1e-9)


def test_two_theta_out_of_sphere():
    lam = 1.5406
    with pytest.raises(OutOfSphereError):
        two_theta(5.0 / lam**2, lam)


def test_q_from_two_theta_inverts():
    lam = 1.2
    for q in (0.01, 0.3, 1.9):
        assert math.isclose(q_from_two_theta(two_theta(q, lam), lam), q, rel_tol=1e-12)


def test_im3m_100_extinct(registry):
    assert is_extinct(registry[229], (1, 0, 0))


def test_fm3m_110_extinct(registry):
    assert is_extinct(registry[225], (1, 1, 0))


def test_p213_screw_conditions(registry):
    g = registry[198]
    assert is_extinct(g, (1, 0, 0))
    assert not is_extinct(g, (2, 0, 0))


def test_extinction_mask_matches_scalar(registry):
    g = registry[227]
    hkls = np.array([(h, k, l) for h in range(-3, 4) for k in range(-3, 4)
                     for l in range(-3, 4) if (h, k, l) != (0, 0, 0)])
    mask = extinction_mask(g, hkls)
    for hkl, m in zip(hkls[::7], mask[::7]):
        assert is_extinct(g, tuple(hkl)) == bool(m)


@settings(deadline=None, max_examples=60)
@given(
    st.sampled_from([75, 88, 110, 142, 148, 161, 167, 194, 198, 220, 227, 230]),
    st.tuples(st.integers(-5, 5), st.integers(-5, 5), st.integers(-5, 5)),
)
def test_friedel_symmetry(registry, number, hkl):
    if hkl == (0, 0, 0):
        return
    g = registry[number]
    neg = tuple(-v for v in hkl)
    assert is_extinct(g, hkl) == is_extinct(g, neg)


def test_position_invariant_keys():
    assert position_invariant("cubic", (3, -1, 1)) == (11,)
    assert position_invariant("tetragonal", (1, 2, -3)) == (5, 9)
    assert position_invariant("hexagonal", (1, 1, 2)) == (3, 4)
    assert position_invariant("orthorhombic", (1, -2, 3)) == (1, 4, 9)


def test_metric_agreement_random_lattices():
    # Q from the reciprocal-parameter quadratic form vs 1/d^2 straight from
    # the direct metric tensor
    rng = np.random.default_rng(123)
    for _ in range(200):
        lat = LatticeParams(
            a=rng.uniform(2, 20), b=rng.uniform(2, 20), c=rng.uniform(2, 20),
            alpha=rng.uniform(60, 120), beta=rng.uniform(60, 120),
            gamma=rng.uniform(60, 120),
        )
        hkl = rng.integers(-8, 9, size=3)
        if not hkl.any():
            continue
        q_a = q_of(reciprocal(lat), hkl)
        q_b = float(hkl @ np.linalg.solve(lat.metric_tensor(), hkl))
        assert math.isclose(q_a, q_b, rel_tol=1e-12)


def test_enumerate_fm3m_first_peak(registry):
    lat = _cubic(5.0)
    peaks = enumerate_peaks(registry[225], lat, (5.0, 120.0))
    assert math.isclose(peaks[0].q, 0.12, rel_tol=1e-12)
    assert (1, 1, 1) in peaks[0].contributors


def test_enumerate_pm3m_first_peak(registry):
    peaks = enumerate_peaks(registry[221], _cubic(5.0), (5.0, 120.0))
    assert math.isclose(peaks[0].q, 0.04, rel_tol=1e-12)


def test_enumerate_im3m_q_sequence(registry):
    peaks = enumerate_peaks(registry[229], _cubic(5.0), (5.0, 120.0))
    got = [p.q for p in peaks[:3]]
    assert np.allclose(got, [2 / 25, 4 / 25, 6 / 25], rtol=1e-12)


def test_enumerate_sorted_and_deterministic(registry):
    a = enumerate_peaks(registry[194], lattice_from_free_params(
        system_by_name("hexagonal"), (6.0, 4.0)), (10.0, 110.0))
    b = enumerate_peaks(registry[194], lattice_from_free_params(
        system_by_name("hexagonal"), (6.0, 4.0)), (10.0, 110.0))
    tts = [p.two_theta for p in a]
    assert tts == sorted(tts)
    assert all(x < y for x, y in zip(tts, tts[1:]))
    assert a == b


def test_enumerate_rejects_bad_window(registry):
    with pytest.raises(ReflectionError):
        enumerate_peaks(registry[221], _cubic(5.0), (50.0, 20.0))


def test_enumerate_empty_is_legal(registry):
    # tiny cell: first peak beyond the window
    peaks = enumerate_peaks(registry[221], _cubic(2.0), (10.0, 40.0))
    assert peaks == []
