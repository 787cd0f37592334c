import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import mean_field_n_plus
from osc321 import coupled_mf_rhs, mf_fixed_points, mf_flow, pseudo_potential
from osc321.errors import InvalidRates
from osc321.meanfield import bistable_window, integrate_coupled_mf, relative_phase, sum_difference_rhs


def test_window_edges():
    assert bistable_window(0.01) == pytest.approx((4.0, 37.333333333333336))
    assert not mf_fixed_points(4.0, 1.0, 0.01).bistable
    assert mf_fixed_points(4.0 + 1e-9, 1.0, 0.01).bistable
    assert not mf_fixed_points(4.0 + 1 / 0.03, 1.0, 0.01).bistable


def test_n_plus_closed_form():
    s = mf_fixed_points(0.0, 1.0, 0.01)
    assert s.n_plus == pytest.approx(33.333333333333336 * (1 + math.sqrt(1.12)), rel=1e-14)
    assert s.n_plus == pytest.approx(68.61, abs=0.01)
    assert s.stable_n_plus and not s.stable_n0


@given(st.floats(-2, 3), st.floats(-3, 1))
def test_n_plus_matches_polynomial_roots(l1, l3):
    k1, k3 = 10**l1, 10**l3
    s = mf_fixed_points(k1, 1.0, k3)
    ref = mean_field_n_plus(k1, k3)
    if s.n_plus is not None and s.n_plus > 0 and ref is not None:
        assert s.n_plus == pytest.approx(ref, rel=1e-9)
        assert abs(mf_flow(math.sqrt(s.n_plus), k1, 1.0, k3)) < 1e-12 * max(1.0, s.n_plus**2.5)


def test_flow_basics():
    assert mf_flow(0.0, 1.0, 1.0, 0.1) == 0.0
    eps = 1e-6
    assert mf_flow(eps, 3.9, 1.0, 0.1) > 0
    assert mf_flow(eps, 4.1, 1.0, 0.1) < 0


def test_invalid_rates():
    with pytest.raises(InvalidRates):
        mf_fixed_points(1.0, 0.0, 0.1)
    with pytest.raises(InvalidRates):
        mf_fixed_points(1.0, 1.0, 0.0)


def test_lower_branch_never_physical_and_stable():
    for l1 in np.linspace(-2, 3, 61):
        for l3 in np.linspace(-3, 1, 41):
            s = mf_fixed_points(10**l1, 1.0, 10**l3)
            assert not s.stable_n_minus
            if s.n_minus is not None and s.n_minus > 0:
                # Jacobian of the radial flow at the lower branch is positive
                h = 1e-7 * math.sqrt(s.n_minus)
                r = math.sqrt(s.n_minus)
                slope = (mf_flow(r + h, 10**l1, 1.0, 10**l3) - mf_flow(r - h, 10**l1, 1.0, 10**l3)) / (2 * h)
                assert slope > 0
            assert s.bistable == (s.stable_n0 and s.stable_n_plus and s.n_plus_physical)


def test_decoupled_rhs_reduces_to_radial_flow():
    k1, k3 = 0.3, 0.05
    z = 1.7 + 0.0j
    da, db = coupled_mf_rhs(z, z, k1, 1.0, k3, 0.0)
    assert da == db
    assert da.real == pytest.approx(float(mf_flow(1.7, k1, 1.0, k3)), rel=1e-14)


def test_in_phase_limit_cycle_is_stationary():
    k1, k3 = 0.1, 0.1
    a = math.sqrt(mf_fixed_points(k1, 1.0, k3).n_plus)
    da, db = coupled_mf_rhs(a, a, k1, 1.0, k3, 0.05)
    # only a common rotation, no change of relative phase or amplitude
    assert abs(da.real) < 1e-12 and abs(db.real) < 1e-12
    assert da == db


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_relative_phase_locks_to_zero_or_pi(seed):
    rng = np.random.default_rng(seed)
    a0 = complex(*rng.normal(size=2)) * 2
    b0 = complex(*rng.normal(size=2)) * 2
    _, a, b = integrate_coupled_mf(a0, b0, 0.1, 1.0, 1.0, 0.3, 1000.0, n_samples=11)
    phi = relative_phase(a[-1], b[-1])
    assert min(abs(phi), abs(abs(phi) - math.pi)) < 1e-3


def test_sum_difference_equations_match_full_rhs():
    k1, k3, J = 0.2, 0.1, 0.05
    r, R, phi = 0.3, 5.0, 0.7
    alpha = 0.5 * (R + r) * np.exp(0.5j * phi)
    beta = 0.5 * (R - r) * np.exp(-0.5j * phi)
    da, db = coupled_mf_rhs(alpha, beta, k1, 1.0, k3, J)
    h = 1e-7
    a1, b1 = alpha + h * da, beta + h * db
    phi_dot = (relative_phase(a1, b1) - phi) / h
    r_dot = ((abs(a1) - abs(b1)) - r) / h
    ref_phi, ref_r = sum_difference_rhs(r, R, phi, k1, 1.0, k3, J)
    assert phi_dot == pytest.approx(ref_phi, rel=1e-5, abs=1e-7)
    assert r_dot == pytest.approx(ref_r, rel=1e-5, abs=1e-7)


def test_pseudo_potential_values():
    R = 2 * math.sqrt(68.6)
    u = pseudo_potential(1e-2, 1e-2, R)
    assert u.amplitude == pytest.approx(1.6e-3 / (0.15 * 274.4**2), rel=1e-12)
    assert pseudo_potential(math.sqrt(2) * 1e-2, 1e-2, R).amplitude == pytest.approx(2 * u.amplitude)
    phi, vals = pseudo_potential(0.0, 1e-2, R).sample()
    assert np.all(vals == 0)
    phi, vals = u.sample(360)
    assert set(np.argsort(vals)[:2]) == {0, 180}
    assert set(np.argsort(vals)[-2:]) == {90, 270}
    assert u.valid() and not u.valid(r=R)


@pytest.mark.parametrize("phi0", [0.4, 1.2, 2.0, 2.8, -0.9, -2.3])
def test_reduced_and_full_flows_agree_on_direction(phi0):
    k1, k3, J = 0.1, 0.1, 0.01
    n = mf_fixed_points(k1, 1.0, k3).n_plus
    a = math.sqrt(n)
    R = 2 * a
    _, al, be = integrate_coupled_mf(a * np.exp(0.5j * phi0), a * np.exp(-0.5j * phi0), k1, 1.0, k3, J, 2.0, 5)
    r = np.abs(al) - np.abs(be)
    assert np.abs(r).max() / R < 0.05
    moved = relative_phase(al[-1], be[-1]) - phi0
    force = pseudo_potential(J, k3, R).force(phi0)
    assert np.sign(moved) == np.sign(force)
