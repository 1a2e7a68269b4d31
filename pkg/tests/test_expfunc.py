import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from growthsde import expfunc
from growthsde.core import GrowthSdeError, TimeGrid, WienerConfig

# mpmath, 30 digits, D = 1, t = 0.5
M1_HALF = 0.648721270700128146848650787814
M2_HALF = 0.632361836021689606639304051553


def _as_dict(expr):
    return {j: c for c, j in expr.terms}


def test_first_four_moments_exact():
    F = Fraction
    assert _as_dict(expfunc.moment_recursive(1)) == {1: F(1), 0: F(-1)}
    assert _as_dict(expfunc.moment_recursive(2)) == {4: F(1, 6), 1: F(-4, 6), 0: F(3, 6)}
    assert _as_dict(expfunc.moment_recursive(3)) == {
        9: F(1, 60), 4: F(-6, 60), 1: F(15, 60), 0: F(-10, 60)}
    assert _as_dict(expfunc.moment_recursive(4)) == {
        16: F(1, 840), 9: F(-8, 840), 4: F(28, 840), 1: F(-56, 840), 0: F(35, 840)}


@pytest.mark.parametrize("n", range(1, 13))
def test_recursion_equals_closed_form(n):
    assert _as_dict(expfunc.moment_recursive(n)) == _as_dict(expfunc.moment_conjecture(n))


def test_order_range():
    with pytest.raises(ValueError):
        expfunc.moment_recursive(0)
    with pytest.raises(ValueError):
        expfunc.moment_recursive(65)
    assert expfunc.moment_recursive(64).order_n == 64


def test_moment_values_frozen():
    assert expfunc.moment_recursive(1).evaluate(0.5, 1.0) == pytest.approx(M1_HALF, rel=1e-14)
    assert expfunc.moment_recursive(2).evaluate(0.5, 1.0) == pytest.approx(M2_HALF, rel=1e-14)


@pytest.mark.parametrize("n", [1, 3, 6])
def test_moments_vanish_at_zero_and_grow(n):
    m = expfunc.moment_recursive(n)
    assert m.evaluate(0.0, 0.7) == 0.0
    ts = np.linspace(1e-3, 2.0, 40)
    vals = np.array([m.evaluate(t, 0.7) for t in ts])
    assert np.all(vals > 0) and np.all(np.diff(vals) > 0)
    # M_n(t) ~ t^n for small t
    assert m.evaluate(1e-6, 0.7) / 1e-6**n == pytest.approx(1.0, rel=1e-4)


def test_root_test_profile_keeps_growing():
    prof = expfunc.root_test_profile(1.0, 12)
    assert prof.shape == (12,)
    assert np.all(np.diff(prof[4:]) > 0)


def test_sample_integral_first_moment():
    D, t = 0.5, 2.0
    ens = expfunc.sample_integral(TimeGrid(0, t, 2000), WienerConfig(D, 1), 100_000, record_points=2)
    x = ens.values[:, -1]
    assert abs(x.mean() / expfunc.moment_recursive(1).evaluate(t, D) - 1) < 0.01


def test_sample_integral_second_moment():
    D, t = 0.5, 1.0
    ens = expfunc.sample_integral(TimeGrid(0, t, 1000), WienerConfig(D, 2), 100_000, record_points=2)
    x = ens.values[:, -1]
    assert abs(np.mean(x**2) / expfunc.moment_recursive(2).evaluate(t, D) - 1) < 0.03


def test_sample_integral_small_time_ratio():
    t = 1e-3
    ens = expfunc.sample_integral(TimeGrid(0, t, 10), WienerConfig(1.0, 3), 1000, record_points=2)
    assert np.max(np.abs(ens.values[:, -1] / t - 1)) < 0.2


def test_two_time_sum_pdf_normalizes():
    s, t, D = 0.5, 1.0, 0.5
    mass = integrate.quad(lambda z: expfunc.two_time_sum_pdf(s, t, D, [z]).f_values[0], 0, np.inf,
                          epsabs=1e-12, limit=400)[0]
    assert abs(mass - 1) < 1e-6


def test_two_time_sum_pdf_support():
    curve = expfunc.two_time_sum_pdf(0.5, 1.0, 0.5, np.array([-1.0, 0.0, 1e-13, 0.5]))
    assert np.all(curve.f_values[:3] == 0.0)
    assert curve.f_values[3] >= 0.0


def test_two_time_sum_cdf_consistent_with_pdf():
    s, t, D = 0.4, 1.1, 0.6
    z = np.linspace(0.05, 12, 2000)
    f = expfunc.two_time_sum_pdf(s, t, D, z).f_values
    F = expfunc.two_time_sum_cdf(s, t, D, z)
    assert np.max(np.abs(F[-1] - F[0] - np.trapezoid(f, z))) < 1e-5
    assert np.all(np.diff(F) >= -1e-14)


def test_two_time_sum_samples_vs_cdf():
    s, t, D = 0.5, 1.0, 0.5
    x = np.sort(expfunc.two_time_sum_samples(s, t, WienerConfig(D, 4), 200_000))
    F = expfunc.two_time_sum_cdf(s, t, D, x[::100])
    emp = np.arange(0, x.size, 100) / x.size
    assert np.max(np.abs(F - emp)) < 0.01


def test_two_time_sum_rejects_bad_times():
    with pytest.raises((ValueError, GrowthSdeError)):
        expfunc.two_time_sum_pdf(1.0, 0.5, 0.5, [1.0])


def test_velocity_field_near_time_zero():
    t = 0.01
    res = expfunc.velocity_field_estimate(t, WienerConfig(0.5, 5), 100_000)
    v = res.velocity
    ok = ~np.isnan(v)
    assert np.all(v[ok] > 0)
    x = res.curve.x_grid
    # small-t Gaussian regression: X ~ t + int W, e^{W(t)} ~ 1 + W(t), hence
    # E[e^{W(t)} | X = x] ~ 1 + (3/2)(x - t)/t
    near = ok & (np.abs(x - t) < 0.1 * t)
    assert near.any()
    slope, icpt = np.polyfit(x[near] - t, v[near], 1)
    assert icpt == pytest.approx(1.0, abs=0.01)
    assert slope * t == pytest.approx(1.5, rel=0.1)


@pytest.mark.slow
def test_velocity_field_continuity_residual():
    res = expfunc.velocity_field_estimate(0.5, WienerConfig(0.5, 6), 1_000_000, dt_fd=0.01)
    assert res.residual_l1 < 0.05
    assert np.nanmin(res.velocity) > 0


@pytest.mark.slow
def test_joint_fpe_residual_shrinks_with_samples():
    small = expfunc.joint_fpe_residual(0.5, WienerConfig(0.5, 7), 100_000)
    large = expfunc.joint_fpe_residual(0.5, WienerConfig(0.5, 7), 1_000_000)
    assert large.residual_l1 < small.residual_l1
    assert large.y_marginal_ks < 0.01
    # no paths carry X near 0, as needed to drop the boundary term
    assert large.low_x_mass == 0.0
