import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from growthsde import gompertz
from growthsde.core import AnalyticLaw, GrowthSdeError, TimeGrid, WienerConfig, euler_maruyama, ks_distance
from growthsde.gompertz import GompertzParams, RateFunction

# mpmath, 30 digits: 0.5**exp(-2) * exp((1 - exp(-2)) / 2)
GOMPERTZ_A2_X05_T1 = 1.40287694441649932297442575019
# D (1 - exp(-2 a t)) / a at a = 1.5, D = 0.5, t = 2
OU_VAR_A15_D05_T2 = 0.332507082607777880525651610856


def test_deterministic_path_frozen_value():
    assert gompertz.deterministic_path(2.0, 0.5, 1.0) == pytest.approx(GOMPERTZ_A2_X05_T1, rel=1e-14)


def test_deterministic_path_limits():
    assert gompertz.deterministic_path(1.0, 1.0, 60.0) == pytest.approx(math.e, rel=1e-12)
    assert gompertz.deterministic_path(0.7, 3.0, 0.0) == pytest.approx(3.0, rel=1e-15)


def test_params_validation():
    with pytest.raises(ValueError):
        GompertzParams(0.0, 0.5)
    with pytest.raises(ValueError):
        GompertzParams(1.0, -0.1)


def test_exact_paths_small_noise_matches_deterministic():
    grid = TimeGrid(0, 10, 500)
    ens = gompertz.exact_paths(GompertzParams(1.5, 1e-12), 0.3, grid, 3, seed=1)
    ref = gompertz.deterministic_path(1.5, 0.3, grid.times)
    assert np.max(np.abs(ens.values - ref)) < 1e-5


def test_exact_paths_long_time_matches_stationary_law():
    p = GompertzParams(1.0, 0.5)
    ens = gompertz.exact_paths(p, 1.0, TimeGrid(0, 20, 200), 100_000, seed=3, record_points=2)
    assert ks_distance(ens.values[:, -1], gompertz.stationary_law(p)) < 0.01


def test_log_marginal_matches_transition_law_moments():
    p = GompertzParams(0.8, 0.3)
    ens = gompertz.exact_paths(p, 2.0, TimeGrid(0, 1.5, 60), 100_000, seed=4, record_points=2)
    logx = np.log(ens.values[:, -1])
    law = gompertz.transition_law(p, 2.0, 0.0, 1.5)
    m, v = law.params
    n = logx.size
    assert abs(logx.mean() - m) < 4 * math.sqrt(v / n)
    assert abs(logx.var() / v - 1) < 4 * math.sqrt(2 / n)
    # Gaussianity of ln X: skewness and excess kurtosis inside 4-sigma bands
    assert abs(stats.skew(logx)) < 4 * math.sqrt(6 / n)
    assert abs(stats.kurtosis(logx)) < 4 * math.sqrt(24 / n)


def test_left_point_scheme_agrees_in_law():
    p = GompertzParams(1.0, 0.5)
    ens = gompertz.exact_paths(p, 1.0, TimeGrid(0, 3, 600), 50_000, seed=5, scheme="left_point", record_points=2)
    assert ks_distance(ens.values[:, -1], gompertz.transition_law(p, 1.0, 0.0, 3.0)) < 0.012


def test_random_initial_law():
    p = GompertzParams(1.0, 0.5)
    x0 = AnalyticLaw.lognormal(0.5, 0.25)
    ens = gompertz.exact_paths(p, x0, TimeGrid(0, 1, 40), 50_000, seed=6, record_points=2)
    # a lognormal start keeps ln X Gaussian: mean e^{-t} 0.5 + (1-D)(1-e^{-t}), var e^{-2t} 0.25 + D(1-e^{-2t})
    lx = np.log(ens.values[:, -1])
    e1 = math.exp(-1)
    assert lx.mean() == pytest.approx(e1 * 0.5 + 0.5 * (1 - e1), abs=0.01)
    assert lx.var() == pytest.approx(e1**2 * 0.25 + 0.5 * (1 - e1**2), rel=0.02)


def test_transition_law_limits():
    p = GompertzParams(1.3, 0.4)
    far = gompertz.transition_law(p, 2.0, 0.0, 80.0)
    stat = gompertz.stationary_law(p)
    assert far.params == pytest.approx(stat.params, rel=1e-12)
    assert stat.params == pytest.approx(((1 - 0.4) / 1.3, 0.4 / 1.3), rel=1e-14)
    near = gompertz.transition_law(p, 2.0, 0.0, 1e-9)
    assert math.exp(near.params[0]) == pytest.approx(2.0, rel=1e-8)
    assert near.params[1] < 1e-8
    with pytest.raises(GrowthSdeError):
        gompertz.transition_law(p, 2.0, 1.0, 1.0)


def test_stationary_mean_closed_form():
    p = GompertzParams(2.0, 0.5)
    assert gompertz.stationary_law(p).mean() == pytest.approx(math.exp((2 - 0.5) / (2 * 2.0)), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.2, 3.0), x0=st.floats(0.05, 5.0), t=st.floats(0.0, 8.0))
def test_zero_noise_median_matches_deterministic_path(alpha, x0, t):
    if t == 0.0:
        return
    law = gompertz.transition_law(GompertzParams(alpha, 1e-15), x0, 0.0, t)
    assert law.median() == pytest.approx(gompertz.deterministic_path(alpha, x0, t), rel=1e-9)


def test_median_is_exp_of_log_mean():
    law = gompertz.transition_law(GompertzParams(1.0, 0.5), 1.7, 0.0, 2.0)
    assert law.median() == pytest.approx(math.exp(law.params[0]), rel=1e-12)


def test_semigroup_by_resampling():
    p = GompertzParams(1.0, 0.5)
    rng = np.random.default_rng(7)
    mid = gompertz.transition_law(p, 1.0, 0.0, 0.7).sample(rng, 40_000)
    # transition s->t from each intermediate state: ln X is normal with these parameters
    tau = 0.8
    m = np.exp(-tau) * np.log(mid) + (1 - p.diffusion_d) * (1 - np.exp(-tau))
    v = p.diffusion_d * (1 - np.exp(-2 * tau))
    end = np.exp(m + math.sqrt(v) * rng.standard_normal(mid.size))
    assert ks_distance(end, gompertz.transition_law(p, 1.0, 0.0, 1.5)) < 0.02


def test_rate_function_antiderivative_check():
    r = RateFunction(lambda t: 1 + np.sin(t), lambda t: t - np.cos(t) + 1)
    assert r.check_antiderivative([0.5, 1.0, 3.0])
    bad = RateFunction(lambda t: 1 + np.sin(t), lambda t: t)
    assert not bad.check_antiderivative([0.5, 1.0, 3.0])
    assert RateFunction(lambda t: 1 + np.sin(t)).integral(0.0, 2.0) == pytest.approx(2 - math.cos(2) + 1, rel=1e-10)


def test_parametric_moments_constant_rate():
    mean, var = gompertz.parametric_ou_moments(RateFunction.constant(1.5), 0.8, 0.0, 0.0, 2.0, 2.0, 0.5)
    assert var == pytest.approx(OU_VAR_A15_D05_T2, rel=1e-9)
    assert mean == pytest.approx(0.8 * math.exp(-3.0), rel=1e-12)


def test_parametric_moments_at_start():
    assert gompertz.parametric_ou_moments(RateFunction.constant(1.0), 0.4, 0.09, 1.0, 1.0, 1.0, 0.5) == pytest.approx((0.4, 0.09))


def test_parametric_moments_vs_monte_carlo():
    rate = RateFunction(lambda t: 1 + np.sin(t), lambda t: t - np.cos(t) + 1)
    D, T, y0 = 0.5, 1.0, 5.0
    ens = euler_maruyama(gompertz.parametric_ou_field(rate), y0, TimeGrid(0, T, 1000), WienerConfig(D, 8),
                         200_000, record_points=3)
    y1, y2 = ens.values[:, 1], ens.values[:, 2]
    m, v = gompertz.parametric_ou_moments(rate, y0, 0.0, 0.0, T, T, D)
    _, c = gompertz.parametric_ou_moments(rate, y0, 0.0, 0.0, T / 2, T, D)
    assert abs(y2.mean() / m - 1) < 0.01
    assert abs(y2.var() / v - 1) < 0.01
    assert abs(np.cov(y1, y2)[0, 1] / c - 1) < 0.02


def test_parametric_transition_reduces_to_constant_rate():
    D = 1.0
    a = gompertz.parametric_transition(RateFunction.constant(0.9), 1.6, 0.0, 1.2, D)
    b = gompertz.transition_law(GompertzParams(0.9, D), 1.6, 0.0, 1.2)
    # at D = 1 the constant drift term (1 - D) vanishes and the laws coincide
    assert a.params == pytest.approx(b.params, rel=1e-10)


def test_parametric_transition_median():
    rate = RateFunction(lambda t: 1 + np.sin(t), lambda t: t - np.cos(t) + 1)
    law = gompertz.parametric_transition(rate, 2.5, 0.0, 1.0, 1.0)
    assert law.median() == pytest.approx(2.5 ** math.exp(-rate.integral(0.0, 1.0)), rel=1e-12)


def test_parametric_transition_vs_euler():
    rate = RateFunction(lambda t: 1 + np.sin(t), lambda t: t - np.cos(t) + 1)
    D = 1.0
    field = gompertz.parametric_gompertz_field(rate, D)
    ens = euler_maruyama(field, 1.5, TimeGrid(0, 1, 2000), WienerConfig(D, 9), 50_000, record_points=2)
    x = ens.marginal()
    assert ks_distance(x, gompertz.parametric_transition(rate, 1.5, 0.0, 1.0, D)) < 0.015
