import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from growthsde.core import (
    AnalyticLaw,
    DensityCurve,
    EmptyEnsembleError,
    GrowthSdeError,
    PathEnsemble,
    TimeGrid,
    WienerConfig,
    euler_maruyama,
    ks_distance,
    normal_increments,
    sample_wiener,
)
from growthsde.transforms import CoefficientField, gompertz_field
from growthsde import gompertz


def _const(v):
    return lambda x, t: np.full_like(np.asarray(x, dtype=float), v)


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 0)
    g = TimeGrid(0.0, 2.0, 8)
    assert g.dt == 0.25
    assert g.coarsen(4).n_steps == 2
    with pytest.raises(ValueError):
        g.coarsen(3)


def test_wiener_config_rejects_nonpositive_d():
    with pytest.raises(ValueError):
        WienerConfig(0.0)


def test_wiener_variance_uses_two_d_convention():
    ens = sample_wiener(TimeGrid(0, 1, 1000), WienerConfig(0.5, 3), 100_000, record_points=2)
    w1 = ens.values[:, -1]
    # Var W(1) = 2 D t = 1; standard error of the sample variance is sqrt(2/n)
    assert abs(w1.var() - 1.0) < 3 * math.sqrt(2 / 1e5)


def test_wiener_variance_at_t2():
    ens = sample_wiener(TimeGrid(0, 2, 200), WienerConfig(1.0, 4), 50_000, record_points=2)
    assert abs(ens.values[:, -1].var() / 4.0 - 1) < 0.03


def test_increment_moments():
    grid = TimeGrid(0, 1, 50)
    cfg = WienerConfig(0.7, 9)
    dw = normal_increments(grid, cfg, 0, 100_000)[:, 0]
    target = 2 * 0.7 * grid.dt
    assert abs(dw.mean()) < 4 * math.sqrt(target / dw.size)
    assert abs(dw.var() / target - 1) < 0.01


def test_empty_ensemble():
    with pytest.raises(EmptyEnsembleError):
        sample_wiener(TimeGrid(0, 1, 10), WienerConfig(1.0), 0)


def test_worker_count_independence():
    grid = TimeGrid(0, 1, 64)
    cfg = WienerConfig(0.5, 12)
    a = sample_wiener(grid, cfg, 5000, workers=1).values
    b = sample_wiener(grid, cfg, 5000, workers=8).values
    assert np.array_equal(a, b)


def test_regeneration_is_bit_exact_for_euler():
    field = gompertz_field(1.0)
    grid = TimeGrid(0, 1, 100)
    cfg = WienerConfig(0.5, 5)
    a = euler_maruyama(field, 1.0, grid, cfg, 2000, workers=1).values
    b = euler_maruyama(field, 1.0, grid, cfg, 2000, workers=4).values
    assert np.array_equal(a, b)


def test_prefix_paths_do_not_depend_on_ensemble_size():
    grid = TimeGrid(0, 1, 16)
    cfg = WienerConfig(1.0, 1)
    small = sample_wiener(grid, cfg, 10).values
    large = sample_wiener(grid, cfg, 100).values
    assert np.array_equal(small, large[:10])


def test_euler_zero_drift_unit_noise_recovers_wiener():
    field = CoefficientField(a=_const(0.0), b=_const(1.0), name="bm")
    grid = TimeGrid(0, 1, 32)
    cfg = WienerConfig(0.5, 2)
    em = euler_maruyama(field, 0.0, grid, cfg, 1000)
    w = sample_wiener(grid, cfg, 1000)
    assert np.allclose(em.values, w.values, atol=1e-12)


def test_euler_ou_stationary_variance_equals_d():
    D = 0.4
    field = CoefficientField(a=lambda x, t: -np.asarray(x), b=_const(1.0), name="ou")
    ens = euler_maruyama(field, 0.0, TimeGrid(0, 8, 800), WienerConfig(D, 6), 40_000, record_points=2)
    x = ens.values[:, -1]
    # Euler bias for the OU variance is D * dt / 2 relative
    assert abs(x.var() / D - 1) < 0.03
    assert ks_distance(x, AnalyticLaw.normal(0.0, D)) < 0.015


def test_euler_gompertz_small_noise_tracks_deterministic_path():
    field = gompertz_field(1.0)
    grid = TimeGrid(0, 5, 5000)
    ens = euler_maruyama(field, 0.5, grid, WienerConfig(1e-8, 1), 4)
    ref = gompertz.deterministic_path(1.0, 0.5, grid.times)
    assert np.max(np.abs(ens.values - ref)) < 5 * grid.dt


def test_euler_keeps_positive_domain():
    field = gompertz_field(1.0)
    ens = euler_maruyama(field, 0.05, TimeGrid(0, 2, 20), WienerConfig(2.0, 8), 2000)
    vals = ens.values[ens.valid]
    assert np.all(vals > 0)


def test_euler_flags_paths_that_cannot_be_resolved():
    # drift pushes every state out of (0, inf) no matter how small the step
    field = CoefficientField(
        a=lambda x, t: -1.0 / np.asarray(x) ** 3, b=_const(1.0), domain=(0.0, math.inf), name="sink"
    )
    ens = euler_maruyama(field, 1e-3, TimeGrid(0, 1, 4), WienerConfig(1e-6, 0), 3, max_halvings=3)
    assert np.all(ens.invalid_step == 0)
    assert np.all(np.isnan(ens.values[:, 1:]))
    assert ens.valid.sum() == 0


def test_ks_distance_self_sample():
    law = AnalyticLaw.gamma(2.0, 1.5)
    x = law.sample(np.random.default_rng(0), 100_000)
    assert ks_distance(x, law) < 1.63 / math.sqrt(x.size)


def test_ks_distance_constant_sample():
    assert ks_distance(np.zeros(100), AnalyticLaw.normal(0, 1)) >= 0.5


def test_ks_distance_lognormal_vs_generating_normal():
    # the normal puts half its mass below 0 where the lognormal has none, and
    # the lognormal has a heavier right tail; the oracle is the exact sup
    rng = np.random.default_rng(1)
    x = np.exp(rng.normal(0.0, 1.0, 100_000))
    d = ks_distance(x, AnalyticLaw.normal(0.0, 1.0))
    # exact: sup over x>0 of |Phi(ln x) - Phi(x)|, attained near x=1 side
    xs = np.linspace(1e-6, 10, 200_001)
    from scipy import stats
    exact = np.max(np.abs(stats.norm.cdf(np.log(xs)) - stats.norm.cdf(xs)))
    exact = max(exact, 0.5)
    assert abs(d - exact) < 0.01


def test_ks_distance_empty():
    with pytest.raises(GrowthSdeError):
        ks_distance([], AnalyticLaw.normal(0, 1))


LAWS = [
    AnalyticLaw.normal(0.3, 2.0),
    AnalyticLaw.lognormal(0.1, 0.5),
    AnalyticLaw.gamma(1.7, 2.5),
    AnalyticLaw.generalized_gamma(2.0, 1.3, 0.8),
    AnalyticLaw.inverse_gamma(3.0, 2.0),
    AnalyticLaw.log_gamma(2.0, 1.5),
]


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.family)
def test_law_pdf_normalizes(law):
    lo, hi = law.support
    mass = integrate.quad(lambda v: float(law.pdf(v)), lo, hi, epsabs=1e-12, epsrel=1e-12, limit=400)[0]
    assert abs(mass - 1) < 1e-8


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.family)
def test_law_json_round_trip(law):
    back = AnalyticLaw.from_json(law.to_json())
    assert back == law


def test_law_parameter_domains():
    with pytest.raises(ValueError):
        AnalyticLaw.gamma(-1.0, 1.0)
    with pytest.raises(ValueError):
        AnalyticLaw.normal(0.0, 0.0)
    with pytest.raises(ValueError):
        AnalyticLaw("weibull", (1.0,))


def test_degenerate_law():
    law = AnalyticLaw.degenerate(2.0)
    assert law.mean() == 2.0 and law.var() == 0.0
    assert law.cdf(1.9) == 0.0 and law.cdf(2.0) == 1.0
    with pytest.raises(GrowthSdeError):
        law.pdf(2.0)


def test_generalized_gamma_with_unit_theta_is_gamma():
    gg = AnalyticLaw.generalized_gamma(1.0, 2.0, 0.5)
    g = AnalyticLaw.gamma(2.0, 2.0)
    xs = np.linspace(0.01, 5, 50)
    assert np.allclose(gg.pdf(xs), g.pdf(xs), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(mu=st.floats(-3, 3), v=st.floats(0.05, 4))
def test_lognormal_median_is_exp_log_mean(mu, v):
    law = AnalyticLaw.lognormal(mu, v)
    assert math.isclose(law.median(), math.exp(mu), rel_tol=1e-10)


def test_density_curve_csv_round_trip(tmp_path):
    x = np.linspace(-8, 8, 401)
    curve = DensityCurve(x, np.exp(-x * x / 2) / math.sqrt(2 * math.pi), "n01")
    path = tmp_path / "c.csv"
    curve.to_csv(path, {"seed": 1})
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    body = np.array([row.split(",") for row in lines if not row.startswith("#")][1:], dtype=float)
    assert body.shape == (401, 2)
    assert np.array_equal(body[:, 0], x) and np.array_equal(body[:, 1], curve.f_values)
    assert abs(curve.mass() - 1) < 1e-6


def test_ensemble_csv_has_time_header(tmp_path):
    ens = sample_wiener(TimeGrid(0, 1, 4), WienerConfig(1.0, 0), 3)
    path = tmp_path / "e.csv"
    ens.to_csv(path)
    rows = [r for r in path.read_text().splitlines() if not r.startswith("#")]
    assert np.allclose([float(v) for v in rows[0].split(",")], ens.times)
    assert len(rows) == 4


def test_ensemble_shape_validation():
    with pytest.raises(ValueError):
        PathEnsemble(TimeGrid(0, 1, 4), np.zeros((2, 4)), 0, "x")


def test_density_curve_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        DensityCurve(np.array([0.0, 2.0, 1.0]), np.ones(3))
