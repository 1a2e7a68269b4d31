import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growthsde import logistic
from growthsde.core import AnalyticLaw, DensityCurve, GrowthSdeError, TimeGrid, WienerConfig, euler_maruyama, sample_wiener
from growthsde.transforms import (
    CoefficientField,
    LinearSdeCoefficients,
    NoStationaryLaw,
    TransformMap,
    boltzmann_stationary,
    check_constant_coeff,
    check_linearizable,
    check_process_linear,
    check_space_independent,
    check_time_compatibility,
    gompertz_field,
    inverse_map,
    ito_transform,
    linearize,
    logistic_field,
    named_field,
    qho_field,
    solve_linear_sde,
    space_independent_transform,
    theta_logistic_field,
    to_smoluchowsky,
)

LOG_MAP = TransformMap(
    h=lambda x, t: np.log(x),
    g=lambda y, t: np.exp(y),
    h_x=lambda x, t: 1.0 / np.asarray(x),
    h_xx=lambda x, t: -1.0 / np.asarray(x) ** 2,
)
RECIP_MAP = TransformMap(
    h=lambda x, t: 1.0 / np.asarray(x),
    g=lambda y, t: 1.0 / np.asarray(y),
    h_x=lambda x, t: -1.0 / np.asarray(x) ** 2,
    h_xx=lambda x, t: 2.0 / np.asarray(x) ** 3,
)
IDENTITY = TransformMap(h=lambda x, t: np.asarray(x, dtype=float), g=lambda y, t: np.asarray(y, dtype=float))


def _const(v):
    return lambda x, t: np.full_like(np.asarray(x, dtype=float), v)


YS = np.linspace(-2.0, 2.0, 9)


def test_gompertz_log_map_gives_ou_drift():
    alpha, D = 1.3, 0.4
    out = ito_transform(gompertz_field(alpha), LOG_MAP, D)
    assert np.allclose(out.a(YS, 0.0), 1 - D - alpha * YS, atol=1e-9)
    assert np.allclose(out.b(YS, 0.0), 1.0)


def test_logistic_reciprocal_map():
    D = 0.3
    ys = np.linspace(0.2, 4.0, 9)
    out = ito_transform(logistic_field(), RECIP_MAP, D)
    assert np.allclose(out.a(ys, 0.0), (2 * D - 1) * ys + 1, atol=1e-9)
    assert np.allclose(out.b(ys, 0.0), -ys)


def test_identity_map_leaves_field_unchanged():
    f = gompertz_field(0.7)
    out = ito_transform(f, IDENTITY, 0.5)
    xs = np.linspace(0.2, 3, 7)
    assert np.allclose(out.a(xs, 0.0), f.a(xs, 0.0))
    assert np.allclose(out.b(xs, 0.0), f.b(xs, 0.0))


def test_non_invertible_map_rejected():
    bad = TransformMap(h=lambda x, t: np.asarray(x) ** 2, g=lambda y, t: np.sqrt(y))
    field = CoefficientField(a=_const(0.0), b=_const(1.0), domain=(-2.0, 2.0))
    with pytest.raises(GrowthSdeError):
        ito_transform(field, bad, 1.0)


@pytest.mark.parametrize("field,tmap", [
    (gompertz_field(1.0), LOG_MAP),
    (logistic_field(), RECIP_MAP),
    (theta_logistic_field(2.0), LOG_MAP),
])
def test_transform_then_inverse_recovers_coefficients(field, tmap):
    D = 0.35
    there = ito_transform(field, tmap, D)
    back_map = TransformMap(h=tmap.g, g=tmap.h)
    back = ito_transform(there, back_map, D, probe=False)
    xs = np.linspace(0.3, 3.0, 11)
    assert np.allclose(back.a(xs, 0.0), field.a(xs, 0.0), rtol=1e-8, atol=1e-8)
    assert np.allclose(back.b(xs, 0.0), field.b(xs, 0.0), rtol=1e-8, atol=1e-8)
    assert inverse_map(tmap).h is tmap.g


def test_smoluchowsky_theta_logistic():
    D, theta = 0.3, 2.0
    tmap, unit = to_smoluchowsky(theta_logistic_field(theta), D)
    ys = np.linspace(-1.0, 1.0, 7)
    assert np.allclose(unit.a(ys, 0.0), 1 - D - np.exp(theta * ys), atol=1e-9)
    assert np.allclose(unit.b(ys, 0.0), 1.0)


def test_smoluchowsky_gompertz_is_ou_with_constant_drift():
    D, alpha = 0.5, 2.0
    _, unit = to_smoluchowsky(gompertz_field(alpha), D)
    assert np.allclose(unit.a(YS, 0.0), 1 - D - alpha * YS, atol=1e-9)


def test_smoluchowsky_unit_noise_is_identity():
    field = CoefficientField(a=lambda x, t: -np.asarray(x), b=_const(1.0))
    tmap, unit = to_smoluchowsky(field, 0.5)
    xs = np.linspace(-2, 2, 5)
    assert np.allclose(tmap.h(xs, 0.0) - tmap.h(0.0, 0.0), xs)
    assert np.allclose(unit.a(xs, 0.0), -xs, atol=1e-9)


def test_constant_coefficient_check():
    D = 0.6
    ok, _ = check_constant_coeff(
        CoefficientField(a=lambda x, t: D * np.asarray(x), b=lambda x, t: np.asarray(x, dtype=float),
                         domain=(0.0, math.inf)), D)
    assert ok
    ok, resid = check_constant_coeff(gompertz_field(1.0), D)
    assert not ok and resid > 1e-3
    ok, _ = check_constant_coeff(CoefficientField(a=_const(2.0), b=_const(3.0)), D)
    assert ok


def test_space_independence_check():
    assert check_space_independent(gompertz_field(1.7), 0.5) == pytest.approx(1.7, rel=1e-6)
    assert check_space_independent(logistic_field(), 0.5) is None
    assert check_space_independent(CoefficientField(a=_const(0.0), b=_const(1.0)), 0.5) == pytest.approx(0.0, abs=1e-12)


def test_gompertz_space_independent_transform():
    alpha, D = 1.0, 0.5
    res = space_independent_transform(gompertz_field(alpha), alpha, D)
    ts = np.array([0.0, 0.5, 2.0])
    assert np.allclose(res.a_hat(ts), (1 - D) * np.exp(alpha * ts))
    assert np.allclose(res.b_hat(ts), np.exp(alpha * ts))
    # Z(t) = e^{alpha t} ln X(t); its law must agree with the Gompertz transition law
    from growthsde import gompertz
    y, t = 2.0, 1.3
    law_z = res.solution_law(math.log(y), t, D)
    lt = gompertz.transition_law(gompertz.GompertzParams(alpha, D), y, 0.0, t)
    assert law_z.params[0] * math.exp(-alpha * t) == pytest.approx(lt.params[0], rel=1e-12)
    assert law_z.params[1] * math.exp(-2 * alpha * t) == pytest.approx(lt.params[1], rel=1e-12)


def test_space_independent_transform_rejects_wrong_constant():
    with pytest.raises(GrowthSdeError):
        space_independent_transform(gompertz_field(1.0), 2.0, 0.5)


def test_linearizable_detection():
    assert check_linearizable(logistic_field(), 0.5)[0] == pytest.approx(-1.0, rel=1e-8)
    assert check_linearizable(theta_logistic_field(3.0), 0.2)[0] == pytest.approx(-3.0, rel=1e-8)
    assert check_linearizable(qho_field(1, 1.0, 1.0, (0.0, math.inf)), 1.0)[0] is None


def test_linearize_logistic_coefficients():
    D = 0.3
    tmap, co = linearize(logistic_field(), -1.0, D)
    xs = np.array([0.5, 1.0, 2.0])
    assert np.allclose(tmap.h(xs, 0.0), 1.0 / xs, rtol=1e-10)
    assert (co.a0, co.a1, co.b0, co.b1) == pytest.approx((1.0, 2 * D - 1, 0.0, -1.0), abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(theta=st.floats(0.3, 4.0), D=st.floats(0.05, 0.9))
def test_linearize_theta_logistic_coefficients(theta, D):
    tmap, co = linearize(theta_logistic_field(theta), -theta, D)
    assert co.a0 == pytest.approx(theta, rel=1e-8)
    assert co.a1 == pytest.approx(((1 + theta) * D - 1) * theta, rel=1e-8, abs=1e-10)
    assert co.b1 == pytest.approx(-theta, rel=1e-12)
    assert co.b0 == pytest.approx(0.0, abs=1e-12)
    assert tmap.h(2.0, 0.0) == pytest.approx(2.0 ** (-theta), rel=1e-9)


def test_linearize_theta2_frozen_value():
    _, co = linearize(theta_logistic_field(2.0), -2.0, 0.25)
    assert co.a1 == pytest.approx(-0.5, abs=1e-12)


def test_process_linear_predicate():
    ou = CoefficientField(a=lambda x, t: -np.asarray(x), b=_const(1.0))
    assert check_process_linear(ou, 0.5)
    assert not check_process_linear(logistic_field(), 0.5)


def test_time_compatibility_residual_on_gompertz_is_zero():
    assert check_time_compatibility(gompertz_field(1.0), 0.5, 0.0) < 1e-6
    assert check_time_compatibility(logistic_field(), 0.5, 0.0) > 1e-3


def test_solve_linear_sde_ou_mean():
    co = LinearSdeCoefficients(a0=0.0, a1=-1.0, b0=1.0, b1=0.0)
    grid = TimeGrid(0, 2, 400)
    ens = solve_linear_sde(co, 1.5, grid, WienerConfig(0.5, 3), 20_000)
    m = ens.values.mean(axis=0)
    sd = np.sqrt(0.5 * (1 - np.exp(-2 * grid.times)) / 2e4) + 1e-12
    assert np.all(np.abs(m - 1.5 * np.exp(-grid.times)) < 5 * sd + 2 * grid.dt)


def test_solve_linear_sde_small_noise_is_ode_solution():
    co = LinearSdeCoefficients(a0=2.0, a1=-0.5, b0=0.0, b1=0.0)
    grid = TimeGrid(0, 3, 3000)
    ens = solve_linear_sde(co, 1.0, grid, WienerConfig(1e-12, 0), 2)
    t = grid.times
    ref = 4.0 + (1.0 - 4.0) * np.exp(-0.5 * t)
    assert np.max(np.abs(ens.values - ref)) < 1e-6


def test_linear_route_matches_logistic_pathwise_solver_on_shared_noise():
    D = 0.4
    grid = TimeGrid(0, 5, 2000)
    cfg = WienerConfig(D, 17)
    _, co = linearize(logistic_field(), -1.0, D)
    y = solve_linear_sde(co, 1.0 / 0.6, grid, cfg, 50)
    x = logistic.pathwise_solution(logistic.ThetaLogisticParams(1.0, D), 0.6, grid, 50, seed=17)
    assert np.max(np.abs(1.0 / y.values - x.values)) < 5 * grid.dt


def test_ito_product_rule_statistically():
    # X is a Gompertz path (b = x), Y = W on the same noise, so B_X B_Y = X
    D = 0.5
    grid = TimeGrid(0, 1, 2000)
    cfg = WienerConfig(D, 21)
    x = euler_maruyama(gompertz_field(1.0), 1.0, grid, cfg, 200).values
    w = sample_wiener(grid, cfg, 200).values
    dx, dw = np.diff(x, axis=1), np.diff(w, axis=1)
    d_xy = np.diff(x * w, axis=1)
    resid = d_xy - x[:, :-1] * dw - w[:, :-1] * dx - 2 * D * x[:, :-1] * grid.dt
    total = resid.sum(axis=1)
    assert abs(total.mean()) < 4 * total.std() / math.sqrt(total.size)
    assert np.sqrt(np.mean(total**2)) < 10 * math.sqrt(grid.dt)


def test_boltzmann_transformed_gompertz_is_normal():
    alpha, D = 1.5, 0.4
    field = CoefficientField(a=lambda y, t: 1 - D - alpha * np.asarray(y), b=_const(1.0), bracket=(-3.0, 4.0))
    law = boltzmann_stationary(field, D)
    assert law.family == "normal"
    assert law.params == pytest.approx(((1 - D) / alpha, D / alpha), rel=1e-8)


def test_boltzmann_logistic_is_gamma():
    D = 0.3
    law = boltzmann_stationary(logistic_field(), D)
    assert law.family == "gamma"
    assert law.params == pytest.approx(((1 - D) / D, 1 / D), rel=1e-8)


@pytest.mark.parametrize("D", [1.0, 1.5])
def test_boltzmann_logistic_large_noise_has_no_stationary_law(D):
    res = boltzmann_stationary(logistic_field(), D)
    assert isinstance(res, NoStationaryLaw)
    assert res.endpoint == 0.0


def test_boltzmann_numeric_fallback_is_normalized():
    # quartic potential is not a named family
    field = CoefficientField(a=lambda x, t: -np.asarray(x) ** 3, b=_const(1.0), bracket=(-4.0, 4.0))
    res = boltzmann_stationary(field, 0.5)
    assert isinstance(res, DensityCurve)
    assert res.mass() == pytest.approx(1.0, abs=1e-6)


def test_boltzmann_is_fixed_point_of_fpe_evolver():
    from growthsde import fokkerplanck as fp

    D = 0.5
    law = boltzmann_stationary(logistic_field(), D)
    prob = fp.logistic_problem(D)
    x = np.geomspace(1e-6, 20, 3000)
    f0 = DensityCurve(x, law.pdf(x))
    f1 = fp.evolve(prob, f0, 1.0, n_time_steps=200)
    assert np.max(np.abs(f1(x) - f0.f_values)) < 1e-4


def test_named_fields():
    assert named_field("gompertz(2)").a(1.0, 0.0) == pytest.approx(1.0)
    assert named_field("logistic").a(2.0, 0.0) == pytest.approx(2.0 * (1 - 2.0))
    assert named_field("theta-logistic(2)").name
    f = named_field("qho(1,1,1)")
    assert f.a(math.sqrt(2), 0.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        named_field("nonsense(")


def test_field_partials_match_finite_differences():
    for f in (gompertz_field(1.2), logistic_field(), theta_logistic_field(2.5)):
        assert f.check_partials()
