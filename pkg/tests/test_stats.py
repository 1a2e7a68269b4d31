import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from growthsde import gompertz, logistic
from growthsde import stats as gs
from growthsde.core import AnalyticLaw, GrowthSdeError
from growthsde.gompertz import GompertzParams
from growthsde.logistic import ThetaLogisticParams
from growthsde.transforms import CoefficientField, gompertz_field, logistic_field

# |ln 2 - 1|: distance from the exponential(1) median to its mean (mpmath, 30 digits)
EXP_MEDIAN_GAP = 0.306852819440054690582767878542


@pytest.mark.parametrize(
    "p,point,segment",
    [(0.3, 0.0, (0.0, 0.0)), (0.5, 0.0, (0.0, 1.0)), (0.7, 1.0, (1.0, 1.0))],
)
def test_bernoulli_medians(p, point, segment):
    # P(X = 1) = p
    qf = gs.QuantileFunction.from_discrete([0.0, 1.0], [1 - p, p])
    med = gs.median(qf)
    assert med.point == point and med.segment == segment


def test_discrete_quantile_is_left_continuous():
    qf = gs.QuantileFunction.from_discrete([1.0, 2.0, 3.0], [0.25, 0.25, 0.5])
    assert gs.quantile(qf, [0.1, 0.25, 0.26, 0.5, 0.51, 0.99]).tolist() == [1, 1, 2, 2, 3, 3]
    with pytest.raises(ValueError):
        gs.quantile(qf, 1.0)
    with pytest.raises(ValueError):
        gs.QuantileFunction.from_discrete([0.0, 1.0], [0.5, 0.6])


def test_normal_and_lognormal_medians():
    assert gs.median(AnalyticLaw.normal(1.7, 0.4)).point == pytest.approx(1.7, abs=1e-12)
    assert gs.median(AnalyticLaw.lognormal(0.3, 2.0)).point == pytest.approx(math.exp(0.3), rel=1e-12)
    assert gs.median(AnalyticLaw.degenerate(2.5)).segment == (2.5, 2.5)


def test_sample_median_even_size_segment():
    med = gs.median(np.array([4.0, 1.0, 3.0, 2.0]))
    assert med.point == 2.0 and med.segment == (2.0, 3.0)
    assert gs.median(np.array([5.0, 1.0, 3.0])).segment == (3.0, 3.0)


def test_cdf_with_flat_part_has_median_segment():
    # uniform mass 1/2 on [0, 1] and 1/2 on [2, 3]
    cdf = lambda x: np.clip(x, 0, 1) / 2 + np.clip(x - 2, 0, 1) / 2
    med = gs.median(gs.QuantileFunction.from_cdf(cdf, (-1.0, 4.0)))
    assert med.point == pytest.approx(1.0, abs=1e-9)
    assert med.segment[1] == pytest.approx(2.0, abs=1e-9)


def test_median_result_validation():
    with pytest.raises(ValueError):
        gs.MedianResult(1.0, (0.0, 2.0))
    with pytest.raises(ValueError):
        gs.MedianResult(2.0, (2.0, 1.0))


def test_median_mean_bound_exponential():
    x = AnalyticLaw.gamma(1.0, 1.0).sample(np.random.default_rng(0), 200_000)
    assert abs(gs.median(x).point - x.mean()) == pytest.approx(EXP_MEDIAN_GAP, abs=0.01)
    assert EXP_MEDIAN_GAP <= math.sqrt(2)
    assert gs.median_bound_check(x, x.mean(), 2.0)
    assert gs.median_bound_check(x, x.mean(), 1.0)
    with pytest.raises(ValueError):
        gs.median_bound_check(x, 0.0, 0.5)


def test_median_bound_check_gompertz_marginals():
    p = GompertzParams(1.0, 0.5)
    rng = np.random.default_rng(1)
    for t in (0.3, 1.0, 5.0):
        x = gompertz.transition_law(p, 0.2, 0.0, t).sample(rng, 20_000)
        for a in (x.mean(), 0.0, 10.0):
            assert gs.median_bound_check(x, a)


def test_median_bound_holds_with_far_centre():
    x = np.array([0.0, 0.0, 0.0, 100.0])
    assert gs.median_bound_check(x, 100.0)


@pytest.mark.parametrize(
    "T,expect",
    [
        (math.exp, lambda m: math.exp(m)),
        (lambda v: 0.5 * math.exp(v / 0.5), lambda m: 0.5 * math.exp(m / 0.5)),
        (lambda v: -v, lambda m: -m),
    ],
)
def test_transport_of_normal_median(T, expect):
    med = gs.median(AnalyticLaw.normal(0.4, 1.0))
    out = gs.monotone_median_transport(T, med)
    assert out.point == pytest.approx(expect(0.4), rel=1e-12)


def test_transport_swaps_segment_for_decreasing_map():
    out = gs.monotone_median_transport(lambda v: -v, gs.MedianResult(0.0, (0.0, 1.0)))
    assert out.segment == (-1.0, 0.0)


def test_transport_rejects_non_monotone_map():
    with pytest.raises(GrowthSdeError):
        gs.monotone_median_transport(lambda v: v * v, gs.median(AnalyticLaw.normal(0.0, 1.0)))


@settings(max_examples=20, deadline=None)
@given(c=st.floats(0.2, 3.0), k=st.floats(0.1, 2.0), shift=st.floats(-2.0, 2.0),
       sign=st.sampled_from([1.0, -1.0]), seed=st.integers(0, 2**31))
def test_transport_matches_empirical_median(c, k, shift, sign, seed):
    T = lambda v: sign * (c * v + np.sinh(k * v)) + shift
    x = np.random.default_rng(seed).standard_normal(1001)
    out = gs.monotone_median_transport(T, gs.median(x))
    assert out.point == pytest.approx(float(np.median(T(x))), rel=1e-12, abs=1e-12)


def test_quantile_galois_connection():
    # Q(p) <= x  iff  p <= F(x)
    rng = np.random.default_rng(2)
    sample = np.round(rng.standard_normal(200), 1)
    qf = gs.QuantileFunction.from_sample(sample)
    for p in np.linspace(0.01, 0.99, 37):
        q = gs.quantile(qf, p)
        for x in np.linspace(-3, 3, 61):
            assert (q <= x) == (p <= float(qf.cdf(x)) + 1e-12)


def test_semi_explicit_general_gompertz():
    alpha, D = 1.0, 0.5
    xs = np.linspace(0.3, 4.0, 25)
    vals, errs = gs.semi_explicit_pdf_general(gompertz_field(alpha), xs, 1.0, 1.0, 0.0, D, n_bridges=4000, seed=3)
    ref = gompertz.transition_law(GompertzParams(alpha, D), 1.0, 0.0, 1.0).pdf(xs)
    assert np.max(np.abs(vals - ref) / ref.max()) < 0.02


def test_semi_explicit_general_matches_logistic_version():
    xs = np.linspace(0.1, 3.0, 12)
    a, _ = gs.semi_explicit_pdf_general(logistic_field(), xs, 1.0, 1.0, 0.0, 0.5, n_bridges=4000, seed=4)
    b, _ = logistic.semi_explicit_transition(ThetaLogisticParams(1.0, 0.5), xs, 1.0, 1.0, 0.0, n_bridges=4000,
                                             seed=4)
    assert np.allclose(a, b, rtol=1e-6)


def test_semi_explicit_general_heat_kernel():
    ident = lambda x: np.asarray(x, dtype=float)
    field = CoefficientField(a=lambda x, t: 0 * ident(x), b=lambda x, t: 1 + 0 * ident(x), name="brownian",
                             inv_b_antideriv=ident, inv_b_antideriv_inverse=ident)
    D, tau = 0.3, 0.8
    xs = np.linspace(-2, 2, 9)
    vals, errs = gs.semi_explicit_pdf_general(field, xs, tau, 0.0, 0.0, D, n_bridges=100)
    ref = np.exp(-xs**2 / (4 * D * tau)) / math.sqrt(4 * math.pi * D * tau)
    assert np.allclose(vals, ref, rtol=1e-10)
    assert np.all(errs < 1e-12)


def test_semi_explicit_general_numeric_inverse_on_grid():
    # no closed-form antiderivative: the numeric inverse must accept the 2-D bridge array
    field = CoefficientField(a=lambda x, t: 0 * np.asarray(x, dtype=float), b=lambda x, t: 2 + 0 * np.asarray(x, dtype=float))
    D, tau = 0.25, 1.0
    val, _ = gs.semi_explicit_pdf_general(field, 0.5, tau, 0.0, 0.0, D, n_bridges=3, n_nodes=5)
    var = 2 * D * 4 * tau
    assert val == pytest.approx(math.exp(-0.25 / (2 * var)) / math.sqrt(2 * math.pi * var), rel=1e-9)


def test_semi_explicit_general_validation():
    with pytest.raises(GrowthSdeError):
        gs.semi_explicit_pdf_general(logistic_field(), 1.0, 1.0, 1.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        gs.semi_explicit_pdf_general(logistic_field(), 1.0, 1.0, 1.0, 0.0, 0.0)
