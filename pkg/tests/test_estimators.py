import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eicest import losses as L
from eicest import suite
from eicest.errors import IllDefinedEstimator, ModelInvariantError
from eicest.estimators import (
    EstimatorSpec,
    eic_metric,
    estimate,
    log_wf_metric,
    loss_to_penalty,
    pmle_to_loss,
)
from eicest.model import EstimationProblem, GaussianKnownSigma, GaussianParams, UniformBox, posterior_unnorm

from conftest import box


def test_dmap_two_point():
    p = suite.golden_discrete_problem()
    r = estimate(EstimatorSpec("DMAP"), p, [0.0])
    assert [q.tolist() for q in r.points] == [[1.0]]


def test_bayes_two_point_golden():
    p = suite.golden_discrete_problem()
    r = estimate(EstimatorSpec("Bayes", L.quadratic(), extend_to_box=True), p, [0.0])
    assert r.point[0] == pytest.approx(1.1, abs=1e-6)
    assert r.diagnostics["expected_loss"][0] == pytest.approx(0.09, abs=1e-6)


def test_bayes_on_finite_set_only():
    p = suite.golden_discrete_problem()
    r = estimate(EstimatorSpec("Bayes", L.quadratic()), p, [0.0])
    assert r.point[0] == 1.0


@pytest.mark.parametrize("loss", [L.quadratic(), L.fdivergence("Hellinger2"), L.fdivergence("KL")],
                         ids=lambda l: l.name)
def test_eic_is_dmap_on_finite_sets(loss):
    p = suite.finite_binomial_problem()
    for x in ([0], [3], [9]):
        a = estimate(EstimatorSpec("EIC", loss), p, x)
        b = estimate(EstimatorSpec("DMAP"), p, x)
        assert [q.tolist() for q in a.points] == [q.tolist() for q in b.points]


def test_eic_quadratic_is_cmap(binomial10):
    for x in ([2], [7]):
        a = estimate(EstimatorSpec("EIC", L.quadratic()), binomial10, x)
        b = estimate(EstimatorSpec("CMAP"), binomial10, x)
        assert a.distance_to(b) < 1e-4


def test_eic_metric_quadratic_constant(gauss_mean):
    for t in (-0.5, 0.7):
        m = eic_metric(L.quadratic(), gauss_mean, [0.4], [t])
        assert m == pytest.approx(posterior_unnorm(gauss_mean, t, [0.4]) / math.sqrt(2.0), rel=1e-6)


def test_eic_metric_binomial_hellinger():
    s = box(0.01, 0.99)
    from eicest.model import BinomialN

    p = EstimationProblem(s, BinomialN(10), UniformBox(s))
    m = eic_metric(L.fdivergence("Hellinger2"), p, [7], [0.5])
    flat = 1.0 / 0.98  # uniform prior density on the box
    assert m == pytest.approx(math.comb(10, 7) * 0.5 ** 10 * flat / math.sqrt(10.0), rel=1e-4)
    assert m / flat == pytest.approx(0.037059, abs=5e-6)


def test_wf_metric_uses_fisher(binomial10):
    t = 0.4
    lw = log_wf_metric(binomial10, [7], [t])
    expected = math.log(posterior_unnorm(binomial10, t, [7])) - 0.5 * math.log(10 / (t * (1 - t)))
    assert lw == pytest.approx(expected, rel=1e-12)


def test_wf_binomial_closed_form(binomial10):
    # Beta(2, 2) prior: WF maximises theta^(k+1.5) (1-theta)^(n-k+0.5)... in closed form (k+1.5)/(n+3)
    r = estimate(EstimatorSpec("WF"), binomial10, [7])
    assert r.point[0] == pytest.approx(8.5 / 13.0, abs=1e-6)


@pytest.mark.parametrize("gen", ["Hellinger2", "KL", "ChiSquared"])
def test_eic_equals_wf(gen, binomial10, gauss_mean):
    for p, x in ((binomial10, [3]), (gauss_mean, [1.4])):
        a = estimate(EstimatorSpec("EIC", L.fdivergence(gen)), p, x)
        b = estimate(EstimatorSpec("WF"), p, x)
        assert a.distance_to(b) < 1e-4


def test_wf_gaussian_sigma_showcase():
    p = suite.wf_showcase(10)
    x = suite.showcase_sample()
    wf = estimate(EstimatorSpec("WF"), p, x).point
    cm = estimate(EstimatorSpec("CMAP"), p, x).point
    assert wf[1] ** 2 == pytest.approx(2.0, rel=1e-3)
    assert cm[1] ** 2 == pytest.approx(18.0 / 11.0, rel=1e-3)


def test_pmle_prior_penalty_is_cmap(binomial10):
    g = lambda t: math.exp(float(binomial10.prior.log_density1(np.asarray(t, dtype=float))))
    a = estimate(EstimatorSpec("EIC", pmle_to_loss(g, binomial10)), binomial10, [7])
    b = estimate(EstimatorSpec("CMAP"), binomial10, [7])
    assert a.distance_to(b) < 1e-4


def test_pmle_flat_penalty_is_mle():
    s = box(-10.0, 10.0)
    p = EstimationProblem(s, GaussianKnownSigma(1.0), GaussianParams(s, 0.0, 2.0))
    a = estimate(EstimatorSpec("EIC", pmle_to_loss(lambda t: 1.0, p)), p, [1.3])
    assert a.point[0] == pytest.approx(1.3, abs=1e-6)


@pytest.mark.parametrize("k", range(10))
def test_pmle_span_random_penalties(k):
    from eicest.model import BinomialN

    # interior optimum: a boundary maximum is outside the equivalence
    s = box(0.02, 0.98)
    p = EstimationProblem(s, BinomialN(10), UniformBox(s))
    g = suite.random_penalty(k, s)
    a = estimate(EstimatorSpec("EIC", pmle_to_loss(g, p)), p, [6])
    b = estimate(EstimatorSpec("PMLE", penalty=g), p, [6])
    assert not b.diagnostics["boundary_maximum"]
    assert a.distance_to(b) < 1e-6


def test_loss_to_penalty_round_trip(binomial10):
    loss = L.fdivergence("KL")
    a = estimate(EstimatorSpec("PMLE", penalty=loss_to_penalty(loss, binomial10)), binomial10, [7])
    b = estimate(EstimatorSpec("EIC", loss), binomial10, [7])
    assert a.distance_to(b) < 1e-4


def test_eic_needs_loss():
    with pytest.raises(ModelInvariantError):
        EstimatorSpec("EIC")


def test_eic_rejects_non_smooth_loss(bernoulli):
    rough = L.custom(lambda p, a, b: float(np.abs(a - b).sum()), name="abs", smooth=False)
    with pytest.raises(ModelInvariantError):
        EstimatorSpec("EIC", rough)


def test_indefinite_hessian_is_ill_defined(gauss_mean):
    # minus the quadratic loss has a negative definite Hessian
    neg = L.custom(lambda p, a, b: -float(np.sum((a - b) ** 2)), name="neg")
    with pytest.raises(IllDefinedEstimator):
        eic_metric(neg, gauss_mean, [0.2], [0.0])


def test_irp_at_estimator_level(gauss_mean):
    from eicest.axioms import affine_param, transform_params

    T = affine_param(2.0, 1.0)
    q = transform_params(gauss_mean, T)
    spec = EstimatorSpec("EIC", L.fdivergence("Hellinger2"))
    a = estimate(spec, gauss_mean, [0.8]).point
    b = estimate(spec, q, [0.8]).point
    assert b[0] == pytest.approx(T.forward(a)[0], abs=1e-4)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 4.0))
def test_scaled_loss_argmax_unchanged(c):
    s = box(0.01, 0.99)
    from eicest.model import BinomialN

    p = EstimationProblem(s, BinomialN(10), UniformBox(s))
    base = L.fdivergence("Hellinger2")
    scaled = L.scaled_loss(base, lambda prob, t: c)
    assert eic_metric(scaled, p, [4], [0.3]) == pytest.approx(eic_metric(base, p, [4], [0.3]) / math.sqrt(c), rel=1e-6)
