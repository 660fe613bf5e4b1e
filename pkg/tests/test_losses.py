import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eicest import losses as L
from eicest.errors import ModelInvariantError, SingularDivergence
from eicest.model import EstimationProblem, GaussianKnownSigma, UniformBox

from conftest import box

H2_BERN = 1.0 - (math.sqrt(0.40) + math.sqrt(0.10))


def test_quadratic_value(gauss_mean):
    assert L.loss_value(L.quadratic(), gauss_mean, [0.0], [3.0]) == 9.0


def test_hellinger_bernoulli(bernoulli):
    v = L.loss_value(L.fdivergence("Hellinger2"), bernoulli, 0.8, 0.5)
    assert v == pytest.approx(H2_BERN, rel=1e-12)
    assert v == pytest.approx(0.051317, abs=5e-7)


def test_kl_bernoulli(bernoulli):
    expected = 0.5 * 1.6 * math.log(1.6) + 0.5 * 0.4 * math.log(0.4)
    v = L.loss_value(L.fdivergence("KL"), bernoulli, 0.8, 0.5)
    assert v == pytest.approx(expected, rel=1e-12)
    assert v == pytest.approx(0.19274, abs=5e-6)


def test_chi_square_bernoulli(bernoulli):
    v = L.loss_value(L.fdivergence("ChiSquared"), bernoulli, 0.8, 0.5)
    assert v == pytest.approx(0.5 * 0.36 + 0.5 * 0.36, rel=1e-12)


@pytest.mark.parametrize("loss", [L.quadratic(), L.fdivergence("Hellinger2"), L.fdivergence("KL"),
                                  L.fdivergence("ChiSquared"), L.bhattacharyya()], ids=lambda l: l.name)
def test_identity_is_zero(loss, bernoulli, gauss_mean):
    assert L.loss_value(loss, bernoulli, 0.3, 0.3) == pytest.approx(0.0, abs=1e-15)
    assert L.loss_value(loss, gauss_mean, 1.1, 1.1) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("name,f2", [("Hellinger2", 0.25), ("KL", 1.0), ("ChiSquared", 2.0)])
def test_generator_curvature(name, f2):
    g = L.builtin_generator(name)
    assert g.F(1.0) == 0.0
    assert g.d2F(1.0) == pytest.approx(f2, rel=1e-15)
    # finite-difference cross-check of F''
    h = 1e-4
    fd = (g.F(1 + h) - 2 * g.F(1.0) + g.F(1 - h)) / h ** 2
    assert fd == pytest.approx(f2, rel=1e-5)
    assert g.gamma == f2


def test_custom_generator_must_vanish_at_one():
    with pytest.raises(ModelInvariantError):
        L.custom_generator("bad", lambda r: r * r, lambda r: 2 * r, lambda r: 2.0 + 0 * r)


def test_bhattacharyya_bernoulli(bernoulli):
    v = L.bhattacharyya_loss(bernoulli, 0.8, 0.5)
    assert v == pytest.approx(-math.log(1.0 - H2_BERN), rel=1e-12)
    # the quoted 0.052679 is a rounding of 0.0526803
    assert v == pytest.approx(0.052679, abs=2e-6)


def test_bhattacharyya_over_hellinger_near_diagonal(bernoulli):
    b = L.bhattacharyya_loss(bernoulli, 0.501, 0.5)
    h = L.loss_value(L.fdivergence("Hellinger2"), bernoulli, 0.501, 0.5)
    assert abs(b / h - 1.0) < 1e-4


def test_bhattacharyya_singular():
    s = box(-60.0, 60.0)
    p = EstimationProblem(s, GaussianKnownSigma(1.0), UniformBox(s))
    with pytest.raises(SingularDivergence):
        L.bhattacharyya_loss(p, 50.0, -50.0)


def test_gaussian_hellinger_closed_form(gauss_mean):
    for a, b in ((1.0, 0.0), (0.3, -2.0)):
        v = L.loss_value(L.fdivergence("Hellinger2"), gauss_mean, a, b)
        assert v == pytest.approx(1 - math.exp(-(a - b) ** 2 / 8), rel=1e-9)


def test_gaussian_kl_closed_form(gauss_mean):
    assert L.loss_value(L.fdivergence("KL"), gauss_mean, 1.5, 0.0) == pytest.approx(1.125, rel=1e-9)


def test_pmle_induced_proportional_to_quadratic(binomial10):
    g = lambda t: 1.0 + 0.5 * float(np.sin(3 * t[0]))
    from eicest.estimators import pmle_to_loss

    loss = pmle_to_loss(g, binomial10)
    rng = np.random.default_rng(0)
    t2 = np.array([0.4])
    ratios = []
    for _ in range(10):
        t1 = rng.uniform(0.05, 0.95, 1)
        ratios.append(L.loss_value(loss, binomial10, t1, t2) / L.loss_value(L.quadratic(), binomial10, t1, t2))
    assert max(ratios) == pytest.approx(min(ratios), rel=1e-12)
    assert min(ratios) > 0


@pytest.mark.parametrize("name", ["Hellinger2", "KL", "ChiSquared"])
@pytest.mark.parametrize("delta", [0.1, 0.01])
def test_discriminative(name, delta, binomial10):
    loss = L.fdivergence(name)
    theta = np.array([0.5])
    grid = np.linspace(0.02, 0.98, 97)
    vals = [L.loss_value(loss, binomial10, [t], theta) for t in grid if abs(t - 0.5) >= delta]
    assert min(vals) > 0


@settings(max_examples=40, deadline=None)
@given(st.floats(-4, 4), st.floats(-4, 4))
def test_fdiv_nonnegative(a, b):
    s = box(-5.0, 5.0)
    p = EstimationProblem(s, GaussianKnownSigma(1.0), UniformBox(s))
    for name in ("Hellinger2", "KL", "ChiSquared"):
        assert L.loss_value(L.fdivergence(name), p, a, b) >= -1e-9


def test_no_isi_quarter_under_fair_coin(binomial10):
    from eicest.axioms import augment_noise

    loss = L.no_isi()
    aug = augment_noise(binomial10, "BernoulliHalf")
    r = L.loss_value(loss, aug, 0.3, 0.6) / L.loss_value(loss, binomial10, 0.3, 0.6)
    assert r == pytest.approx(0.25, abs=1e-12)


def test_scaled_loss_divides_metric(gauss_mean):
    from eicest.estimators import eic_metric

    base = L.fdivergence("Hellinger2")
    scaled = L.scaled_loss(base, lambda problem, t: 4.0)
    m0 = eic_metric(base, gauss_mean, [0.5], [0.3])
    m1 = eic_metric(scaled, gauss_mean, [0.5], [0.3])
    assert m1 == pytest.approx(m0 / 2.0, rel=1e-6)
