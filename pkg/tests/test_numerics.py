import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eicest import losses as L
from eicest.errors import IntegralNotConverged, NoAnalyticForm, NoFiniteValue
from eicest.model import (
    Bernoulli,
    BinomialN,
    CustomModel,
    EstimationProblem,
    GaussianKnownSigma,
    ObservationSpace,
    UniformBox,
)
from eicest.numerics.fisher import fisher_information
from eicest.numerics.hessian import fd_hessian, hessian_at_diagonal
from eicest.numerics.optimize import ArgmaxConfig, argmax
from eicest.numerics.quadrature import Axis, BoxDomain, FiniteDomain, adapt, integrate
from eicest.model import ParameterSpace

from conftest import box


# --- quadrature ------------------------------------------------------------

def test_unit_interval():
    r = integrate(lambda X: np.ones(len(X)), BoxDomain((Axis(0.0, 1.0),)))
    assert r.value == pytest.approx(1.0, abs=1e-15)


def test_normal_over_real_line():
    phi = lambda X: np.exp(-0.5 * X[:, 0] ** 2) / math.sqrt(2 * math.pi)
    r = integrate(phi, BoxDomain((Axis(-math.inf, math.inf),)))
    assert abs(r.value - 1.0) < 1e-8


def test_finite_sum_exact():
    pts = np.array([[0.0], [1.0]])
    r = integrate(lambda X: np.where(X[:, 0] == 1, 0.3, 0.7), FiniteDomain(pts))
    assert r.value == 1.0


def test_nested_box():
    r = integrate(lambda X: X[:, 0] * X[:, 1] ** 2, BoxDomain((Axis(0.0, 1.0), Axis(0.0, 3.0))))
    assert r.value == pytest.approx(0.5 * 9.0, rel=1e-12)


def test_breakpoint_singularity():
    # |x|^(-2/3) has integral 6 on [-1, 1]
    ax = Axis(-1.0, 1.0, breakpoints=(0.0,))
    r = integrate(lambda X: np.abs(X[:, 0]) ** (-2.0 / 3.0), BoxDomain((ax,)), rtol=1e-9)
    assert r.value == pytest.approx(6.0, rel=1e-8)


def test_infinite_axis_with_breakpoints():
    f = lambda X: np.exp(-np.abs(X[:, 0] - 3.0)) + np.exp(-np.abs(X[:, 0] + 3.0))
    ax = Axis(-math.inf, math.inf, breakpoints=(-3.0, 3.0))
    assert integrate(f, BoxDomain((ax,))).value == pytest.approx(4.0, rel=1e-10)


def test_monte_carlo_high_dimension():
    axes = tuple(Axis(0.0, 1.0) for _ in range(4))
    r = integrate(lambda X: X.sum(axis=1), BoxDomain(axes), mc_samples=50_000, seed=1)
    assert r.method == "mc"
    assert abs(r.value - 2.0) < 5 * r.error


def test_nonconvergence_carries_estimate():
    with pytest.raises(IntegralNotConverged) as info:
        adapt(lambda x: np.sin(1.0 / x) / x, 1e-6, 1.0, rtol=1e-14, atol=0.0, limit=5)
    assert math.isfinite(info.value.estimate)


# --- fisher ------------------------------------------------------------------

def test_bernoulli_fisher_brute_force(bernoulli):
    assert fisher_information(bernoulli, [0.5], "BruteForce").array[0, 0] == pytest.approx(4.0, rel=1e-8)


def test_gaussian_fisher_sigma2():
    s = box(-5, 5)
    p = EstimationProblem(s, GaussianKnownSigma(2.0), UniformBox(s))
    for t in (-1.0, 0.0, 3.0):
        assert fisher_information(p, [t]).array[0, 0] == pytest.approx(0.25, rel=1e-15)
        assert fisher_information(p, [t], "BruteForce").array[0, 0] == pytest.approx(0.25, rel=1e-6)


@pytest.mark.parametrize("name", ["bernoulli", "binomial10", "gauss_mean", "gauss_ms", "expo"])
def test_analytic_matches_brute_force(name, request):
    p = request.getfixturevalue(name)
    rng = np.random.default_rng(4)
    lo, hi = p.theta_space.lower_array, p.theta_space.upper_array
    for _ in range(3):
        t = lo + (hi - lo) * rng.uniform(0.2, 0.8, lo.shape)
        a = fisher_information(p, t).array
        b = fisher_information(p, t, "BruteForce").array
        assert np.allclose(a, b, rtol=1e-4, atol=1e-10 * np.max(np.abs(a)))
        assert np.allclose(a, a.T)
        assert np.all(np.linalg.eigvalsh(a) > 0)


def test_gms_fisher_closed_form(gauss_ms):
    a = fisher_information(gauss_ms, [0.4, 1.5]).array
    assert np.allclose(a, np.diag([5 / 1.5 ** 2, 10 / 1.5 ** 2]), rtol=1e-14)


def test_monte_carlo_fisher_seeded(bernoulli):
    a = fisher_information(bernoulli, [0.3], "MonteCarlo", n_samples=50_000, seed=7).array
    b = fisher_information(bernoulli, [0.3], "MonteCarlo", n_samples=50_000, seed=7).array
    assert np.array_equal(a, b)
    assert a[0, 0] == pytest.approx(1 / 0.21, rel=0.05)


def test_custom_without_analytic_form():
    space = ObservationSpace.finite([[0.0], [1.0]])
    logf = lambda t, X: np.where(X[:, 0] == 1, np.log(t[0]), np.log1p(-t[0]))
    s = box(0.01, 0.99)
    p = EstimationProblem(s, CustomModel(logf, space), UniformBox(s))
    with pytest.raises(NoAnalyticForm):
        fisher_information(p, [0.5])
    assert fisher_information(p, [0.5], "BruteForce").array[0, 0] == pytest.approx(4.0, rel=1e-6)


# --- hessian -------------------------------------------------------------------

def test_quadratic_hessian_is_two_identity(gauss_ms):
    H = hessian_at_diagonal(L.quadratic(), gauss_ms, [0.1, 1.2]).array
    assert np.allclose(H, 2 * np.eye(2), atol=1e-6)


def test_hellinger_hessian_bernoulli(bernoulli):
    H = hessian_at_diagonal(L.fdivergence("Hellinger2"), bernoulli, [0.5]).array
    assert H[0, 0] == pytest.approx(1.0, rel=1e-3)


def test_kl_hessian_bernoulli(bernoulli):
    H = hessian_at_diagonal(L.fdivergence("KL"), bernoulli, [0.5]).array
    assert H[0, 0] == pytest.approx(4.0, rel=1e-3)


def test_fd_hessian_polynomial():
    f = lambda t: 3 * t[0] ** 2 + t[0] * t[1] - 2 * t[1] ** 2
    H = fd_hessian(f, np.array([0.3, -0.2]), np.array([1e-3, 1e-3]))
    assert np.allclose(H, [[6, 1], [1, -4]], atol=1e-6)


@pytest.mark.parametrize("gen", ["Hellinger2", "KL", "ChiSquared"])
@pytest.mark.parametrize("name", ["bernoulli", "binomial10", "gauss_mean", "gauss_ms", "expo"])
def test_hessian_fisher_identity(gen, name, request):
    p = request.getfixturevalue(name)
    loss = L.fdivergence(gen)
    rng = np.random.default_rng(11)
    lo, hi = p.theta_space.lower_array, p.theta_space.upper_array
    for _ in range(3):
        t = lo + (hi - lo) * rng.uniform(0.1, 0.9, lo.shape)
        H = hessian_at_diagonal(loss, p, t)
        target = loss.generator.gamma * fisher_information(p, t).array
        assert H.max_rel_deviation(target) < 1e-2


# --- argmax ----------------------------------------------------------------------

def test_finite_scan_two_point():
    s = ParameterSpace.finite_set([[1.0], [2.0]])
    post = {1.0: 0.9, 2.0: 0.1}
    r = argmax(lambda t: math.log(post[float(t[0])]), s)
    assert [p.tolist() for p in r.points] == [[1.0]]


def test_box_quadratic_peak():
    r = argmax(lambda t: -(t[0] - 1.7) ** 2, box(-5.0, 5.0), ArgmaxConfig(scale="linear"))
    assert r.point[0] == pytest.approx(1.7, abs=1e-6)


def test_two_equal_peaks():
    a = 1.3
    f = lambda t: -min((t[0] - a) ** 2, (t[0] + a) ** 2)
    r = argmax(f, box(-4.0, 4.0), ArgmaxConfig(scale="linear"))
    got = sorted(round(p[0], 5) for p in r.points)
    assert got == [-a, a]


def test_no_finite_value():
    with pytest.raises(NoFiniteValue):
        argmax(lambda t: -math.inf, box(0.0, 1.0))


def test_finite_matches_brute_force():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-3, 3, (40, 1))
    vals = rng.normal(size=40)
    lookup = {float(p[0]): v for p, v in zip(pts, vals)}
    r = argmax(lambda t: lookup[float(t[0])], ParameterSpace.finite_set(pts), ArgmaxConfig(scale="linear"))
    assert r.point[0] == pts[int(np.argmax(vals)), 0]


def test_doubled_grid_is_stable(gauss_mean):
    from eicest.estimators import log_eic_metric

    f = lambda t: log_eic_metric(L.fdivergence("Hellinger2"), gauss_mean, [1.2], t)
    a = argmax(f, gauss_mean.theta_space, ArgmaxConfig(grid=32, margin=1e-3))
    b = argmax(f, gauss_mean.theta_space, ArgmaxConfig(grid=64, margin=1e-3))
    assert a.distance_to(b) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.floats(-4.5, 4.5))
def test_argmax_recovers_random_peak(c):
    r = argmax(lambda t: -(t[0] - c) ** 2, box(-5.0, 5.0), ArgmaxConfig(scale="linear"))
    assert abs(r.point[0] - c) < 1e-6
