import numpy as np
import pytest

from eicest.model import (
    Bernoulli,
    BetaParams,
    BinomialN,
    EstimationProblem,
    ExponentialRate,
    GaussianKnownSigma,
    GaussianMeanSigma,
    GaussianParams,
    ParameterSpace,
    UniformBox,
)


def box(lo, hi):
    return ParameterSpace.box(np.atleast_1d(lo), np.atleast_1d(hi))


@pytest.fixture
def bernoulli():
    s = box(0.01, 0.99)
    return EstimationProblem(s, Bernoulli(), UniformBox(s), name="Bernoulli")


@pytest.fixture
def binomial10():
    s = box(0.01, 0.99)
    return EstimationProblem(s, BinomialN(10), BetaParams(s, 2.0, 2.0), name="BinomialN(10)")


@pytest.fixture
def gauss_mean():
    s = box(-10.0, 10.0)
    return EstimationProblem(s, GaussianKnownSigma(1.0), GaussianParams(s, 0.0, 2.0), name="gauss")


@pytest.fixture
def gauss_ms():
    s = box([-3.0, 0.3], [3.0, 3.0])
    return EstimationProblem(s, GaussianMeanSigma(5), UniformBox(s), name="GMS(5)")


@pytest.fixture
def expo():
    s = box(0.2, 5.0)
    return EstimationProblem(s, ExponentialRate(), UniformBox(s), name="Exp")
