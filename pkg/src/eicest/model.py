"""Estimation problems: parameter spaces, data models, priors and posteriors.

A problem couples a parameter space, a family of conditional data
distributions ``f(x | theta)`` and a prior.  All objects are immutable once
built, and every evaluator is a pure function of its arguments.

Parameters are handled as 1-D float arrays of length ``M`` and observations
as 1-D arrays of length ``N``; model evaluators are vectorised over rows of
an ``(m, N)`` observation array.
"""
from __future__ import annotations

import itertools
import math
import threading
from functools import cached_property
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special, stats

from . import _kernels as K
from .errors import (
    DivisionByZeroSupport,
    DomainError,
    ModelInvariantError,
    NonNormalisablePrior,
    NoAnalyticForm,
    OutOfSupport,
)
from .numerics.quadrature import Axis, BoxDomain, integrate

__all__ = [
    "ParameterSpace",
    "ObservationSpace",
    "DataModel",
    "Bernoulli",
    "BinomialN",
    "Categorical",
    "GaussianKnownSigma",
    "GaussianMeanSigma",
    "ExponentialRate",
    "IIDProduct",
    "CustomModel",
    "Prior",
    "FinitePmf",
    "UniformBox",
    "BetaParams",
    "GaussianParams",
    "PowerLawSigma",
    "CustomDensity",
    "EstimationProblem",
    "as_vector",
    "cond_density",
    "likelihood_ratio",
    "posterior",
    "posterior_unnorm",
    "evidence",
]

PROBLEM_CLASSES = ("Discrete", "Continuous", "SemiContinuous")
_POINT_TOL = 1e-12


def as_vector(v, dim: int | None = None, name: str = "value") -> np.ndarray:
    """Coerce a scalar or sequence into a 1-D float array."""
    arr = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
    if dim is not None and arr.shape[0] != dim:
        raise ModelInvariantError(f"{name} has length {arr.shape[0]}, expected {dim}")
    return arr


# --------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class ParameterSpace:
    """Either a finite set of M-vectors or an axis-aligned bounded box."""

    kind: str
    dim: int
    points: Optional[tuple] = None
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ModelInvariantError("parameter dimension must be positive")
        if self.kind == "FiniteSet":
            pts = self.points or ()
            if len(pts) < 2:
                raise ModelInvariantError("a finite parameter set needs at least two points")
            if any(len(p) != self.dim for p in pts):
                raise ModelInvariantError("point length does not match dim")
            if len(set(pts)) != len(pts):
                raise ModelInvariantError("finite parameter set has duplicate points")
        elif self.kind == "Box":
            if self.lower is None or self.upper is None:
                raise ModelInvariantError("a box needs lower and upper bounds")
            if len(self.lower) != self.dim or len(self.upper) != self.dim:
                raise ModelInvariantError("bound length does not match dim")
            for lo, hi in zip(self.lower, self.upper):
                if not (math.isfinite(lo) and math.isfinite(hi)):
                    raise ModelInvariantError("box bounds must be finite")
                if not lo < hi:
                    raise ModelInvariantError("box needs lower < upper on every axis")
        else:
            raise ModelInvariantError(f"unknown parameter space kind {self.kind!r}")

    @classmethod
    def finite_set(cls, points) -> "ParameterSpace":
        rows = [tuple(float(v) for v in np.atleast_1d(p)) for p in points]
        return cls("FiniteSet", len(rows[0]) if rows else 0, points=tuple(rows))

    @classmethod
    def box(cls, lower, upper) -> "ParameterSpace":
        lo = tuple(float(v) for v in np.atleast_1d(lower))
        hi = tuple(float(v) for v in np.atleast_1d(upper))
        return cls("Box", len(lo), lower=lo, upper=hi)

    @property
    def is_finite(self) -> bool:
        return self.kind == "FiniteSet"

    @property
    def point_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float)

    @property
    def lower_array(self) -> np.ndarray:
        return np.array(self.lower, dtype=float)

    @property
    def upper_array(self) -> np.ndarray:
        return np.array(self.upper, dtype=float)

    def index_of(self, theta) -> int:
        """Index of ``theta`` in a finite set, or -1."""
        t = as_vector(theta, self.dim, "theta")
        pts = self.point_array
        tol = _POINT_TOL * (1.0 + np.abs(pts))
        hit = np.all(np.abs(pts - t) <= tol, axis=1)
        idx = np.flatnonzero(hit)
        return int(idx[0]) if idx.size else -1

    def contains(self, theta) -> bool:
        t = as_vector(theta)
        if t.shape[0] != self.dim or not np.all(np.isfinite(t)):
            return False
        if self.is_finite:
            return self.index_of(t) >= 0
        lo, hi = self.lower_array, self.upper_array
        tol = _POINT_TOL * (1.0 + np.maximum(np.abs(lo), np.abs(hi)))
        return bool(np.all(t >= lo - tol) and np.all(t <= hi + tol))

    def check(self, theta) -> np.ndarray:
        t = as_vector(theta)
        if not self.contains(t):
            raise OutOfSupport(f"theta={t.tolist()} is not in the parameter space")
        return t

    def bounding_box(self) -> "ParameterSpace":
        if not self.is_finite:
            return self
        pts = self.point_array
        return ParameterSpace.box(pts.min(axis=0), pts.max(axis=0))

    def sample_grid(self, per_axis: int = 5) -> np.ndarray:
        """A small interior grid (or all points) used for spot checks."""
        if self.is_finite:
            return self.point_array
        lo, hi = self.lower_array, self.upper_array
        axes = [lo[i] + (hi[i] - lo[i]) * (np.arange(per_axis) + 0.5) / per_axis
                for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def as_dict(self) -> dict:
        if self.is_finite:
            return {"kind": self.kind, "points": [list(p) for p in self.points]}
        return {"kind": self.kind, "lower": list(self.lower), "upper": list(self.upper)}


@dataclass(frozen=True)
class ObservationSpace:
    """Finite support or a (possibly unbounded) continuum of dimension N.

    A finite space may be given by an explicit point list or as the n-fold
    product of a smaller finite space (``product_of``); the product is only
    enumerated on demand.
    """

    kind: str
    dim: int
    points: Optional[tuple] = None
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None
    product_of: Optional[tuple] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ModelInvariantError("observation dimension must be positive")
        if self.kind == "FiniteSet":
            if self.product_of is None:
                pts = self.points or ()
                if not pts:
                    raise ModelInvariantError("finite observation space is empty")
                if len(set(pts)) != len(pts):
                    raise ModelInvariantError("finite observation support has duplicates")
                if any(len(p) != self.dim for p in pts):
                    raise ModelInvariantError("support point length does not match dim")
        elif self.kind == "Continuum":
            if self.lower is None:
                object.__setattr__(self, "lower", (-math.inf,) * self.dim)
            if self.upper is None:
                object.__setattr__(self, "upper", (math.inf,) * self.dim)
            if len(self.lower) != self.dim or len(self.upper) != self.dim:
                raise ModelInvariantError("bound length does not match dim")
        else:
            raise ModelInvariantError(f"unknown observation space kind {self.kind!r}")

    @classmethod
    def finite(cls, points) -> "ObservationSpace":
        rows = [tuple(float(v) for v in np.atleast_1d(p)) for p in points]
        return cls("FiniteSet", len(rows[0]), points=tuple(rows))

    @classmethod
    def continuum(cls, dim: int, lower=None, upper=None) -> "ObservationSpace":
        lo = None if lower is None else tuple(float(v) for v in np.atleast_1d(lower))
        hi = None if upper is None else tuple(float(v) for v in np.atleast_1d(upper))
        return cls("Continuum", dim, lower=lo, upper=hi)

    @classmethod
    def power(cls, base: "ObservationSpace", n: int) -> "ObservationSpace":
        if base.kind == "FiniteSet":
            return cls("FiniteSet", base.dim * n, product_of=(base, n))
        return cls("Continuum", base.dim * n, lower=tuple(base.lower) * n,
                   upper=tuple(base.upper) * n)

    @property
    def is_finite(self) -> bool:
        return self.kind == "FiniteSet"

    @cached_property
    def point_array(self) -> np.ndarray:
        if self.product_of is not None:
            base, n = self.product_of
            rows = [sum(combo, ()) for combo in itertools.product(base.points_tuple(), repeat=n)]
            arr = np.array(rows, dtype=float)
        else:
            arr = np.array(self.points, dtype=float)
        arr.flags.writeable = False
        return arr

    def points_tuple(self) -> tuple:
        if self.product_of is not None:
            return tuple(tuple(r) for r in self.point_array.tolist())
        return self.points

    @property
    def size(self) -> int:
        if self.product_of is not None:
            base, n = self.product_of
            return base.size ** n
        return len(self.points)

    def contains(self, x) -> bool:
        v = as_vector(x)
        if v.shape[0] != self.dim or not np.all(np.isfinite(v)):
            return False
        if self.kind == "Continuum":
            return bool(np.all(v >= np.array(self.lower)) and np.all(v <= np.array(self.upper)))
        if self.product_of is not None:
            base, n = self.product_of
            return all(base.contains(b) for b in v.reshape(n, base.dim))
        return tuple(v.tolist()) in set(self.points)

    def check(self, x) -> np.ndarray:
        v = as_vector(x)
        if not self.contains(v):
            raise DomainError(f"x={v.tolist()} is outside the observation support")
        return v

    def as_dict(self) -> dict:
        if self.kind == "Continuum":
            return {"kind": self.kind, "dim": self.dim,
                    "lower": [None if not math.isfinite(v) else v for v in self.lower],
                    "upper": [None if not math.isfinite(v) else v for v in self.upper]}
        return {"kind": self.kind, "dim": self.dim, "size": self.size}


# --------------------------------------------------------------------------
# data models


class DataModel:
    """Base class for conditional data distribution families.

    Subclasses implement ``log_density`` (vectorised over observation rows)
    and ``theta_ok``; the remaining hooks are optional.

    Divergence plans
    ----------------
    ``discrete_table`` enumerates a finite sufficient statistic with log
    multiplicities; ``kernel_plan`` maps a pair of parameters onto one of the
    compiled integral families; ``obs_axes`` describes integration axes for
    the generic nested quadrature fallback.
    """

    family = "Custom"
    param_dim = 1

    @property
    def obs_space(self) -> ObservationSpace:
        raise NotImplementedError

    def theta_ok(self, theta: np.ndarray) -> bool:
        return True

    def log_density(self, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def density(self, theta, X) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(self.log_density(theta, X))

    def fisher(self, theta: np.ndarray) -> np.ndarray:
        raise NoAnalyticForm(f"no closed-form Fisher information for {self.family}")

    def sample(self, theta, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.obs_space.is_finite:
            pts = self.obs_space.point_array
            p = self.density(theta, pts)
            idx = rng.choice(len(pts), size=size, p=p / p.sum())
            return pts[idx]
        raise NotImplementedError(f"{self.family} has no sampler")

    def discrete_table(self, theta):
        """``(log_multiplicity, log_prob, key)`` over a finite sufficient statistic."""
        if not self.obs_space.is_finite:
            return None
        pts = self.obs_space.point_array
        return np.zeros(len(pts)), self.log_density(theta, pts), pts

    def kernel_plan(self, theta1, theta2):
        return None

    def obs_axes(self, theta):
        space = self.obs_space
        return [Axis(lo, hi, 0.0 if not (math.isfinite(lo) and math.isfinite(hi)) else 0.5 * (lo + hi), 1.0)
                for lo, hi in zip(space.lower, space.upper)]

    def iid_parts(self):
        """``(base_model, n)`` when the model is an iid product, else None."""
        return None

    def scipy_dist(self, theta):
        raise NotImplementedError(f"{self.family} has no univariate distribution object")

    def describe(self) -> dict:
        return {"family": self.family}


def _lse(z: np.ndarray) -> float:
    # scipy's logsumexp carries array-API overhead that dominates for tiny inputs
    m = float(np.max(z))
    return m + math.log(float(np.sum(np.exp(z - m))))


def _rows(X) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


class Bernoulli(DataModel):
    family = "Bernoulli"
    param_dim = 1

    @cached_property
    def obs_space(self):
        return ObservationSpace.finite([0.0, 1.0])

    def theta_ok(self, theta):
        return 0.0 <= theta[0] <= 1.0

    def log_density(self, theta, X):
        x = _rows(X)[:, 0]
        p = theta[0]
        with np.errstate(divide="ignore"):
            return np.where(x == 1.0, math.log(p) if p > 0 else -np.inf,
                            math.log1p(-p) if p < 1 else -np.inf)

    def fisher(self, theta):
        p = theta[0]
        return np.array([[1.0 / (p * (1.0 - p))]])

    def sample(self, theta, rng, size):
        return (rng.random((size, 1)) < theta[0]).astype(float)

    def scipy_dist(self, theta):
        return stats.bernoulli(theta[0])


class BinomialN(DataModel):
    family = "BinomialN"
    param_dim = 1

    def __init__(self, n: int):
        if int(n) < 1:
            raise ModelInvariantError("BinomialN needs n >= 1")
        self.n = int(n)

    @cached_property
    def obs_space(self):
        return ObservationSpace.finite(range(self.n + 1))

    def theta_ok(self, theta):
        return 0.0 <= theta[0] <= 1.0

    def log_density(self, theta, X):
        x = _rows(X)[:, 0]
        p = theta[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (special.gammaln(self.n + 1) - special.gammaln(x + 1) - special.gammaln(self.n - x + 1)
                   + special.xlogy(x, p) + special.xlog1py(self.n - x, -p))
        ok = (x >= 0) & (x <= self.n) & (x == np.floor(x))
        return np.where(ok, out, -np.inf)

    def fisher(self, theta):
        p = theta[0]
        return np.array([[self.n / (p * (1.0 - p))]])

    def sample(self, theta, rng, size):
        return rng.binomial(self.n, theta[0], size=(size, 1)).astype(float)

    def scipy_dist(self, theta):
        return stats.binom(self.n, theta[0])

    def describe(self):
        return {"family": self.family, "n": self.n}


class Categorical(DataModel):
    """k categories, parameterised by the k-1 logits relative to category 0."""

    family = "Categorical"

    def __init__(self, k: int):
        if int(k) < 2:
            raise ModelInvariantError("Categorical needs k >= 2")
        self.k = int(k)
        self.param_dim = self.k - 1

    @cached_property
    def obs_space(self):
        return ObservationSpace.finite(range(self.k))

    def probs(self, theta) -> np.ndarray:
        z = np.concatenate([[0.0], theta])
        return np.exp(z - _lse(z))

    def log_density(self, theta, X):
        x = _rows(X)[:, 0].astype(int)
        z = np.concatenate([[0.0], theta])
        return z[x] - _lse(z)

    def fisher(self, theta):
        p = self.probs(theta)[1:]
        return np.diag(p) - np.outer(p, p)

    def sample(self, theta, rng, size):
        return rng.choice(self.k, size=(size, 1), p=self.probs(theta)).astype(float)

    def describe(self):
        return {"family": self.family, "k": self.k}


class GaussianKnownSigma(DataModel):
    family = "GaussianKnownSigma"
    param_dim = 1

    def __init__(self, sigma: float = 1.0):
        if not sigma > 0:
            raise ModelInvariantError("sigma must be positive")
        self.sigma = float(sigma)

    @cached_property
    def obs_space(self):
        return ObservationSpace.continuum(1)

    def log_density(self, theta, X):
        z = (_rows(X)[:, 0] - theta[0]) / self.sigma
        return -0.5 * z * z - math.log(self.sigma) - 0.5 * math.log(2 * math.pi)

    def fisher(self, theta):
        return np.array([[1.0 / self.sigma ** 2]])

    def sample(self, theta, rng, size):
        return rng.normal(theta[0], self.sigma, size=(size, 1))

    def kernel_plan(self, theta1, theta2):
        return K.FAM_NORMAL, (theta1[0], self.sigma), (theta2[0], self.sigma)

    def obs_axes(self, theta):
        return [Axis(-math.inf, math.inf, float(theta[0]), self.sigma)]

    def scipy_dist(self, theta):
        return stats.norm(theta[0], self.sigma)

    def describe(self):
        return {"family": self.family, "sigma": self.sigma}


class GaussianMeanSigma(DataModel):
    """n iid normal draws with unknown mean and standard deviation, theta=(mu, sigma)."""

    family = "GaussianMeanSigma"
    param_dim = 2

    def __init__(self, n: int = 1):
        if int(n) < 1:
            raise ModelInvariantError("GaussianMeanSigma needs n >= 1")
        self.n = int(n)

    @cached_property
    def obs_space(self):
        return ObservationSpace.continuum(self.n)

    def theta_ok(self, theta):
        return theta[1] > 0

    def log_density(self, theta, X):
        mu, s = theta
        z = (_rows(X) - mu) / s
        return (-0.5 * np.sum(z * z, axis=1)
                - self.n * (math.log(s) + 0.5 * math.log(2 * math.pi)))

    def fisher(self, theta):
        s2 = theta[1] ** 2
        return np.diag([self.n / s2, 2.0 * self.n / s2])

    def sample(self, theta, rng, size):
        return rng.normal(theta[0], theta[1], size=(size, self.n))

    def kernel_plan(self, theta1, theta2):
        if self.n == 1:
            return K.FAM_NORMAL, (theta1[0], theta1[1]), (theta2[0], theta2[1])
        return (K.FAM_NORMAL_IID, (theta1[0], theta1[1], float(self.n)),
                (theta2[0], theta2[1], float(self.n)))

    def obs_axes(self, theta):
        return [Axis(-math.inf, math.inf, float(theta[0]), float(theta[1]))] * self.n

    def iid_parts(self):
        return (GaussianMeanSigma(1), self.n) if self.n > 1 else None

    def scipy_dist(self, theta):
        if self.n != 1:
            raise NotImplementedError("only the single-draw model is univariate")
        return stats.norm(theta[0], theta[1])

    def describe(self):
        return {"family": self.family, "n": self.n}


class ExponentialRate(DataModel):
    family = "ExponentialRate"
    param_dim = 1

    @cached_property
    def obs_space(self):
        return ObservationSpace.continuum(1, lower=[0.0])

    def theta_ok(self, theta):
        return theta[0] > 0

    def log_density(self, theta, X):
        lam = theta[0]
        return math.log(lam) - lam * _rows(X)[:, 0]

    def fisher(self, theta):
        return np.array([[1.0 / theta[0] ** 2]])

    def sample(self, theta, rng, size):
        return rng.exponential(1.0 / theta[0], size=(size, 1))

    def kernel_plan(self, theta1, theta2):
        return K.FAM_GAMMA, (1.0, theta1[0]), (1.0, theta2[0])

    def obs_axes(self, theta):
        return [Axis(0.0, math.inf, 0.0, 1.0 / theta[0])]

    def scipy_dist(self, theta):
        return stats.expon(scale=1.0 / theta[0])


def _compositions(n: int, s: int):
    """All s-part count vectors summing to n (stars and bars)."""
    for cuts in itertools.combinations(range(n + s - 1), s - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(n + s - 2 - prev)
        yield out


class IIDProduct(DataModel):
    """``n`` independent replicates of a base model sharing one parameter."""

    family = "IIDProduct"

    def __init__(self, base: DataModel, n: int):
        if int(n) < 1:
            raise ModelInvariantError("IIDProduct needs n >= 1")
        self.base = base
        self.n = int(n)
        self.param_dim = base.param_dim
        self._counts = None

    @cached_property
    def obs_space(self):
        return ObservationSpace.power(self.base.obs_space, self.n)

    def theta_ok(self, theta):
        return self.base.theta_ok(theta)

    def log_density(self, theta, X):
        X = _rows(X)
        nb = self.base.obs_space.dim
        total = np.zeros(X.shape[0])
        for j in range(self.n):
            total = total + self.base.log_density(theta, X[:, j * nb:(j + 1) * nb])
        return total

    def fisher(self, theta):
        return self.n * self.base.fisher(theta)

    def sample(self, theta, rng, size):
        return np.concatenate([self.base.sample(theta, rng, size) for _ in range(self.n)], axis=1)

    def discrete_table(self, theta):
        if not self.base.obs_space.is_finite:
            return None
        if self._counts is None:
            s = self.base.obs_space.size
            counts = np.array(list(_compositions(self.n, s)), dtype=float)
            logmult = (special.gammaln(self.n + 1.0)
                       - np.sum(special.gammaln(counts + 1.0), axis=1))
            self._counts = (counts, logmult)
        counts, logmult = self._counts
        with np.errstate(invalid="ignore"):
            lp_base = self.base.log_density(theta, self.base.obs_space.point_array)
            terms = np.where(counts == 0, 0.0, counts * lp_base[None, :])
        return logmult, np.sum(terms, axis=1), counts

    def kernel_plan(self, theta1, theta2):
        b = self.base
        if isinstance(b, GaussianKnownSigma):
            s = b.sigma / math.sqrt(self.n)
            return K.FAM_NORMAL, (theta1[0], s), (theta2[0], s)
        if isinstance(b, ExponentialRate):
            return K.FAM_GAMMA, (float(self.n), theta1[0]), (float(self.n), theta2[0])
        if isinstance(b, GaussianMeanSigma):
            return GaussianMeanSigma(b.n * self.n).kernel_plan(theta1, theta2)
        return None

    def obs_axes(self, theta):
        return list(self.base.obs_axes(theta)) * self.n

    def iid_parts(self):
        return self.base, self.n

    def describe(self):
        return {"family": self.family, "n": self.n, "base": self.base.describe()}


class CustomModel(DataModel):
    """User supplied family.

    Parameters
    ----------
    log_density : callable
        ``(theta, X) -> array`` of log densities (or log pmf values) for the
        rows of ``X``.
    obs_space : ObservationSpace
    param_dim : int
    theta_ok, fisher, sampler, axes, dist : callables, optional
        Parameter-domain predicate, analytic Fisher matrix, ``(theta, rng,
        size)`` sampler, integration axes and a univariate scipy
        distribution factory.
    """

    family = "Custom"

    def __init__(self, log_density: Callable, obs_space: ObservationSpace,
                 param_dim: int = 1, theta_ok=None, fisher=None, sampler=None,
                 axes=None, dist=None, name: str = "Custom", plan=None):
        self._logf = log_density
        self._space = obs_space
        self.param_dim = int(param_dim)
        self._theta_ok = theta_ok
        self._fisher = fisher
        self._sampler = sampler
        self._axes = axes
        self._dist = dist
        self._plan = plan
        self.name = name

    @cached_property
    def obs_space(self):
        return self._space

    def theta_ok(self, theta):
        return True if self._theta_ok is None else bool(self._theta_ok(theta))

    def log_density(self, theta, X):
        return np.asarray(self._logf(theta, _rows(X)), dtype=float)

    def fisher(self, theta):
        if self._fisher is None:
            raise NoAnalyticForm(f"custom model {self.name!r} has no registered Fisher matrix")
        return np.atleast_2d(np.asarray(self._fisher(theta), dtype=float))

    def sample(self, theta, rng, size):
        if self._sampler is not None:
            return _rows(self._sampler(theta, rng, size))
        return super().sample(theta, rng, size)

    def kernel_plan(self, theta1, theta2):
        return None if self._plan is None else self._plan(theta1, theta2)

    def obs_axes(self, theta):
        if self._axes is not None:
            return list(self._axes(theta))
        return super().obs_axes(theta)

    def scipy_dist(self, theta):
        if self._dist is None:
            return super().scipy_dist(theta)
        return self._dist(theta)

    def describe(self):
        return {"family": self.family, "name": self.name}


# --------------------------------------------------------------------------
# priors


class Prior:
    """Prior over a parameter space.

    ``log_density`` is vectorised over rows of an ``(m, M)`` array.  For a
    finite parameter space the "density" is the pmf.
    """

    kind = "Custom"
    normalised = True

    def __init__(self, space: ParameterSpace):
        self.space = space

    def log_density(self, thetas: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_density1(self, theta) -> float:
        return float(self.log_density(as_vector(theta)[None, :])[0])

    def density1(self, theta) -> float:
        return math.exp(self.log_density1(theta))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError(f"{self.kind} prior has no sampler")

    def describe(self) -> dict:
        return {"kind": self.kind}


class FinitePmf(Prior):
    kind = "FinitePmf"

    def __init__(self, space: ParameterSpace, masses: Sequence[float]):
        super().__init__(space)
        if not space.is_finite:
            raise ModelInvariantError("FinitePmf needs a finite parameter space")
        m = np.asarray(masses, dtype=float)
        if m.shape != (len(space.points),):
            raise ModelInvariantError("one mass per parameter point is required")
        if np.any(m <= 0):
            raise ModelInvariantError("prior masses must be positive")
        if abs(math.fsum(m.tolist()) - 1.0) > 1e-12:
            raise ModelInvariantError("prior masses must sum to one")
        self.masses = m

    def log_density(self, thetas):
        out = np.empty(len(thetas))
        for i, t in enumerate(np.atleast_2d(thetas)):
            j = self.space.index_of(t)
            if j < 0:
                raise OutOfSupport(f"theta={list(t)} is not a prior support point")
            out[i] = math.log(self.masses[j])
        return out

    def sample(self, rng, size):
        idx = rng.choice(len(self.masses), size=size, p=self.masses)
        return self.space.point_array[idx]

    def describe(self):
        return {"kind": self.kind, "masses": self.masses.tolist()}


class UniformBox(Prior):
    kind = "UniformBox"

    def __init__(self, space: ParameterSpace):
        super().__init__(space)
        if space.is_finite:
            self._logc = -math.log(len(space.points))
        else:
            self._logc = -float(np.sum(np.log(space.upper_array - space.lower_array)))

    def log_density(self, thetas):
        return np.full(len(np.atleast_2d(thetas)), self._logc)

    def sample(self, rng, size):
        if self.space.is_finite:
            return self.space.point_array[rng.integers(len(self.space.points), size=size)]
        lo, hi = self.space.lower_array, self.space.upper_array
        return lo + (hi - lo) * rng.random((size, self.space.dim))


class _TruncatedProduct(Prior):
    """Independent per-axis scipy distributions truncated to the box."""

    def __init__(self, space: ParameterSpace, dists):
        super().__init__(space)
        if space.is_finite:
            raise ModelInvariantError(f"{self.kind} prior needs a box parameter space")
        self._dists = dists
        lo, hi = space.lower_array, space.upper_array
        self._lo_cdf = np.array([d.cdf(l) for d, l in zip(dists, lo)])
        self._hi_cdf = np.array([d.cdf(h) for d, h in zip(dists, hi)])
        mass = self._hi_cdf - self._lo_cdf
        if np.any(mass <= 0):
            raise ModelInvariantError(f"{self.kind} prior has no mass on the box")
        self._logmass = float(np.sum(np.log(mass)))

    def log_density(self, thetas):
        t = np.atleast_2d(thetas)
        out = np.zeros(len(t))
        for i, d in enumerate(self._dists):
            out += d.logpdf(t[:, i])
        return out - self._logmass

    def sample(self, rng, size):
        u = rng.random((size, self.space.dim))
        cols = [d.ppf(self._lo_cdf[i] + u[:, i] * (self._hi_cdf[i] - self._lo_cdf[i]))
                for i, d in enumerate(self._dists)]
        return np.stack(cols, axis=1)


class BetaParams(_TruncatedProduct):
    kind = "BetaParams"

    def __init__(self, space: ParameterSpace, a, b):
        a = np.broadcast_to(np.asarray(a, dtype=float), (space.dim,))
        b = np.broadcast_to(np.asarray(b, dtype=float), (space.dim,))
        if not space.is_finite and (np.any(space.lower_array < 0) or np.any(space.upper_array > 1)):
            raise ModelInvariantError("BetaParams needs a box inside the unit cube")
        self.a, self.b = a.copy(), b.copy()
        super().__init__(space, [stats.beta(ai, bi) for ai, bi in zip(a, b)])

    def describe(self):
        return {"kind": self.kind, "a": self.a.tolist(), "b": self.b.tolist()}


class GaussianParams(_TruncatedProduct):
    kind = "GaussianParams"

    def __init__(self, space: ParameterSpace, mean, sd):
        mean = np.broadcast_to(np.asarray(mean, dtype=float), (space.dim,))
        sd = np.broadcast_to(np.asarray(sd, dtype=float), (space.dim,))
        if np.any(sd <= 0):
            raise ModelInvariantError("prior standard deviations must be positive")
        self.mean, self.sd = mean.copy(), sd.copy()
        super().__init__(space, [stats.norm(m, s) for m, s in zip(mean, sd)])

    def describe(self):
        return {"kind": self.kind, "mean": self.mean.tolist(), "sd": self.sd.tolist()}


class PowerLawSigma(Prior):
    """Scale prior proportional to 1/theta[axis], flat elsewhere; left unnormalised."""

    kind = "PowerLawSigma"
    normalised = False

    def __init__(self, space: ParameterSpace, axis: int = -1):
        super().__init__(space)
        if space.is_finite:
            raise ModelInvariantError("PowerLawSigma needs a box parameter space")
        self.axis = axis % space.dim
        if space.lower[self.axis] <= 0:
            raise ModelInvariantError("the scale axis must be strictly positive")

    def log_density(self, thetas):
        return -np.log(np.atleast_2d(thetas)[:, self.axis])

    def describe(self):
        return {"kind": self.kind, "axis": self.axis}


class CustomDensity(Prior):
    """User supplied prior ``log_density(thetas) -> array``.

    A proper prior is checked to integrate (or sum) to one on construction.
    """

    kind = "CustomDensity"

    def __init__(self, space: ParameterSpace, log_density: Callable,
                 normalised: bool = True, sampler: Callable | None = None,
                 check: bool = True, name: str = "Custom"):
        super().__init__(space)
        self._logf = log_density
        self._sampler = sampler
        self.normalised = normalised
        self.name = name
        if normalised and check:
            total = self._total_mass()
            if abs(total - 1.0) > 1e-6:
                raise ModelInvariantError(f"custom prior integrates to {total:.8g}, not 1")

    def _total_mass(self) -> float:
        if self.space.is_finite:
            return math.fsum(np.exp(self.log_density(self.space.point_array)).tolist())
        axes = tuple(Axis(lo, hi) for lo, hi in zip(self.space.lower, self.space.upper))
        return integrate(lambda T: np.exp(self.log_density(T)), BoxDomain(axes), rtol=1e-8).value

    def log_density(self, thetas):
        return np.asarray(self._logf(np.atleast_2d(thetas)), dtype=float)

    def sample(self, rng, size):
        if self._sampler is None:
            return super().sample(rng, size)
        return np.atleast_2d(np.asarray(self._sampler(rng, size), dtype=float))

    def describe(self):
        return {"kind": self.kind, "name": self.name, "normalised": self.normalised}


# --------------------------------------------------------------------------
# problems


@dataclass(frozen=True, eq=False)
class EstimationProblem:
    """A prior plus a conditional data family over a parameter space.

    The class tag is inferred from the spaces when omitted and validated
    when given.
    """

    theta_space: ParameterSpace
    model: DataModel
    prior: Prior
    cls: Optional[str] = None
    name: str = "problem"
    validate: bool = True
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        inferred = self._infer_class()
        if self.cls is None:
            object.__setattr__(self, "cls", inferred)
        elif self.cls not in PROBLEM_CLASSES:
            raise ModelInvariantError(f"unknown problem class {self.cls!r}")
        elif self.cls != inferred:
            raise ModelInvariantError(
                f"class {self.cls} is inconsistent with the spaces (expected {inferred})")
        if self.model.param_dim != self.theta_space.dim:
            raise ModelInvariantError("model parameter dimension does not match the space")
        if self.prior.space != self.theta_space:
            raise ModelInvariantError("prior is defined on a different parameter space")
        if self.validate:
            self._validate()

    def _infer_class(self) -> str:
        if self.theta_space.is_finite:
            return "Discrete"
        if self.model.obs_space.is_finite:
            return "SemiContinuous"
        return "Continuous"

    def _validate(self):
        grid = self.theta_space.sample_grid(3)
        for t in grid:
            if not self.model.theta_ok(t):
                raise ModelInvariantError(f"theta={t.tolist()} is outside the model's domain")
        lp = self.prior.log_density(grid)
        if not np.all(np.isfinite(lp)):
            raise ModelInvariantError("prior is not positive on the parameter space")
        ref = grid[len(grid) // 2]
        mass = _total_mass(self.model, ref)
        if mass is not None and abs(mass - 1.0) > 1e-6:
            raise ModelInvariantError(
                f"model does not normalise at theta={ref.tolist()} (total {mass:.10g})")
        if self.theta_space.is_finite:
            self._check_distinct()

    def _check_distinct(self):
        pts = self.theta_space.point_array
        space = self.model.obs_space
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if space.is_finite:
                    xs = space.point_array
                else:
                    ax = self.model.obs_axes(pts[i])
                    offs = np.array([-2.0, -0.5, 0.0, 0.7, 1.9])
                    xs = np.stack([np.clip(a.center + a.scale * offs, max(a.lo, -1e300), min(a.hi, 1e300))
                                   for a in ax], axis=1)
                a = self.model.log_density(pts[i], xs)
                b = self.model.log_density(pts[j], xs)
                if np.allclose(a, b, rtol=0.0, atol=1e-14):
                    raise ModelInvariantError(
                        f"parameters {pts[i].tolist()} and {pts[j].tolist()} give the same distribution")

    # convenience -----------------------------------------------------------
    @property
    def obs_space(self) -> ObservationSpace:
        return self.model.obs_space

    @property
    def dim(self) -> int:
        return self.theta_space.dim

    def with_prior(self, prior: Prior, name: str | None = None) -> "EstimationProblem":
        return EstimationProblem(self.theta_space, self.model, prior, None,
                                 name or self.name, self.validate)

    def describe(self) -> dict:
        return {"name": self.name, "class": self.cls, "theta_space": self.theta_space.as_dict(),
                "obs_space": self.obs_space.as_dict(), "model": self.model.describe(),
                "prior": self.prior.describe()}

    def log_unnorm(self, theta, x) -> float:
        """``log f(x | theta) + log prior(theta)`` without validation."""
        lf = float(self.model.log_density(theta, x[None, :])[0])
        return lf + self.prior.log_density1(theta)

    def evidence(self, x) -> float:
        x = self.obs_space.check(x)
        if not self.prior.normalised:
            raise NonNormalisablePrior("the prior is not normalised, so the evidence is undefined")
        key = x.tobytes()
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        if self.theta_space.is_finite:
            pts = self.theta_space.point_array
            vals = [math.exp(self.log_unnorm(t, x)) for t in pts]
            ev = math.fsum(vals)
        else:
            axes = tuple(Axis(lo, hi) for lo, hi in zip(self.theta_space.lower, self.theta_space.upper))

            def fn(T):
                return np.array([math.exp(self.log_unnorm(t, x)) for t in T])

            ev = integrate(fn, BoxDomain(axes), rtol=1e-10, atol=1e-300).value
        with self._lock:
            self._cache[key] = ev
        return ev


def _total_mass(model: DataModel, theta) -> float | None:
    space = model.obs_space
    if space.is_finite:
        tab = model.discrete_table(theta)
        logmult, lp, _ = tab
        return math.fsum(np.exp(logmult + lp).tolist())
    parts = model.iid_parts()
    if parts is not None:
        return _total_mass(parts[0], theta)
    if space.dim > 3:
        return None
    axes = tuple(model.obs_axes(theta))
    return integrate(lambda X: model.density(theta, X), BoxDomain(axes), rtol=1e-9).value


def cond_density(problem: EstimationProblem, theta, x) -> float:
    """``f(x | theta)``; a pmf value when x is discrete."""
    t = problem.theta_space.check(theta)
    v = problem.obs_space.check(x)
    return float(problem.model.density(t, v[None, :])[0])


def likelihood_ratio(problem: EstimationProblem, theta1, theta2, x) -> float:
    """``f(x | theta1) / f(x | theta2)``."""
    t1 = problem.theta_space.check(theta1)
    t2 = problem.theta_space.check(theta2)
    v = problem.obs_space.check(x)
    l1 = float(problem.model.log_density(t1, v[None, :])[0])
    l2 = float(problem.model.log_density(t2, v[None, :])[0])
    if l2 == -math.inf:
        raise DivisionByZeroSupport(
            f"f(x | {t2.tolist()}) = 0 at x={v.tolist()}; supports must coincide")
    return math.exp(l1 - l2)


def posterior_unnorm(problem: EstimationProblem, theta, x) -> float:
    """``f(x | theta) * prior(theta)``."""
    t = problem.theta_space.check(theta)
    v = problem.obs_space.check(x)
    return math.exp(problem.log_unnorm(t, v))


def evidence(problem: EstimationProblem, x) -> float:
    return problem.evidence(x)


def posterior(problem: EstimationProblem, theta, x) -> float:
    """Normalised posterior mass (discrete) or density (continuous) at theta."""
    if not problem.prior.normalised:
        raise NonNormalisablePrior("posterior normalisation needs a proper prior")
    return posterior_unnorm(problem, theta, x) / problem.evidence(x)
