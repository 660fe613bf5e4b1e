"""Numerical auditors for the four loss invariance axioms.

* IRP: invariance to reparameterisation of theta.
* IRO: invariance to an invertible, piecewise-smooth re-encoding of x.
* IIA: invariance to changes of the problem away from the two parameters.
* ISI: invariance to appending independent noise to x.

Each ``check_*`` evaluates the loss on an original and a transformed problem
and reports the worst absolute and relative deviation.  Observation
transforms are applied through the change-of-variables density and then
integrated by the generic quadrature path; nothing is delegated back to the
untransformed model, so an invariant loss has to earn its pass.

Also here: the likelihood-ratio quantile function ``c[P, Q]`` and the 1-D
rearrangement that makes ``Q`` uniform and ``P`` monotone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import (
    EicError,
    IntegralNotConverged,
    ModelInvariantError,
    PreconditionViolated,
    SingularDivergence,
    UnsupportedClass,
    UnsupportedTransform,
)
from .losses import LossSpec, loss_value
from .model import (
    CustomDensity,
    DataModel,
    EstimationProblem,
    FinitePmf,
    ObservationSpace,
    ParameterSpace,
    Prior,
    as_vector,
)
from .numerics.quadrature import Axis

__all__ = [
    "ParamTransform",
    "ObsTransform",
    "affine_param",
    "cube_param",
    "coordinatewise_param",
    "custom_param",
    "affine_obs",
    "power3_obs",
    "piecewise_affine_obs",
    "cdf_obs",
    "NOISE_KINDS",
    "transform_params",
    "transform_obs",
    "augment_noise",
    "alter_prior",
    "check_irp",
    "check_iro",
    "check_iia",
    "check_isi",
    "Deviation",
    "verdict",
    "PASS_TOL",
    "FAIL_TOL",
    "CFunction",
    "c_function",
    "c_eval",
    "Rearrangement",
    "canonical_rearrangement_1d",
    "mle_eic_losses",
]

PASS_TOL = 1e-5
FAIL_TOL = 1e-2
NOISE_KINDS = ("BernoulliHalf", "Uniform01", "Gauss01", "Point")


def verdict(rel_dev: float) -> str:
    """``pass`` below 1e-5, ``fail`` above 1e-2, ``inconclusive`` between."""
    if rel_dev < PASS_TOL:
        return "pass"
    if rel_dev > FAIL_TOL:
        return "fail"
    return "inconclusive"


# --------------------------------------------------------------------------
# parameter transforms


@dataclass(frozen=True)
class ParamTransform:
    """Diffeomorphism of parameter space with its Jacobian.

    ``coordinatewise`` transforms map boxes to boxes and are the only ones
    that can be applied to box parameter spaces.
    """

    kind: str
    name: str
    forward: Callable
    inverse: Callable
    jacobian: Callable
    coordinatewise: bool = True

    def check(self, samples) -> None:
        for t in np.atleast_2d(samples):
            back = self.inverse(self.forward(t))
            if np.max(np.abs(back - t)) > 1e-10 * (1.0 + np.max(np.abs(t))):
                raise UnsupportedTransform(f"{self.name}: inverse does not undo forward at {t.tolist()}")
            if abs(np.linalg.det(np.atleast_2d(self.jacobian(t)))) == 0.0:
                raise UnsupportedTransform(f"{self.name}: singular Jacobian at {t.tolist()}")


def affine_param(scale, shift=0.0, name: str | None = None) -> ParamTransform:
    """``theta -> A theta + b``; ``scale`` is a vector (diagonal A) or a matrix."""
    A = np.asarray(scale, dtype=float)
    b = np.asarray(shift, dtype=float)
    if A.ndim <= 1:
        a = A

        def fwd(t):
            return a * t + b

        def inv(u):
            return (u - b) / a

        def jac(t):
            return np.diag(np.broadcast_to(a, np.shape(t)).astype(float))

        return ParamTransform("AffineInvertible", name or "affine", fwd, inv, jac, True)
    Ainv = np.linalg.inv(A)
    diag = np.allclose(A, np.diag(np.diag(A)))
    return ParamTransform("AffineInvertible", name or "affine",
                          lambda t: A @ t + b, lambda u: Ainv @ (u - b), lambda t: A, diag)


def coordinatewise_param(f, finv, df, name: str = "coordinatewise") -> ParamTransform:
    """Apply a strictly monotone C1 scalar map to every coordinate."""
    return ParamTransform("CoordinatewiseMonotoneC1", name,
                          lambda t: np.asarray(f(np.asarray(t, dtype=float)), dtype=float),
                          lambda u: np.asarray(finv(np.asarray(u, dtype=float)), dtype=float),
                          lambda t: np.diag(np.atleast_1d(df(np.asarray(t, dtype=float)))),
                          True)


def _cube_inv(y):
    y = np.asarray(y, dtype=float)
    d = np.sqrt(0.25 * y * y + 1.0 / 27.0)
    t = np.cbrt(0.5 * y + d) + np.cbrt(0.5 * y - d)
    # one Newton polish on t^3 + t - y
    return t - (t ** 3 + t - y) / (3.0 * t * t + 1.0)


def cube_param() -> ParamTransform:
    """``theta -> theta^3 + theta`` on every coordinate."""
    return coordinatewise_param(lambda t: t ** 3 + t, _cube_inv, lambda t: 3.0 * t * t + 1.0,
                                name="cube")


def custom_param(forward, inverse, jacobian, name: str = "custom",
                 coordinatewise: bool = False) -> ParamTransform:
    return ParamTransform("Custom", name, forward, inverse, jacobian, coordinatewise)


class ReparamModel(DataModel):
    """The same data distributions indexed by ``phi = T(theta)``."""

    def __init__(self, base: DataModel, T: ParamTransform):
        self.base = base
        self.T = T
        self.param_dim = base.param_dim
        self.family = base.family

    @property
    def obs_space(self):
        return self.base.obs_space

    def _t(self, phi):
        return self.T.inverse(np.asarray(phi, dtype=float))

    def theta_ok(self, phi):
        return self.base.theta_ok(self._t(phi))

    def log_density(self, phi, X):
        return self.base.log_density(self._t(phi), X)

    def fisher(self, phi):
        t = self._t(phi)
        Jinv = np.linalg.inv(np.atleast_2d(self.T.jacobian(t)))
        return Jinv.T @ self.base.fisher(t) @ Jinv

    def sample(self, phi, rng, size):
        return self.base.sample(self._t(phi), rng, size)

    def discrete_table(self, phi):
        return self.base.discrete_table(self._t(phi))

    def kernel_plan(self, phi1, phi2):
        return self.base.kernel_plan(self._t(phi1), self._t(phi2))

    def obs_axes(self, phi):
        return self.base.obs_axes(self._t(phi))

    def iid_parts(self):
        parts = self.base.iid_parts()
        return None if parts is None else (ReparamModel(parts[0], self.T), parts[1])

    def scipy_dist(self, phi):
        return self.base.scipy_dist(self._t(phi))

    def describe(self):
        return {"family": "Reparameterised", "transform": self.T.name, "base": self.base.describe()}


def _map_space(space: ParameterSpace, T: ParamTransform) -> ParameterSpace:
    if space.is_finite:
        return ParameterSpace.finite_set([T.forward(p) for p in space.point_array])
    if not T.coordinatewise:
        raise UnsupportedTransform(f"{T.name} does not map a box onto a box")
    a = T.forward(space.lower_array)
    b = T.forward(space.upper_array)
    return ParameterSpace.box(np.minimum(a, b), np.maximum(a, b))


def transform_params(problem: EstimationProblem, T: ParamTransform) -> EstimationProblem:
    """The problem seen in the coordinates ``phi = T(theta)``.

    The prior becomes ``prior(T^-1 phi) / |det J|`` (a pmf is carried over
    unchanged) and samples are pushed forward through ``T`` so seeded draws
    correspond one to one.
    """
    space = problem.theta_space
    T.check(space.sample_grid(3))
    new_space = _map_space(space, T)
    base_prior = problem.prior
    if space.is_finite:
        masses = [math.exp(base_prior.log_density1(T.inverse(p))) for p in new_space.point_array]
        prior: Prior = FinitePmf(new_space, np.asarray(masses) / math.fsum(masses))
    else:
        def logf(P):
            out = np.empty(len(P))
            for i, p in enumerate(P):
                t = T.inverse(p)
                out[i] = (base_prior.log_density1(t)
                          - math.log(abs(np.linalg.det(np.atleast_2d(T.jacobian(t))))))
            return out

        def sampler(rng, size):
            return np.array([T.forward(t) for t in base_prior.sample(rng, size)])

        prior = CustomDensity(new_space, logf, normalised=base_prior.normalised,
                              sampler=sampler, check=False, name=f"{base_prior.kind}@{T.name}")
    return EstimationProblem(new_space, ReparamModel(problem.model, T), prior,
                             None, f"{problem.name}|{T.name}", validate=False)


# --------------------------------------------------------------------------
# observation transforms


@dataclass(frozen=True)
class ObsTransform:
    """Coordinatewise invertible re-encoding ``y = G(x)`` of observations.

    ``log_abs_jac(x)`` is ``log |G'(x)|`` per coordinate; ``breakpoints``
    are y-values where G is not smooth.
    """

    kind: str
    name: str
    forward: Callable
    inverse: Callable
    log_abs_jac: Callable
    breakpoints: tuple = ()

    def map_bounds(self, lo: float, hi: float) -> tuple:
        a = float(self.forward(np.array([lo]))[0])
        b = float(self.forward(np.array([hi]))[0])
        return min(a, b), max(a, b)

    def map_axis(self, axis: Axis) -> Axis:
        lo, hi = self.map_bounds(axis.lo, axis.hi)
        c = float(self.forward(np.array([axis.center]))[0])
        ends = self.forward(np.array([axis.center - axis.scale, axis.center + axis.scale]))
        scale = 0.5 * abs(float(ends[1] - ends[0]))
        bps = tuple(float(v) for v in self.forward(np.array(axis.breakpoints, dtype=float))) if axis.breakpoints else ()
        bps = tuple(sorted(set(bps) | {b for b in self.breakpoints if lo < b < hi}))
        return Axis(lo, hi, c, scale if scale > 0 else 1.0, bps)


def affine_obs(a: float = 2.0, b: float = 1.0) -> ObsTransform:
    if a == 0:
        raise UnsupportedTransform("affine observation map needs a nonzero slope")
    return ObsTransform("AffineInvertible", f"affine({a:g},{b:g})",
                        lambda x: a * np.asarray(x, dtype=float) + b,
                        lambda y: (np.asarray(y, dtype=float) - b) / a,
                        lambda x: np.full(np.shape(x), math.log(abs(a))))


def power3_obs() -> ObsTransform:
    """``y = x^3``; smooth except at 0 where the derivative vanishes."""
    with np.errstate(divide="ignore"):
        return ObsTransform("CoordinatewisePower3", "cube",
                            lambda x: np.asarray(x, dtype=float) ** 3,
                            lambda y: np.cbrt(np.asarray(y, dtype=float)),
                            lambda x: math.log(3.0) + 2.0 * np.log(np.abs(np.asarray(x, dtype=float))),
                            (0.0,))


def piecewise_affine_obs(knots=(0.0, 1.0), slopes=(0.5, 2.0, 1.0)) -> ObsTransform:
    """Continuous increasing piecewise-linear map fixing the first knot."""
    knots = np.asarray(knots, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    if len(slopes) != len(knots) + 1 or np.any(slopes <= 0) or np.any(np.diff(knots) <= 0):
        raise UnsupportedTransform("piecewise map needs increasing knots and positive slopes")
    # y-values at the knots
    yk = np.concatenate([[knots[0]], knots[0] + np.cumsum(slopes[1:-1] * np.diff(knots))])

    def fwd(x):
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(knots, x, side="right")
        base_x = np.where(i == 0, knots[0], knots[np.maximum(i - 1, 0)])
        base_y = np.where(i == 0, yk[0], yk[np.maximum(i - 1, 0)])
        return base_y + slopes[i] * (x - base_x)

    def inv(y):
        y = np.asarray(y, dtype=float)
        i = np.searchsorted(yk, y, side="right")
        base_x = np.where(i == 0, knots[0], knots[np.maximum(i - 1, 0)])
        base_y = np.where(i == 0, yk[0], yk[np.maximum(i - 1, 0)])
        return base_x + (y - base_y) / slopes[i]

    def lj(x):
        return np.log(slopes[np.searchsorted(knots, np.asarray(x, dtype=float), side="right")])

    return ObsTransform("PiecewiseAffine", "piecewise", fwd, inv, lj, tuple(yk.tolist()))


def cdf_obs(dist: str = "logistic", loc: float = 0.0, scale: float = 1.0) -> ObsTransform:
    """``y = F(x)`` for a continuous reference distribution F (scipy name)."""
    d = getattr(stats, dist)(loc=loc, scale=scale)
    return ObsTransform("CdfMap", f"cdf({dist})",
                        lambda x: d.cdf(np.asarray(x, dtype=float)),
                        lambda y: d.ppf(np.asarray(y, dtype=float)),
                        lambda x: d.logpdf(np.asarray(x, dtype=float)))


class ObsTransformedModel(DataModel):
    """Distributions of ``y = G(x)`` with ``x`` from the base model."""

    def __init__(self, base: DataModel, G: ObsTransform):
        self.base = base
        self.G = G
        self.param_dim = base.param_dim
        self.family = base.family
        bspace = base.obs_space
        if bspace.is_finite:
            pts = G.forward(bspace.point_array)
            if len({tuple(r) for r in pts.tolist()}) != len(pts):
                raise UnsupportedTransform(f"{G.name} is not injective on the support")
            self._space = ObservationSpace.finite(pts)
            # exact relabelling: look y up rather than inverting G numerically
            self._lookup = {tuple(r): i for i, r in enumerate(self._space.point_array.tolist())}
            self._base_pts = bspace.point_array
        else:
            lo, hi = zip(*(G.map_bounds(l, h) for l, h in zip(bspace.lower, bspace.upper)))
            self._space = ObservationSpace.continuum(bspace.dim, lo, hi)

    @property
    def obs_space(self):
        return self._space

    def theta_ok(self, theta):
        return self.base.theta_ok(theta)

    def log_density(self, theta, Y):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if self._space.is_finite:
            idx = np.array([self._lookup.get(tuple(r), -1) for r in Y.tolist()])
            out = np.full(len(Y), -np.inf)
            ok = idx >= 0
            if np.any(ok):
                out[ok] = self.base.log_density(theta, self._base_pts[idx[ok]])
            return out
        X = self.G.inverse(Y)
        lp = self.base.log_density(theta, X)
        with np.errstate(divide="ignore"):
            return lp - np.sum(self.G.log_abs_jac(X), axis=1)

    def fisher(self, theta):
        return self.base.fisher(theta)

    def sample(self, theta, rng, size):
        return self.G.forward(self.base.sample(theta, rng, size))

    def obs_axes(self, theta):
        return [self.G.map_axis(a) for a in self.base.obs_axes(theta)]

    def describe(self):
        return {"family": "ObsTransformed", "transform": self.G.name, "base": self.base.describe()}


def transform_obs(problem: EstimationProblem, G: ObsTransform) -> EstimationProblem:
    return EstimationProblem(problem.theta_space, ObsTransformedModel(problem.model, G),
                             problem.prior, None, f"{problem.name}|{G.name}", validate=False)


# --------------------------------------------------------------------------
# superfluous noise


_NOISE = {
    "BernoulliHalf": ("finite", [0.0, 1.0], [0.5, 0.5]),
    "Point": ("finite", [0.0], [1.0]),
    "Uniform01": ("continuous", stats.uniform(0.0, 1.0), Axis(0.0, 1.0, 0.5, 0.5)),
    "Gauss01": ("continuous", stats.norm(0.0, 1.0), Axis(-math.inf, math.inf, 0.0, 1.0)),
}


class NoiseAugmentedModel(DataModel):
    """Observation ``(x, y)`` with ``y`` independent of theta given x."""

    def __init__(self, base: DataModel, noise: str):
        if noise not in _NOISE:
            raise UnsupportedTransform(f"unknown noise {noise!r}; choose from {NOISE_KINDS}")
        kind, a, b = _NOISE[noise]
        bspace = base.obs_space
        if (kind == "finite") != bspace.is_finite:
            raise UnsupportedTransform(
                f"{noise} noise does not match the observation type of the base model")
        self.base = base
        self.noise = noise
        self.param_dim = base.param_dim
        self.family = base.family
        if kind == "finite":
            self._ypts = np.array(a)
            self._ylogp = np.log(np.array(b))
            pts = [tuple(p) + (y,) for p in bspace.point_array.tolist() for y in a]
            self._space = ObservationSpace.finite(pts)
        else:
            self._dist, self._axis = a, b
            self._space = ObservationSpace.continuum(
                bspace.dim + 1, list(bspace.lower) + [self._axis.lo], list(bspace.upper) + [self._axis.hi])

    @property
    def obs_space(self):
        return self._space

    def theta_ok(self, theta):
        return self.base.theta_ok(theta)

    def _noise_logp(self, y):
        if self._space.is_finite:
            idx = np.searchsorted(self._ypts, y)
            return self._ylogp[np.clip(idx, 0, len(self._ypts) - 1)]
        with np.errstate(divide="ignore"):
            return self._dist.logpdf(y)

    def log_density(self, theta, X):
        X = np.asarray(X, dtype=float)
        return self.base.log_density(theta, X[:, :-1]) + self._noise_logp(X[:, -1])

    def fisher(self, theta):
        return self.base.fisher(theta)

    def sample(self, theta, rng, size):
        x = self.base.sample(theta, rng, size)
        if self._space.is_finite:
            y = rng.choice(self._ypts, size=size, p=np.exp(self._ylogp))
        else:
            y = self._dist.rvs(size=size, random_state=rng)
        return np.column_stack([x, y])

    def discrete_table(self, theta):
        tab = self.base.discrete_table(theta)
        if tab is None:
            return None
        logmult, lp, keys = tab
        k = len(self._ypts)
        return (np.repeat(logmult, k), (lp[:, None] + self._ylogp[None, :]).ravel(),
                np.repeat(np.asarray(keys), k, axis=0))

    def obs_axes(self, theta):
        return list(self.base.obs_axes(theta)) + [self._axis]

    def describe(self):
        return {"family": "NoiseAugmented", "noise": self.noise, "base": self.base.describe()}


def augment_noise(problem: EstimationProblem, noise: str) -> EstimationProblem:
    return EstimationProblem(problem.theta_space, NoiseAugmentedModel(problem.model, noise),
                             problem.prior, None, f"{problem.name}+{noise}", validate=False)


# --------------------------------------------------------------------------
# prior alteration for IIA


def _bump(u):
    """Compactly supported C1 bump on [-1, 1] integrating to one."""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) < 1.0, 0.9375 * (1.0 - u * u) ** 2, 0.0)


class _AlteredPrior(Prior):
    kind = "CustomDensity"

    def __init__(self, base: Prior, add_at, remove_at, width, mass):
        super().__init__(base.space)
        self.base = base
        self.add_at = np.asarray(add_at, dtype=float)
        self.remove_at = np.asarray(remove_at, dtype=float)
        self.width = float(width)
        self.mass = float(mass)
        self.normalised = base.normalised

    def _bumps(self, T, centre):
        u = (np.atleast_2d(T) - centre) / self.width
        return np.prod(_bump(u), axis=1) / self.width ** self.space.dim

    def log_density(self, thetas):
        T = np.atleast_2d(thetas)
        dens = (np.exp(self.base.log_density(T)) + self.mass * self._bumps(T, self.add_at)
                - self.mass * self._bumps(T, self.remove_at))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(dens)

    def sample(self, rng, size):
        # rejection from the mixture base + mass * bump(add_at)
        out = []
        while len(out) < size:
            n = size - len(out)
            from_bump = rng.random(n) < self.mass / (1.0 + self.mass)
            base = self.base.sample(rng, n)
            bump = self.add_at + self.width * _bump_draws(rng, n, self.space.dim)
            cand = np.where(from_bump[:, None], bump, base)
            env = np.exp(self.base.log_density(cand)) + self.mass * self._bumps(cand, self.add_at)
            keep = rng.random(n) * env <= env - self.mass * self._bumps(cand, self.remove_at)
            out.extend(cand[keep])
        return np.array(out[:size])

    def describe(self):
        return {"kind": "AlteredPrior", "base": self.base.describe(), "add_at": self.add_at.tolist(),
                "remove_at": self.remove_at.tolist(), "width": self.width, "mass": self.mass}


def _bump_draws(rng, n, dim):
    out = np.empty((n, dim))
    filled = 0
    while filled < n:
        u = rng.uniform(-1.0, 1.0, size=(2 * (n - filled) + 8, dim))
        acc = rng.random(len(u)) <= np.prod((1.0 - u * u) ** 2, axis=1)
        take = u[acc][: n - filled]
        out[filled:filled + len(take)] = take
        filled += len(take)
    return out


def alter_prior(problem: EstimationProblem, protect: Sequence, add_at, remove_at,
                width: float = 0.05, mass: float = 0.02) -> EstimationProblem:
    """Move prior mass between two regions that avoid the protected points.

    On a box, ``mass`` is carried by a compact bump of radius ``width`` from
    ``remove_at`` to ``add_at``.  On a finite set, ``add_at`` and
    ``remove_at`` must be support points and ``mass`` moves between them.
    The prior and the model are unchanged at every protected point.
    """
    space = problem.theta_space
    prot = [as_vector(p, space.dim) for p in protect]
    if space.is_finite:
        ia, ir = space.index_of(add_at), space.index_of(remove_at)
        if ia < 0 or ir < 0:
            raise PreconditionViolated("alteration points must be support points")
        if any(space.index_of(p) in (ia, ir) for p in prot):
            raise PreconditionViolated("alteration would touch a protected point")
        masses = np.exp(problem.prior.log_density(space.point_array))
        if masses[ir] <= mass:
            raise PreconditionViolated("not enough prior mass to move")
        masses[ia] += mass
        masses[ir] -= mass
        return problem.with_prior(FinitePmf(space, masses / math.fsum(masses.tolist())),
                                  f"{problem.name}|altered")
    for c in (add_at, remove_at):
        c = as_vector(c, space.dim)
        if any(np.max(np.abs(p - c)) < width for p in prot):
            raise PreconditionViolated("bump overlaps a protected point")
        if np.any(c - width < space.lower_array) or np.any(c + width > space.upper_array):
            raise PreconditionViolated("bump leaves the parameter space")
    prior = _AlteredPrior(problem.prior, add_at, remove_at, width, mass)
    probe = as_vector(remove_at, space.dim) + width * np.linspace(-1, 1, 41)[:, None] * np.ones(space.dim)
    if not np.all(np.isfinite(prior.log_density(probe))):
        raise PreconditionViolated("altered prior would not stay positive")
    return EstimationProblem(space, problem.model, prior, None, f"{problem.name}|altered",
                             validate=False)


# --------------------------------------------------------------------------
# checks


@dataclass
class Deviation:
    """Worst deviation over the audited pairs."""

    max_abs: float
    max_rel: float
    values: list = field(default_factory=list)
    error: Optional[str] = None

    @property
    def verdict(self) -> str:
        return verdict(self.max_rel)

    def as_dict(self) -> dict:
        return {"max_abs": self.max_abs, "max_rel": self.max_rel, "verdict": self.verdict,
                "values": self.values, "error": self.error}


def _compare(loss, pa, pb, pairs_a, pairs_b) -> Deviation:
    worst_abs = 0.0
    worst_rel = 0.0
    rows = []
    for (a1, a2), (b1, b2) in zip(pairs_a, pairs_b):
        la = loss_value(loss, pa, a1, a2)
        try:
            lb = loss_value(loss, pb, b1, b2)
        except (SingularDivergence, IntegralNotConverged) as exc:
            # the transformed loss does not exist: certainly not invariant
            return Deviation(math.inf, math.inf, rows, f"{type(exc).__name__}: {exc}")
        d = abs(la - lb)
        rel = d / max(abs(la), 1e-300) if d > 0 else 0.0
        worst_abs = max(worst_abs, d)
        worst_rel = max(worst_rel, rel)
        rows.append({"theta1": np.asarray(a1).tolist(), "theta2": np.asarray(a2).tolist(),
                     "original": la, "transformed": lb})
    return Deviation(worst_abs, worst_rel, rows)


def _vec_pairs(problem, pairs):
    return [(as_vector(a, problem.dim), as_vector(b, problem.dim)) for a, b in pairs]


def check_irp(loss: LossSpec, problem: EstimationProblem, transform: ParamTransform,
              pairs) -> Deviation:
    """``L(theta1, theta2)`` versus ``L'(T theta1, T theta2)`` on the reparameterised problem."""
    pairs = _vec_pairs(problem, pairs)
    other = transform_params(problem, transform)
    mapped = [(transform.forward(a), transform.forward(b)) for a, b in pairs]
    return _compare(loss, problem, other, pairs, mapped)


def check_iro(loss: LossSpec, problem: EstimationProblem, transform: ObsTransform,
              pairs) -> Deviation:
    pairs = _vec_pairs(problem, pairs)
    return _compare(loss, problem, transform_obs(problem, transform), pairs, pairs)


def check_isi(loss: LossSpec, problem: EstimationProblem, noise: str, pairs) -> Deviation:
    pairs = _vec_pairs(problem, pairs)
    return _compare(loss, problem, augment_noise(problem, noise), pairs, pairs)


def _probe_obs(problem, theta):
    space = problem.obs_space
    if space.is_finite:
        return space.point_array
    cols = []
    for ax in problem.model.obs_axes(theta):
        pts = ax.center + ax.scale * np.array([-2.5, -1.0, -0.3, 0.0, 0.4, 1.2, 2.7])
        cols.append(np.clip(pts, ax.lo, ax.hi))
    return np.stack(cols, axis=1)


def check_iia(loss: LossSpec, problem_a: EstimationProblem, problem_b: EstimationProblem,
              theta1, theta2) -> Deviation:
    """``|L_A(theta1, theta2) - L_B(theta1, theta2)|`` for problems agreeing at both points."""
    t1 = as_vector(theta1, problem_a.dim)
    t2 = as_vector(theta2, problem_a.dim)
    for t in (t1, t2):
        if not (problem_a.theta_space.contains(t) and problem_b.theta_space.contains(t)):
            raise PreconditionViolated(f"theta={t.tolist()} is not in both parameter spaces")
        if abs(problem_a.prior.log_density1(t) - problem_b.prior.log_density1(t)) > 1e-12:
            raise PreconditionViolated(f"priors differ at theta={t.tolist()}")
        X = _probe_obs(problem_a, t)
        try:
            la = problem_a.model.log_density(t, X)
            lb = problem_b.model.log_density(t, X)
        except EicError as exc:
            raise PreconditionViolated(str(exc)) from exc
        if not np.allclose(la, lb, rtol=1e-12, atol=1e-12):
            raise PreconditionViolated(f"conditional distributions differ at theta={t.tolist()}")
    return _compare(loss, problem_a, problem_b, [(t1, t2)], [(t1, t2)])


# --------------------------------------------------------------------------
# c[P, Q] and the 1-D rearrangement


@dataclass(frozen=True)
class CFunction:
    """Generalised inverse of the cdf of ``r = p/q`` under ``x ~ Q``.

    ``r`` is sorted ascending and ``cum`` holds the Q-mass at or below each
    value, so ``c(t) = r[k]`` for ``cum[k-1] < t <= cum[k]``.
    """

    kind: str
    r: np.ndarray
    cum: np.ndarray

    def __call__(self, t):
        return c_eval(self, t)

    def integral(self) -> float:
        """``int_0^1 c(t) dt`` (equals ``E_Q[r]``, one for a proper pair)."""
        mass = np.diff(np.concatenate([[0.0], self.cum]))
        return math.fsum((self.r * mass).tolist())

    def as_dict(self, max_points: int = 512) -> dict:
        if len(self.r) > max_points:
            t = (np.arange(max_points) + 0.5) / max_points
            return {"kind": self.kind, "t": t.tolist(), "c": c_eval(self, t).tolist()}
        return {"kind": self.kind, "r": self.r.tolist(), "cum": self.cum.tolist()}


def c_eval(c: CFunction, t):
    """Evaluate ``c`` at t in [0, 1]; ``c(0) = 0``."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("t must lie in [0, 1]")
    idx = np.minimum(np.searchsorted(c.cum, t, side="left"), len(c.r) - 1)
    out = c.r[idx]
    return np.where(t == 0.0, 0.0, out) if out.ndim else (0.0 if t == 0.0 else float(out))


def c_function(problem: EstimationProblem, theta1, theta2, n_samples: int = 100_000,
               seed: int = 0) -> CFunction:
    """``c[P, Q]`` for ``P = f(.|theta1)``, ``Q = f(.|theta2)``.

    Exact step function for discrete observations; otherwise the empirical
    quantile curve of ``r(x)`` from seeded draws ``x ~ Q``.
    """
    t1 = problem.theta_space.check(theta1)
    t2 = problem.theta_space.check(theta2)
    model = problem.model
    tab = model.discrete_table(t2)
    if tab is not None:
        logmult, lq, _ = tab
        _, lp, _ = model.discrete_table(t1)
        keep = lq > -np.inf
        r = np.exp(lp[keep] - lq[keep])
        w = np.exp(logmult[keep] + lq[keep])
        order = np.argsort(r, kind="stable")
        r, w = r[order], w[order]
        # merge equal ratios
        uniq, start = np.unique(r, return_index=True)
        mass = np.add.reduceat(w, start)
        cum = np.cumsum(mass)
        cum[-1] = 1.0 if abs(cum[-1] - 1.0) < 1e-9 else cum[-1]
        return CFunction("exact", uniq, cum)
    rng = np.random.default_rng(seed)
    X = model.sample(t2, rng, n_samples)
    r = np.sort(np.exp(model.log_density(t1, X) - model.log_density(t2, X)))
    cum = np.arange(1, n_samples + 1) / n_samples
    return CFunction("empirical", r, cum)


@dataclass(frozen=True)
class Rearrangement:
    """Piecewise-constant densities on [0, 1] with bins of width ``delta``.

    ``q`` is uniform and ``p`` is sorted so that it is non-decreasing.
    """

    edges: np.ndarray
    p: np.ndarray
    q: np.ndarray

    @property
    def delta(self) -> float:
        return float(self.edges[1] - self.edges[0])

    def fdiv(self, generator) -> float:
        """``sum_j delta * q_j * F(p_j / q_j)`` for an ``FGenerator``."""
        w = np.diff(self.edges) * self.q
        with np.errstate(divide="ignore"):
            lr = np.log(self.p) - np.log(self.q)
        return math.fsum(generator.weighted(lr, np.log(w)).tolist())


def canonical_rearrangement_1d(problem: EstimationProblem, theta1, theta2,
                               delta: float = 1.0 / 512) -> Rearrangement:
    """Map x to its Q-cdf and order the bins by increasing likelihood ratio.

    Bin masses are exact (cdf differences); the result depends on the pair
    only through ``c[P, Q]`` up to the bin width.
    """
    if problem.obs_space.is_finite or problem.obs_space.dim != 1:
        raise UnsupportedClass("the rearrangement needs one continuous observation")
    t1 = problem.theta_space.check(theta1)
    t2 = problem.theta_space.check(theta2)
    nb = int(round(1.0 / delta))
    if nb < 2 or abs(nb * delta - 1.0) > 1e-12:
        raise ModelInvariantError("delta must be 1/n for an integer n >= 2")
    P = problem.model.scipy_dist(t1)
    Q = problem.model.scipy_dist(t2)
    u = np.linspace(0.0, 1.0, nb + 1)
    xs = Q.ppf(u)
    cdf_p = P.cdf(xs)
    # accurate upper-tail masses from the survival function
    sf_p = P.sf(xs)
    mass = np.where(xs[1:] > P.median(), sf_p[:-1] - sf_p[1:], cdf_p[1:] - cdf_p[:-1])
    mass = np.maximum(mass, 0.0)
    p = np.sort(mass / delta)
    return Rearrangement(u, p, np.ones(nb))


# --------------------------------------------------------------------------
# maximum likelihood as an EIC estimator


def mle_eic_losses() -> tuple:
    """Two losses whose EIC estimator is maximum likelihood.

    * ``MLE-Quadratic``: ``prior(theta2)^(2/M)`` times the quadratic loss.
      It uses only the prior and the parameter difference, so it is
      unaffected by re-encoding x, by extra noise and by changes away from
      the two parameters; it is not reparameterisation invariant.
    * ``MLE-Hellinger2``: ``(prior(theta2) / sqrt|I(theta2)|)^(2/M)`` times
      squared Hellinger.  Prior density and ``sqrt|I|`` pick up the same
      Jacobian under reparameterisation, so the weight is invariant.
    """
    def w_prior(problem, t2):
        return math.exp(2.0 / problem.dim * problem.prior.log_density1(t2))

    def w_jeffreys(problem, t2):
        sign, logdet = np.linalg.slogdet(np.atleast_2d(problem.model.fisher(t2)))
        if sign <= 0:
            raise ModelInvariantError("Fisher information is not positive definite")
        return math.exp(2.0 / problem.dim * (problem.prior.log_density1(t2) - 0.5 * logdet))

    from .losses import fdivergence, quadratic, scaled_loss
    return (scaled_loss(quadratic(), w_prior, "MLE-Quadratic"),
            scaled_loss(fdivergence("Hellinger2"), w_jeffreys, "MLE-Hellinger2"))
