"""Loss functions ``L(theta1, theta2)`` on estimation problems.

The first argument is the candidate (or true) parameter and the second the
reference; f-divergences are ``E_{x ~ f(.|theta2)}[F(r(x))]`` with
``r = f(x|theta1) / f(x|theta2)``.

F-divergences are evaluated through the centred generator
``F(r) - F'(1)(r - 1)``, which has the same expectation (``E_Q[r] = 1``) but
a nonnegative integrand of size ``O((r-1)^2)``.  That removes the
cancellation that would otherwise swamp the tiny losses seen by
finite-difference Hessians.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels as K
from .errors import (
    IntegralNotConverged,
    ModelInvariantError,
    SingularDivergence,
    UnsupportedClass,
)
from .model import EstimationProblem, as_vector
from .numerics.quadrature import Axis, BoxDomain, integrate

__all__ = [
    "FGenerator",
    "LossSpec",
    "builtin_generator",
    "custom_generator",
    "quadratic",
    "fdivergence",
    "bhattacharyya",
    "pmle_induced",
    "no_iro",
    "no_isi",
    "no_iia",
    "custom",
    "scaled_loss",
    "eval_loss",
    "loss_value",
    "bhattacharyya_loss",
    "fdiv_value",
    "LOSS_RTOL",
]

LOSS_RTOL = 1e-10
LOSS_ATOL = 1e-300
SINGULAR_H2 = 1.0 - 1e-12


@dataclass(frozen=True)
class FGenerator:
    """Convex ``F`` with ``F(1) = 0`` and its first two derivatives.

    ``code`` selects the compiled kernel for built-in generators; custom
    generators go through the generic quadrature path.
    """

    name: str
    F: Callable
    dF: Callable
    d2F: Callable
    code: Optional[int] = None

    @property
    def gamma(self) -> float:
        """``F''(1)``, the Hessian-to-Fisher ratio."""
        return float(self.d2F(1.0))

    def weighted(self, lr, logw) -> np.ndarray:
        """``exp(logw) * (F(r) - F'(1)(r - 1))`` at ``r = exp(lr)``."""
        if self.code is not None:
            return K.weighted(lr, logw, self.code)
        lr = np.asarray(lr, dtype=float)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            r = np.exp(lr)
            ft = np.asarray(self.F(r), dtype=float) - float(self.dF(1.0)) * np.expm1(lr)
            w = np.exp(np.broadcast_to(logw, lr.shape))
            return np.where(w == 0.0, 0.0, w * ft)

    def check(self, grid=None) -> None:
        """Raise unless ``F(1) = 0`` and F is convex on a sampled grid."""
        if abs(float(self.F(1.0))) > 1e-12:
            raise ModelInvariantError(f"generator {self.name}: F(1) != 0")
        r = np.geomspace(1e-3, 1e3, 401) if grid is None else np.asarray(grid, dtype=float)
        f = np.asarray(self.F(r), dtype=float)
        # convexity via chords on a log-spaced grid
        left, mid, right = r[:-2], r[1:-1], r[2:]
        lam = (right - mid) / (right - left)
        chord = lam * f[:-2] + (1 - lam) * f[2:]
        if np.any(f[1:-1] > chord + 1e-9 * (1 + np.abs(chord))):
            raise ModelInvariantError(f"generator {self.name} is not convex")


def _hell_F(r):
    return 1.0 - np.sqrt(r)


def _kl_F(r):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, r * np.log(np.where(r > 0, r, 1.0)), 0.0)


_BUILTINS = {
    "Hellinger2": FGenerator("Hellinger2", _hell_F,
                             lambda r: -0.5 / np.sqrt(r),
                             lambda r: 0.25 * np.power(r, -1.5), K.GEN_HELLINGER2),
    "KL": FGenerator("KL", _kl_F, lambda r: np.log(r) + 1.0,
                     lambda r: 1.0 / np.asarray(r, dtype=float), K.GEN_KL),
    "ChiSquared": FGenerator("ChiSquared", lambda r: (np.asarray(r) - 1.0) ** 2,
                             lambda r: 2.0 * (np.asarray(r) - 1.0),
                             lambda r: 2.0 + 0.0 * np.asarray(r, dtype=float), K.GEN_CHI2),
}


def builtin_generator(name: str) -> FGenerator:
    try:
        return _BUILTINS[name]
    except KeyError:
        raise ModelInvariantError(
            f"unknown generator {name!r}; choose from {sorted(_BUILTINS)}") from None


def custom_generator(name: str, F, dF, d2F) -> FGenerator:
    gen = FGenerator(name, F, dF, d2F, None)
    gen.check()
    return gen


@dataclass(frozen=True, eq=False)
class LossSpec:
    """A loss and the data it needs.

    Only the fields relevant to ``kind`` are populated; use the module-level
    constructors rather than building instances directly.
    """

    kind: str
    name: str
    generator: Optional[FGenerator] = None
    penalty: Optional[Callable] = None
    inner: tuple = ()
    threshold: float = 0.0
    n_mc: int = 20000
    seed: int = 0
    fn: Optional[Callable] = None
    smooth: bool = True
    conditional_distribution_based: bool = False
    discriminative_checked: bool = False
    rtol: float = LOSS_RTOL
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def describe(self) -> dict:
        out = {"kind": self.kind, "name": self.name}
        if self.kind == "NoIIA":
            out.update(threshold=self.threshold, n_mc=self.n_mc, seed=self.seed,
                       inner=[l.describe() for l in self.inner])
        return out


def quadratic() -> LossSpec:
    return LossSpec("Quadratic", "Quadratic")


def fdivergence(generator: str | FGenerator = "Hellinger2", rtol: float = LOSS_RTOL) -> LossSpec:
    gen = builtin_generator(generator) if isinstance(generator, str) else generator
    return LossSpec("FDivergence", gen.name, generator=gen,
                    conditional_distribution_based=True, rtol=rtol)


def bhattacharyya(rtol: float = LOSS_RTOL) -> LossSpec:
    return LossSpec("Bhattacharyya", "Bhattacharyya", generator=_BUILTINS["Hellinger2"],
                    conditional_distribution_based=True, rtol=rtol)


def pmle_induced(g: Callable) -> LossSpec:
    """``(prior(theta2) / g(theta2))^(2/M) |theta1 - theta2|^2``."""
    return LossSpec("PmleInduced", "PmleInduced", penalty=g)


def no_iro(rtol: float = LOSS_RTOL) -> LossSpec:
    """``int q (p - q)^2 dx``; continuous observations only."""
    return LossSpec("NoIRO", "NoIRO", rtol=rtol)


def no_isi() -> LossSpec:
    """``sum_x q (p - q)^2``; discrete observations only."""
    return LossSpec("NoISI", "NoISI")


def no_iia(l1: LossSpec, l2: LossSpec, threshold: float,
           n_mc: int = 20000, seed: int = 0) -> LossSpec:
    """``P(theta2) * L2(theta1, theta2)`` with ``P(t) = Prob(L1(theta, t) <= threshold)``.

    ``theta`` is drawn from the prior: exactly for finite parameter sets,
    by seeded Monte Carlo (common random numbers across ``t``) otherwise.
    """
    return LossSpec("NoIIA", f"NoIIA({l1.name},{l2.name},t={threshold:g})",
                    inner=(l1, l2), threshold=float(threshold), n_mc=int(n_mc), seed=int(seed))


def custom(fn: Callable, name: str = "Custom", smooth: bool = True,
           conditional_distribution_based: bool = False,
           discriminative_checked: bool = False) -> LossSpec:
    """Wrap ``fn(problem, theta1, theta2) -> float`` with self-declared flags."""
    return LossSpec("Custom", name, fn=fn, smooth=smooth,
                    conditional_distribution_based=conditional_distribution_based,
                    discriminative_checked=discriminative_checked)


def scaled_loss(base: LossSpec, weight: Callable, name: str | None = None) -> LossSpec:
    """``weight(problem, theta2) * base(theta1, theta2)``."""

    def fn(problem, t1, t2):
        return float(weight(problem, t2)) * loss_value(base, problem, t1, t2)

    return custom(fn, name or f"Scaled({base.name})", smooth=base.smooth)


# --------------------------------------------------------------------------
# evaluation


def fdiv_value(problem: EstimationProblem, gen: FGenerator, t1, t2,
               rtol: float = LOSS_RTOL) -> float:
    """``E_{x~theta2}[F(r)]`` for the problem's data model."""
    if np.array_equal(t1, t2):
        return 0.0
    model = problem.model
    table1 = model.discrete_table(t1)
    if table1 is not None:
        logmult, lp, _ = table1
        _, lq, _ = model.discrete_table(t2)
        both_out = (lp == -np.inf) & (lq == -np.inf)
        if np.any((lq == -np.inf) & ~both_out) or np.any((lp == -np.inf) & ~both_out):
            raise SingularDivergence("the two distributions do not share a support")
        keep = ~both_out
        with np.errstate(invalid="ignore"):
            terms = gen.weighted(lp[keep] - lq[keep], logmult[keep] + lq[keep])
        return math.fsum(terms.tolist())
    plan = model.kernel_plan(t1, t2)
    if plan is not None and gen.code is not None:
        fam, pa, pb = plan
        val, err, _, code, _ = K.fdivergence(fam, pa, pb, gen.code, rtol, LOSS_ATOL)
        if code == 4:
            if model.obs_space.dim > 3:
                raise IntegralNotConverged(
                    f"{gen.name} divergence: the pair is too far apart for the kernel", val, err)
            return _generic_integral(problem, t2, lambda lp, lq: gen.weighted(lp - lq, lq), t1, rtol,
                                     cover=True)
        if not math.isfinite(val):
            raise SingularDivergence(f"{gen.name} divergence is infinite for this pair")
        if code != 0:
            raise IntegralNotConverged(
                f"{gen.name} divergence integral did not converge (code {code})", val, err)
        return val
    return _generic_integral(problem, t2, lambda lp, lq: gen.weighted(lp - lq, lq), t1, rtol)


def _covering_axes(model, t1, t2) -> tuple:
    """Axes of ``t2`` widened to cover ``t1``, with both centres as breakpoints."""
    out = []
    for a, b in zip(model.obs_axes(t2), model.obs_axes(t1)):
        lo, hi = min(a.lo, b.lo), max(a.hi, b.hi)
        pts = {p for p in a.breakpoints + b.breakpoints + (a.center, b.center) if lo < p < hi}
        out.append(Axis(lo, hi, a.center, a.scale, tuple(sorted(pts))))
    return tuple(out)


def _generic_integral(problem, t2, integrand, t1, rtol, cover: bool = False) -> float:
    model = problem.model
    if model.obs_space.dim > 3:
        raise UnsupportedClass(
            "generic loss integrals are limited to observation dimension 3")
    axes = _covering_axes(model, t1, t2) if cover else tuple(model.obs_axes(t2))

    def fn(X):
        lp = model.log_density(t1, X)
        lq = model.log_density(t2, X)
        out = np.zeros(len(X))
        ok = lq > -np.inf
        if np.any((lp > -np.inf) & ~ok):
            raise SingularDivergence("the two distributions do not share a support")
        with np.errstate(invalid="ignore", over="ignore"):
            out[ok] = integrand(lp[ok], lq[ok])
        return out

    try:
        return integrate(fn, BoxDomain(axes), rtol=rtol, atol=LOSS_ATOL).value
    except IntegralNotConverged as exc:
        if exc.estimate == math.inf:
            raise SingularDivergence("loss integral diverges") from exc
        raise


def _sq_diff(lp, lq):
    """``q (p - q)^2`` from log densities; expm1 form near ``p == q``."""
    lp = np.asarray(lp, dtype=float)
    lq = np.asarray(lq, dtype=float)
    with np.errstate(under="ignore", over="ignore", invalid="ignore"):
        lr = lp - lq
        near = np.abs(lr) < 1.0
        a = np.exp(3.0 * lq) * np.expm1(np.where(near, lr, 0.0)) ** 2
        b = np.exp(lq) * (np.exp(lp) - np.exp(lq)) ** 2
        out = np.where(near, a, b)
    return np.where(np.isnan(out), 0.0, out)


def _prob_below(loss: LossSpec, problem: EstimationProblem, t2) -> float:
    l1 = loss.inner[0]
    # keyed on the object itself (identity hash) so a recycled id cannot alias
    key = (problem, t2.tobytes())
    with loss._lock:
        if key in loss._cache:
            return loss._cache[key]
    space = problem.theta_space
    if space.is_finite:
        pts = space.point_array
        w = np.exp(problem.prior.log_density(pts))
        hits = [wi for t, wi in zip(pts, w) if loss_value(l1, problem, t, t2) <= loss.threshold]
        prob = math.fsum(hits)
    else:
        rng = np.random.default_rng(loss.seed)
        draws = problem.prior.sample(rng, loss.n_mc)
        count = sum(1 for t in draws if loss_value(l1, problem, t, t2) <= loss.threshold)
        prob = count / loss.n_mc
    with loss._lock:
        loss._cache[key] = prob
    return prob


def loss_value(loss: LossSpec, problem: EstimationProblem, t1, t2) -> float:
    """Evaluate without checking that the parameters lie in the space."""
    t1 = as_vector(t1, problem.dim, "theta1")
    t2 = as_vector(t2, problem.dim, "theta2")
    kind = loss.kind
    if kind == "Quadratic":
        d = t1 - t2
        return math.fsum((d * d).tolist())
    if kind == "FDivergence":
        return fdiv_value(problem, loss.generator, t1, t2, loss.rtol)
    if kind == "Bhattacharyya":
        h2 = fdiv_value(problem, loss.generator, t1, t2, loss.rtol)
        if h2 >= SINGULAR_H2:
            raise SingularDivergence(f"squared Hellinger distance {h2!r} is at the singular limit")
        return -math.log1p(-h2)
    if kind == "PmleInduced":
        m = problem.dim
        lf = problem.prior.log_density1(t2)
        g = float(loss.penalty(t2))
        if not g > 0:
            raise ModelInvariantError("PMLE penalty must be positive")
        d = t1 - t2
        return math.exp((2.0 / m) * (lf - math.log(g))) * math.fsum((d * d).tolist())
    if kind == "NoIRO":
        if problem.obs_space.is_finite:
            raise UnsupportedClass("NoIRO needs continuous observations")
        if np.array_equal(t1, t2):
            return 0.0
        return _generic_integral(problem, t2, _sq_diff, t1, loss.rtol)
    if kind == "NoISI":
        if not problem.obs_space.is_finite:
            raise UnsupportedClass("NoISI needs discrete observations")
        logmult, lp, _ = problem.model.discrete_table(t1)
        _, lq, _ = problem.model.discrete_table(t2)
        terms = np.exp(logmult) * _sq_diff(lp, lq)
        return math.fsum(terms.tolist())
    if kind == "NoIIA":
        l2 = loss.inner[1]
        base = loss_value(l2, problem, t1, t2)
        if base == 0.0:
            return 0.0
        return _prob_below(loss, problem, t2) * base
    if kind == "Custom":
        return float(loss.fn(problem, t1, t2))
    raise ModelInvariantError(f"unknown loss kind {kind!r}")


def eval_loss(loss: LossSpec, problem: EstimationProblem, theta1, theta2) -> float:
    """``L(theta1, theta2)`` with both parameters checked against the space."""
    t1 = problem.theta_space.check(theta1)
    t2 = problem.theta_space.check(theta2)
    return loss_value(loss, problem, t1, t2)


def bhattacharyya_loss(problem: EstimationProblem, theta1, theta2) -> float:
    return eval_loss(bhattacharyya(), problem, theta1, theta2)
