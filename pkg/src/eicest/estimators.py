"""Point and set estimators: DMAP, CMAP, WF, PMLE, Bayes and EIC.

Every estimator is an argmax of a metric over the parameter space.  Metrics
are handled on the log scale, so the posterior normalisation is never
needed (it does not move an argmax) and improper scale priors still work
for the mode-type estimators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    IllDefinedEstimator,
    ModelInvariantError,
    NonNormalisablePrior,
    UnsupportedClass,
)
from .losses import LossSpec, loss_value, pmle_induced
from .model import EstimationProblem, ParameterSpace, as_vector
from .numerics.fisher import fisher_information
from .numerics.hessian import default_step, hessian_at_diagonal
from .numerics.optimize import ArgmaxConfig, ArgmaxResult, argmax
from .numerics.quadrature import Axis, BoxDomain, integrate

__all__ = [
    "ESTIMATOR_KINDS",
    "EstimatorSpec",
    "estimate",
    "eic_metric",
    "log_eic_metric",
    "log_wf_metric",
    "pmle_to_loss",
    "loss_to_penalty",
    "expected_loss",
    "hessian_margin",
]

ESTIMATOR_KINDS = ("DMAP", "CMAP", "WF", "PMLE", "Bayes", "EIC")


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to run and its numeric settings.

    ``loss`` is required for Bayes and EIC, ``penalty`` (``theta -> g > 0``)
    for PMLE.  ``extend_to_box`` lets Bayes choose estimates from the
    bounding box of a finite parameter set.
    """

    kind: str
    loss: Optional[LossSpec] = None
    penalty: Optional[Callable] = None
    fisher_method: str = "Analytic"
    step: Optional[float] = None
    argmax: ArgmaxConfig = field(default_factory=ArgmaxConfig)
    extend_to_box: bool = False
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ESTIMATOR_KINDS:
            raise ModelInvariantError(f"unknown estimator {self.kind!r}")
        if self.kind in ("Bayes", "EIC") and self.loss is None:
            raise ModelInvariantError(f"{self.kind} needs a loss")
        if self.kind == "PMLE" and self.penalty is None:
            raise ModelInvariantError("PMLE needs a penalty function")
        if self.kind == "EIC" and not self.loss.smooth:
            raise ModelInvariantError("EIC needs a loss flagged smooth")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.loss is not None:
            return f"{self.kind}({self.loss.name})"
        return self.kind

    def describe(self) -> dict:
        out = {"kind": self.kind, "label": self.label, "fisher_method": self.fisher_method,
               "extend_to_box": self.extend_to_box, "step": self.step}
        if self.loss is not None:
            out["loss"] = self.loss.describe()
        return out


def hessian_margin(space: ParameterSpace, step=None) -> np.ndarray:
    """Interior margin keeping every Hessian stencil inside the box."""
    lo, hi = space.lower_array, space.upper_array
    if step is None:
        h = default_step(np.maximum(np.abs(lo), np.abs(hi)))
    else:
        h = np.broadcast_to(np.asarray(step, dtype=float), lo.shape)
    return 2.0 * h * (1.0 + 1e-9) + 1e-12


def _log_det_or_fail(mat, what: str, theta) -> float:
    d = mat.det
    if not (d > 0 and mat.is_positive_definite):
        raise IllDefinedEstimator(f"{what} is not positive definite at theta={list(theta)} (det={d:.3g})")
    return math.log(d)


def log_eic_metric(loss: LossSpec, problem: EstimationProblem, x, theta, step=None) -> float:
    x = problem.obs_space.check(x)
    t = problem.theta_space.check(theta)
    return _log_eic(loss, problem, x, t, step)


def _log_eic(loss, problem, x, t, step):
    lu = problem.log_unnorm(t, x)
    if lu == -math.inf:
        return -math.inf
    H = hessian_at_diagonal(loss, problem, t, step)
    return lu - 0.5 * _log_det_or_fail(H, "loss Hessian", t)


def eic_metric(loss: LossSpec, problem: EstimationProblem, x, theta, step=None) -> float:
    """``posterior_unnorm(theta, x) / sqrt(det H_L(theta))``."""
    return math.exp(log_eic_metric(loss, problem, x, theta, step))


def _log_wf(problem, x, t, method):
    lu = problem.log_unnorm(t, x)
    if lu == -math.inf:
        return -math.inf
    I = fisher_information(problem, t, method)
    return lu - 0.5 * _log_det_or_fail(I, "Fisher information", t)


def log_wf_metric(problem: EstimationProblem, x, theta, method: str = "Analytic") -> float:
    x = problem.obs_space.check(x)
    t = problem.theta_space.check(theta)
    return _log_wf(problem, x, t, method)


def pmle_to_loss(g: Callable, problem: EstimationProblem) -> LossSpec:
    """Loss whose EIC estimator is PMLE with penalty ``g``."""
    grid = problem.theta_space.sample_grid(4)
    lp = problem.prior.log_density(grid)
    if not np.all(np.isfinite(lp)):
        raise NonNormalisablePrior("prior density cannot be evaluated on the parameter space")
    vals = np.array([float(g(t)) for t in grid])
    if not np.all(vals > 0):
        raise ModelInvariantError("penalty must be positive on the parameter space")
    return pmle_induced(g)


def loss_to_penalty(loss: LossSpec, problem: EstimationProblem, step=None) -> Callable:
    """Penalty ``g = prior / sqrt(det H_L)`` whose PMLE is EIC under ``loss``."""

    def g(theta):
        t = as_vector(theta, problem.dim)
        H = hessian_at_diagonal(loss, problem, t, step)
        return math.exp(problem.prior.log_density1(t) - 0.5 * _log_det_or_fail(H, "loss Hessian", t))

    return g


def _posterior_weights(problem, x):
    pts = problem.theta_space.point_array
    lw = np.array([problem.log_unnorm(t, x) for t in pts])
    w = np.exp(lw - lw.max())
    return pts, w / math.fsum(w.tolist())


def expected_loss(loss: LossSpec, problem: EstimationProblem, x, theta_hat,
                  rtol: float = 1e-9, loss_problem: EstimationProblem | None = None) -> float:
    """``E[L(theta, theta_hat) | x]`` under the normalised posterior."""
    x = problem.obs_space.check(x)
    th = as_vector(theta_hat, problem.dim)
    lp = loss_problem or problem
    if not problem.prior.normalised:
        raise NonNormalisablePrior("Bayes risk needs a proper prior")
    if problem.theta_space.is_finite:
        pts, w = _posterior_weights(problem, x)
        return math.fsum(wi * loss_value(loss, lp, t, th) for t, wi in zip(pts, w))
    ev = problem.evidence(x)
    axes = tuple(Axis(lo, hi) for lo, hi in zip(problem.theta_space.lower, problem.theta_space.upper))

    def fn(T):
        return np.array([math.exp(problem.log_unnorm(t, x)) * loss_value(loss, lp, t, th) for t in T])

    return integrate(fn, BoxDomain(axes), rtol=rtol, atol=1e-300).value / ev


def estimate(spec: EstimatorSpec, problem: EstimationProblem, x) -> ArgmaxResult:
    """Run an estimator; returns the set of maximisers with diagnostics."""
    x = problem.obs_space.check(x)
    space = problem.theta_space
    kind = spec.kind
    cfg = spec.argmax

    if kind == "EIC" and problem.cls == "Discrete":
        kind = "DMAP"

    if kind == "DMAP":
        if not space.is_finite:
            raise UnsupportedClass("discrete MAP needs a finite parameter space")
        res = argmax(lambda t: problem.log_unnorm(t, x), space, cfg)
    elif kind == "PMLE":
        def metric(t):
            g = float(spec.penalty(t))
            if not g > 0:
                raise ModelInvariantError(f"penalty is not positive at {t.tolist()}")
            return float(problem.model.log_density(t, x[None, :])[0]) + math.log(g)
        res = argmax(metric, space, cfg)
    elif kind == "Bayes":
        res = _bayes(spec, problem, x)
    else:
        if space.is_finite:
            raise UnsupportedClass(f"{kind} needs a continuous parameter space")
        if kind == "CMAP":
            res = argmax(lambda t: problem.log_unnorm(t, x), space, cfg)
        elif kind == "WF":
            res = argmax(lambda t: _log_wf(problem, x, t, spec.fisher_method), space, cfg)
        else:
            margin = hessian_margin(space, spec.step)
            res = argmax(lambda t: _log_eic(spec.loss, problem, x, t, spec.step), space,
                         cfg.replace(margin=tuple(margin.tolist())))
    res.diagnostics["estimator"] = spec.label
    res.diagnostics["resolved_kind"] = kind
    if kind in ("WF", "EIC"):
        res.diagnostics["indefinite_excluded"] = res.diagnostics.get("excluded", 0)
    return res


def _bayes(spec, problem, x):
    space = problem.theta_space
    search = space
    loss_problem = problem
    if spec.extend_to_box and space.is_finite:
        search = space.bounding_box()
        if spec.loss.kind != "Quadratic":
            loss_problem = EstimationProblem(search, problem.model,
                                             _flat(search), validate=False)
    cfg = spec.argmax.replace(scale="linear")
    if space.is_finite and not search.is_finite:
        pts, w = _posterior_weights(problem, x)

        def metric(th):
            return -math.fsum(wi * loss_value(spec.loss, loss_problem, t, th) for t, wi in zip(pts, w))
    else:
        def metric(th):
            return -expected_loss(spec.loss, problem, x, th, loss_problem=loss_problem)
    res = argmax(metric, search, cfg)
    res.diagnostics["expected_loss"] = [-v for v in res.values]
    return res


def _flat(space):
    from .model import UniformBox
    return UniformBox(space)
