"""Risk attitude spectra and expected subjective utility.

A spectrum is a family ``T_eps(t) = V_max * s(t / eps)`` where ``s`` is a C1,
weakly increasing shape with ``s(0) = 0`` and ``s(u) = 1`` for ``u >= 1``.
Utilities use the attenuation ``A_eps = (V_max - T_eps) / (V_max - T_eps(0))``,
which is 1 at zero loss and 0 beyond the error limit ``eps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BoundaryTooClose,
    IllDefinedEstimator,
    InvalidSpectrum,
    NonNormalisablePrior,
)
from .estimators import log_eic_metric
from .losses import LossSpec, loss_value
from .model import EstimationProblem, as_vector
from .numerics.hessian import hessian_at_diagonal
from .numerics.quadrature import Axis, BoxDomain, integrate

__all__ = [
    "RiskSpectrum",
    "make_spectrum",
    "expected_utility",
    "utility_with_error",
    "utility_ratio_curve",
    "ei_inferiority_report",
    "DEFAULT_EPS_GRID",
    "STABILITY_FRACTION",
]

DEFAULT_EPS_GRID = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)
STABILITY_FRACTION = 0.05


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _exp_saturate(k):
    g1 = -math.expm1(-k) - k * math.exp(-k)

    def s(u):
        u = np.clip(u, 0.0, 1.0)
        return (-np.expm1(-k * u) - k * math.exp(-k) * u) / g1

    return s


@dataclass(frozen=True)
class RiskSpectrum:
    """``{T_eps}`` sharing one shape function ``s`` and plateau ``v_max``."""

    family: str
    shape: Callable
    v_max: float = 1.0
    params: dict = field(default_factory=dict)

    def T(self, t, eps: float):
        return self.v_max * self.shape(np.asarray(t, dtype=float) / eps)

    def A(self, t, eps: float):
        """Attenuation: 1 at ``t = 0``, 0 for ``t >= eps``."""
        return 1.0 - self.shape(np.asarray(t, dtype=float) / eps)

    def describe(self) -> dict:
        return {"family": self.family, "v_max": self.v_max, **self.params}


def _probe(spec: RiskSpectrum) -> None:
    u = np.linspace(0.0, 2.0, 2001)
    s = np.asarray(spec.shape(u), dtype=float)
    if abs(s[0]) > 1e-12:
        raise InvalidSpectrum("shape must vanish at zero loss")
    if np.any(np.diff(s) < -1e-12):
        raise InvalidSpectrum("risk attitude functions must be weakly increasing")
    if np.any(np.abs(s[u >= 1.0] - 1.0) > 1e-12):
        raise InvalidSpectrum("shape must reach its plateau at the error limit")
    h = 1e-4
    left = (1.0 - float(spec.shape(np.array(1.0 - h)))) / h
    if abs(left) > 1e-3:
        raise InvalidSpectrum("shape is not continuously differentiable at the error limit")


def make_spectrum(family: str = "SmoothStep", v_max: float = 1.0, k: float = 5.0,
                  shape: Callable | None = None) -> RiskSpectrum:
    """Build a spectrum.

    ``SmoothStep`` uses ``3u^2 - 2u^3``; ``ExpSaturate`` uses
    ``g(u) / g(1)`` with ``g(u) = 1 - exp(-k u) - k exp(-k) u``, whose slope
    vanishes at ``u = 1``.  ``Custom`` takes a user ``shape`` on ``[0, 1]``
    (clamped beyond) and is probed for the defining properties.
    """
    if not v_max > 0:
        raise InvalidSpectrum("V_max must exceed T(0) = 0")
    if family == "SmoothStep":
        return RiskSpectrum(family, _smoothstep, float(v_max))
    if family == "ExpSaturate":
        if not k > 0:
            raise InvalidSpectrum("ExpSaturate needs k > 0")
        return RiskSpectrum(family, _exp_saturate(float(k)), float(v_max), {"k": float(k)})
    if family == "Custom":
        if shape is None:
            raise InvalidSpectrum("Custom spectrum needs a shape function")

        def clamped(u, _s=shape):
            u = np.asarray(u, dtype=float)
            return np.where(u >= 1.0, 1.0, np.asarray(_s(np.clip(u, 0.0, 1.0)), dtype=float))

        spec = RiskSpectrum(family, clamped, float(v_max))
        _probe(spec)
        return spec
    raise InvalidSpectrum(f"unknown spectrum family {family!r}")


# --------------------------------------------------------------------------
# utilities


def _bracket(problem, loss, spectrum, eps, th):
    """Sub-box of the parameter space outside which ``A_eps(L(., th)) = 0``."""
    space = problem.theta_space
    lo, hi = space.lower_array, space.upper_array
    half = None
    if loss.smooth:
        try:
            H = hessian_at_diagonal(loss, problem, th)
            if H.is_positive_definite:
                half = 1.5 * np.sqrt(2.0 * eps * np.diag(H.inverse().array))
        except (BoundaryTooClose, IllDefinedEstimator):
            half = None
    if half is None:
        return lo, hi
    for _ in range(60):
        a = np.maximum(lo, th - half)
        b = np.minimum(hi, th + half)
        if _edges_clear(problem, loss, eps, th, a, b, lo, hi):
            return a, b
        half = 2.0 * half
    return lo, hi


def _edges_clear(problem, loss, eps, th, a, b, lo, hi) -> bool:
    m = len(th)
    n = 9 if m > 1 else 1
    for i in range(m):
        for side, val, wall in ((0, a[i], lo[i]), (1, b[i], hi[i])):
            if val == wall:
                continue
            if m == 1:
                pts = [np.array([val])]
            else:
                others = [np.linspace(a[j], b[j], n) for j in range(m) if j != i]
                grid = np.stack([g.ravel() for g in np.meshgrid(*others, indexing="ij")], axis=1)
                pts = [np.insert(row, i, val) for row in grid]
            for p in pts:
                if loss_value(loss, problem, p, th) < eps:
                    return False
    return True


def _crossings_1d(problem, loss, eps, th, a, b):
    """Points in (a, b) where ``L(theta, th) = eps`` on a 1-D problem."""
    out = []
    t0 = float(th[0])

    def g(t):
        return loss_value(loss, problem, np.array([t]), th) - eps

    for end in (a, b):
        if end == t0:
            continue
        try:
            if g(end) > 0:
                out.append(brentq(g, min(t0, end), max(t0, end), xtol=1e-14, rtol=1e-14))
        except ValueError:
            pass
    return tuple(sorted(out))


def utility_with_error(problem: EstimationProblem, loss: LossSpec, spectrum: RiskSpectrum,
                       eps: float, theta_hat, x, rtol: float = 1e-10) -> tuple:
    """``(E[A_eps(L(theta, theta_hat)) | x], error estimate)``."""
    if not problem.prior.normalised:
        raise NonNormalisablePrior("utilities need a normalised posterior")
    x = problem.obs_space.check(x)
    th = as_vector(theta_hat, problem.dim)
    space = problem.theta_space
    if space.is_finite:
        pts = space.point_array
        lw = np.array([problem.log_unnorm(t, x) for t in pts])
        w = np.exp(lw - lw.max())
        w = w / math.fsum(w.tolist())
        vals = [wi * float(spectrum.A(loss_value(loss, problem, t, th), eps)) for t, wi in zip(pts, w)]
        return math.fsum(vals), 0.0
    ev = problem.evidence(x)
    a, b = _bracket(problem, loss, spectrum, eps, th)
    bps = _crossings_1d(problem, loss, eps, th, a[0], b[0]) if problem.dim == 1 else ()
    axes = []
    for i in range(problem.dim):
        pts = tuple(sorted({float(th[i])} | set(bps))) if problem.dim == 1 else (float(th[i]),)
        axes.append(Axis(float(a[i]), float(b[i]), breakpoints=pts))

    def fn(T):
        out = np.empty(len(T))
        for k, t in enumerate(T):
            L = loss_value(loss, problem, t, th)
            if L >= eps:
                out[k] = 0.0
            else:
                out[k] = math.exp(problem.log_unnorm(t, x)) * float(spectrum.A(L, eps))
        return out

    res = integrate(fn, BoxDomain(tuple(axes)), rtol=rtol, atol=1e-300)
    return res.value / ev, res.error / ev


def expected_utility(problem: EstimationProblem, loss: LossSpec, spectrum: RiskSpectrum,
                     eps: float, theta_hat, x, rtol: float = 1e-10) -> float:
    """Posterior expectation of ``A_eps(L(theta, theta_hat))``; lies in [0, 1]."""
    return utility_with_error(problem, loss, spectrum, eps, theta_hat, x, rtol)[0]


@dataclass
class RatioCurve:
    records: list
    predicted: float
    min_stable_eps: Optional[float]

    def final_rel_error(self) -> float:
        stable = [r for r in self.records if r["stable"]]
        if not stable:
            return math.inf
        return abs(stable[-1]["ratio"] - self.predicted) / abs(self.predicted)

    def as_dict(self) -> dict:
        return {"records": self.records, "predicted": self.predicted,
                "min_stable_eps": self.min_stable_eps}


def utility_ratio_curve(problem: EstimationProblem, loss: LossSpec, spectrum: RiskSpectrum,
                        x, theta1, theta2, eps_list: Sequence[float] = DEFAULT_EPS_GRID,
                        rtol: float = 1e-10) -> RatioCurve:
    """Utility ratios ``U(theta1) / U(theta2)`` along a decreasing eps grid.

    The predicted limit is the ratio of the EIC metrics.  Evaluation stops
    at the first eps where either quadrature error exceeds 5% of its
    utility; later grid points are recorded as unstable.
    """
    predicted = math.exp(log_eic_metric(loss, problem, x, theta1)
                         - log_eic_metric(loss, problem, x, theta2))
    records = []
    min_stable = None
    stable = True
    for eps in sorted(eps_list, reverse=True):
        if not stable:
            records.append({"eps": eps, "stable": False})
            continue
        u1, e1 = utility_with_error(problem, loss, spectrum, eps, theta1, x, rtol)
        u2, e2 = utility_with_error(problem, loss, spectrum, eps, theta2, x, rtol)
        ok = u1 > 0 and u2 > 0 and e1 <= STABILITY_FRACTION * u1 and e2 <= STABILITY_FRACTION * u2
        if not ok:
            stable = False
            records.append({"eps": eps, "stable": False, "u1": u1, "u2": u2, "err1": e1, "err2": e2})
            continue
        min_stable = eps
        ratio = u1 / u2
        records.append({"eps": eps, "stable": True, "u1": u1, "u2": u2, "err1": e1, "err2": e2,
                        "ratio": ratio, "rel_error": abs(ratio - predicted) / abs(predicted)})
    return RatioCurve(records, predicted, min_stable)


def ei_inferiority_report(problem: EstimationProblem, loss: LossSpec, spectrum: RiskSpectrum,
                          x, candidates, eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
                          rtol: float = 1e-9) -> dict:
    """Pairwise error-intolerance comparison of candidate estimates.

    ``a`` is flagged inferior to ``b`` when ``b`` has strictly higher
    utility (lower expected subjective loss) at every grid eps up to some
    ``eps0``, counting from the smallest eps.  Differences within ``rtol``
    of the larger utility are not strict.
    """
    eps_grid = sorted(eps_grid, reverse=True)
    if len(eps_grid) < 3:
        raise ValueError("the eps grid needs at least three points")
    cands = [as_vector(c, problem.dim) for c in candidates]
    util = np.array([[expected_utility(problem, loss, spectrum, e, c, x) for c in cands]
                     for e in eps_grid])
    pairs = []
    inferior = set()
    for a in range(len(cands)):
        for b in range(len(cands)):
            if a == b:
                continue
            eps0 = None
            for k in range(len(eps_grid) - 1, -1, -1):
                ua, ub = util[k, a], util[k, b]
                if ub - ua > rtol * max(abs(ua), abs(ub), 1e-300):
                    eps0 = eps_grid[k]
                else:
                    break
            if eps0 is not None:
                inferior.add(a)
            pairs.append({"candidate": cands[a].tolist(), "versus": cands[b].tolist(),
                          "inferior": eps0 is not None, "eps0": eps0})
    status = ["inferior" if i in inferior else "maximal" for i in range(len(cands))]
    return {"eps_grid": list(eps_grid), "utilities": util.tolist(), "pairs": pairs,
            "status": status, "candidates": [c.tolist() for c in cands]}
