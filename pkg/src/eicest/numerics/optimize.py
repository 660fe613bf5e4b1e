"""Derivative-free argmax over finite sets and boxes.

Boxes are searched with a cell-centred grid, the best local maxima of which
seed bounded Nelder-Mead runs (scipy).  Every point whose metric is within
the tie tolerance of the best is returned, after merging near-duplicates,
so the result is a set estimate rather than a single point.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from ..errors import IllDefinedEstimator, NoFiniteValue

__all__ = ["ArgmaxConfig", "ArgmaxResult", "argmax"]


@dataclass(frozen=True)
class ArgmaxConfig:
    """Search settings.

    ``scale="log"`` declares that the metric returns a log value, so the
    relative tie tolerance becomes an absolute one on the log scale.
    ``margin`` keeps the search a fixed distance inside the box per axis.
    Nelder-Mead stops only when both ``xatol`` and ``fatol`` hold, so
    ``fatol`` sits at the noise floor of finite-difference metrics and
    ``xatol`` sets the precision.
    """

    grid: int = 32
    max_grid_points: int = 2 ** 15
    top_k: int = 5
    tie_tol: float = 1e-9
    xatol: float = 1e-10
    fatol: float = 1e-7
    maxiter: int = 4000
    margin: float | tuple = 0.0
    refine: bool = True
    scale: str = "log"
    merge_tol: float = 1e-6

    def replace(self, **kw) -> "ArgmaxConfig":
        d = asdict(self)
        d.update(kw)
        return ArgmaxConfig(**d)


@dataclass
class ArgmaxResult:
    points: list
    values: list
    tie_tolerance: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def point(self) -> np.ndarray:
        return self.points[0]

    @property
    def value(self) -> float:
        return self.values[0]

    def distance_to(self, other: "ArgmaxResult") -> float:
        """Symmetric Hausdorff distance (max-norm) between the point sets."""
        a = np.array(self.points)
        b = np.array(other.points)
        d = np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=2)
        return float(max(d.min(axis=1).max(), d.min(axis=0).max()))

    def as_dict(self) -> dict:
        return {"points": [np.asarray(p).tolist() for p in self.points],
                "values": [float(v) for v in self.values],
                "tie_tolerance": self.tie_tolerance,
                "diagnostics": self.diagnostics}


class _Counted:
    """Wrap the metric: count calls, map ill-defined points to -inf."""

    def __init__(self, metric):
        self.metric = metric
        self.calls = 0
        self.excluded = 0

    def __call__(self, t) -> float:
        self.calls += 1
        try:
            v = float(self.metric(np.asarray(t, dtype=float)))
        except IllDefinedEstimator:
            self.excluded += 1
            return -math.inf
        if math.isnan(v):
            return -math.inf
        return v


def _ties(values, best, cfg: ArgmaxConfig) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if cfg.scale == "log":
        return values >= best - cfg.tie_tol
    return values >= best - cfg.tie_tol * max(abs(best), 1e-300)


def _finite_argmax(f: _Counted, points: np.ndarray, cfg: ArgmaxConfig) -> ArgmaxResult:
    vals = np.array([f(p) for p in points])
    if not np.any(np.isfinite(vals)):
        raise NoFiniteValue("metric is not finite at any point of the finite set")
    best = float(np.max(vals))
    keep = np.flatnonzero(_ties(vals, best, cfg))
    order = keep[np.argsort(-vals[keep], kind="stable")]
    return ArgmaxResult([points[i].copy() for i in order], [float(vals[i]) for i in order],
                        cfg.tie_tol, {"method": "scan", "evaluations": f.calls,
                                      "excluded": f.excluded, "converged": True})


def _local_maxima(vals: np.ndarray) -> np.ndarray:
    """Flat indices of grid points not exceeded by any axis neighbour."""
    is_max = np.isfinite(vals)
    for ax in range(vals.ndim):
        n = vals.shape[ax]
        if n == 1:
            continue
        pad = [(0, 0)] * vals.ndim
        pad[ax] = (1, 1)
        v = np.pad(vals, pad, constant_values=-np.inf)
        sl_lo = [slice(None)] * vals.ndim
        sl_hi = [slice(None)] * vals.ndim
        sl_lo[ax] = slice(0, n)
        sl_hi[ax] = slice(2, n + 2)
        is_max &= (vals >= v[tuple(sl_lo)]) & (vals >= v[tuple(sl_hi)])
    return np.flatnonzero(is_max.ravel())


def argmax(metric: Callable[[np.ndarray], float], space, config: ArgmaxConfig | None = None,
           extra_starts=()) -> ArgmaxResult:
    """Maximise ``metric`` over a ParameterSpace.

    Parameters
    ----------
    metric : callable
        ``theta -> float``; may raise ``IllDefinedEstimator`` at points that
        must be excluded from candidacy.
    space : ParameterSpace
    config : ArgmaxConfig, optional
    extra_starts : sequence of points, optional
        Additional Nelder-Mead starting points.
    """
    cfg = config or ArgmaxConfig()
    f = _Counted(metric)
    if space.is_finite:
        return _finite_argmax(f, space.point_array, cfg)

    lo = space.lower_array + np.broadcast_to(np.asarray(cfg.margin, dtype=float), (space.dim,))
    hi = space.upper_array - np.broadcast_to(np.asarray(cfg.margin, dtype=float), (space.dim,))
    if np.any(lo >= hi):
        raise NoFiniteValue("search margin leaves an empty box")
    m = space.dim
    per_axis = max(2, min(cfg.grid, int(math.floor(cfg.max_grid_points ** (1.0 / m) + 1e-9))))
    width = hi - lo
    axes = [lo[i] + width[i] * (np.arange(per_axis) + 0.5) / per_axis for i in range(m)]
    mesh = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = np.array([f(t) for t in mesh])
    if not np.any(np.isfinite(vals)):
        raise NoFiniteValue("metric is not finite anywhere on the search grid")
    grid_vals = vals.reshape((per_axis,) * m)
    maxima = _local_maxima(grid_vals)
    maxima = maxima[np.argsort(-vals[maxima], kind="stable")][: cfg.top_k]
    if maxima.size == 0:
        maxima = np.array([int(np.nanargmax(vals))])

    cand_pts = [mesh[i] for i in maxima]
    cand_vals = [float(vals[i]) for i in maxima]
    refinements = []
    converged = True
    if cfg.refine:
        starts = [mesh[i] for i in maxima] + [np.asarray(s, dtype=float) for s in extra_starts]
        cell = width / per_axis
        for x0 in starts:
            simplex = [x0]
            for i in range(m):
                step = np.zeros(m)
                # step toward the interior so the simplex stays in the box
                step[i] = 0.5 * cell[i] if x0[i] + 0.5 * cell[i] <= hi[i] else -0.5 * cell[i]
                simplex.append(x0 + step)

            def neg(t):
                v = f(np.clip(t, lo, hi))
                return -v if math.isfinite(v) else 1e300

            res = minimize(neg, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                           options={"xatol": cfg.xatol, "fatol": cfg.fatol,
                                    "maxiter": cfg.maxiter, "initial_simplex": np.array(simplex)})
            x = np.clip(res.x, lo, hi)
            refinements.append(int(res.nit))
            converged &= bool(res.success)
            v = f(x)
            cand_pts.append(x)
            cand_vals.append(v)

    cand_vals = np.array(cand_vals)
    best = float(np.max(cand_vals))
    keep = np.flatnonzero(_ties(cand_vals, best, cfg))
    keep = keep[np.argsort(-cand_vals[keep], kind="stable")]
    merge = np.maximum(cfg.merge_tol * width, 10 * cfg.xatol)
    points, values = [], []
    for i in keep:
        p = cand_pts[i]
        if any(np.all(np.abs(p - q) <= merge) for q in points):
            continue
        points.append(p.copy())
        values.append(float(cand_vals[i]))
    edge = np.maximum(1e-9 * width, 1e-12)
    on_boundary = any(np.any((p - lo <= edge) | (hi - p <= edge)) for p in points)
    diag = {
        "method": "grid+nelder-mead" if cfg.refine else "grid",
        "grid_per_axis": per_axis,
        "grid_points": int(mesh.shape[0]),
        "starts": len(refinements),
        "refine_iterations": refinements,
        "converged": bool(converged),
        "evaluations": f.calls,
        "excluded": f.excluded,
        "boundary_maximum": bool(on_boundary),
    }
    return ArgmaxResult(points, values, cfg.tie_tol, diag)
