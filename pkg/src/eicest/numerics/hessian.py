"""Finite-difference Hessian of a loss in its first argument on the diagonal."""
from __future__ import annotations

import math

import numpy as np

from ..errors import (
    BoundaryTooClose,
    NonFiniteLoss,
    SingularDivergence,
    UnsupportedClass,
)
from .linalg import SymMatrix

__all__ = ["default_step", "fd_hessian", "hessian_at_diagonal"]


def default_step(theta) -> np.ndarray:
    """Per-axis step ``max(1e-4, 1e-4 |theta_i|)``."""
    t = np.asarray(theta, dtype=float)
    return np.maximum(1e-4, 1e-4 * np.abs(t))


def _second_differences(f, theta, h, f0):
    m = len(theta)
    out = np.empty((m, m))
    e = np.eye(m)
    for i in range(m):
        fp = f(theta + h[i] * e[i])
        fm = f(theta - h[i] * e[i])
        out[i, i] = ((fp - f0) + (fm - f0)) / (h[i] * h[i])
        for j in range(i + 1, m):
            di, dj = h[i] * e[i], h[j] * e[j]
            fpp = f(theta + di + dj)
            fpm = f(theta + di - dj)
            fmp = f(theta - di + dj)
            fmm = f(theta - di - dj)
            out[i, j] = ((fpp - fpm) - (fmp - fmm)) / (4.0 * h[i] * h[j])
            out[j, i] = out[i, j]
    return out


def fd_hessian(f, theta, h) -> np.ndarray:
    """Central second differences at steps h and h/2, one Richardson step.

    ``f`` maps a parameter vector to a float.  Every evaluation is checked
    for finiteness.
    """
    theta = np.asarray(theta, dtype=float)
    h = np.asarray(h, dtype=float)

    def g(t):
        try:
            v = f(t)
        except SingularDivergence as exc:
            raise NonFiniteLoss(f"loss is infinite at {t.tolist()}") from exc
        if not math.isfinite(v):
            raise NonFiniteLoss(f"loss evaluated to {v!r} at {t.tolist()}")
        return v

    f0 = g(theta)
    d1 = _second_differences(g, theta, h, f0)
    d2 = _second_differences(g, theta, 0.5 * h, f0)
    return (4.0 * d2 - d1) / 3.0


def hessian_at_diagonal(loss, problem, theta, step=None) -> SymMatrix:
    """Hessian of ``theta' -> L(theta', theta)`` at ``theta' = theta``.

    Parameters
    ----------
    loss : LossSpec
    problem : EstimationProblem
        Must have a box parameter space.
    theta : array_like
    step : float or array_like, optional
        Base step; defaults to ``default_step(theta)``.  The stencil reaches
        ``step`` away from theta and theta must be at least ``2 * step``
        from the boundary.
    """
    from ..losses import loss_value

    space = problem.theta_space
    if space.is_finite:
        raise UnsupportedClass("Hessians need a continuous parameter space")
    t = space.check(theta)
    h = default_step(t) if step is None else np.broadcast_to(
        np.asarray(step, dtype=float), t.shape).copy()
    lo, hi = space.lower_array, space.upper_array
    if np.any(t - 2.0 * h < lo) or np.any(t + 2.0 * h > hi):
        raise BoundaryTooClose(
            f"theta={t.tolist()} is within 2*step of the parameter space boundary")
    return SymMatrix(fd_hessian(lambda tp: loss_value(loss, problem, tp, t), t, h))
