"""Fisher information: closed form, brute-force expectation, Monte Carlo."""
from __future__ import annotations

import math

import numpy as np

from ..errors import UnsupportedClass
from .linalg import SymMatrix
from .quadrature import BoxDomain, integrate

__all__ = ["fisher_information", "score_matrix", "FISHER_METHODS"]

FISHER_METHODS = ("Analytic", "BruteForce", "MonteCarlo")


def _score_step(theta):
    return np.maximum(1e-5, 1e-5 * np.abs(theta))


def score_matrix(model, theta, X) -> np.ndarray:
    """Central-difference scores, one row per observation in ``X``."""
    theta = np.asarray(theta, dtype=float)
    h = _score_step(theta)
    cols = []
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h[i]
        cols.append((model.log_density(theta + e, X) - model.log_density(theta - e, X)) / (2 * h[i]))
    return np.stack(cols, axis=1)


def _table_scores(model, theta):
    h = _score_step(theta)
    logmult, lp, _ = model.discrete_table(theta)
    cols = []
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = h[i]
        _, up, _ = model.discrete_table(theta + e)
        _, dn, _ = model.discrete_table(theta - e)
        cols.append((up - dn) / (2 * h[i]))
    return np.exp(logmult + lp), np.stack(cols, axis=1)


def _brute_force(model, theta, rtol) -> np.ndarray:
    if model.obs_space.is_finite:
        w, s = _table_scores(model, theta)
        m = len(theta)
        out = np.empty((m, m))
        for i in range(m):
            for j in range(i, m):
                out[i, j] = out[j, i] = math.fsum((w * s[:, i] * s[:, j]).tolist())
        return out
    parts = model.iid_parts()
    if parts is not None:
        base, n = parts
        return n * _brute_force(base, theta, rtol)
    if model.obs_space.dim > 3:
        raise UnsupportedClass("brute-force Fisher needs observation dimension <= 3; use MonteCarlo")
    axes = tuple(model.obs_axes(theta))
    m = len(theta)
    out = np.empty((m, m))

    def entry(i, j, atol):
        def fn(X):
            s = score_matrix(model, theta, X)
            return model.density(theta, X) * s[:, i] * s[:, j]
        return integrate(fn, BoxDomain(axes), rtol=rtol, atol=atol).value

    for i in range(m):
        out[i, i] = entry(i, i, 1e-300)
    for i in range(m):
        for j in range(i + 1, m):
            # off-diagonal entries may vanish; tolerance relative to the Cauchy-Schwarz bound
            out[i, j] = out[j, i] = entry(i, j, rtol * math.sqrt(out[i, i] * out[j, j]))
    return out


def fisher_information(problem_or_model, theta, method: str = "Analytic",
                       n_samples: int = 200_000, seed: int = 0,
                       rtol: float = 1e-10) -> SymMatrix:
    """Expected outer product of the score at ``theta``.

    ``Analytic`` uses the family's registered closed form (raising
    ``NoAnalyticForm`` when there is none), ``BruteForce`` sums or
    integrates finite-difference scores against the density, and
    ``MonteCarlo`` averages them over seeded draws.
    """
    model = getattr(problem_or_model, "model", problem_or_model)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if method == "Analytic":
        return SymMatrix(model.fisher(theta))
    if method == "BruteForce":
        return SymMatrix(_brute_force(model, theta, rtol))
    if method == "MonteCarlo":
        rng = np.random.default_rng(seed)
        X = model.sample(theta, rng, n_samples)
        s = score_matrix(model, theta, X)
        return SymMatrix(s.T @ s / n_samples)
    raise ValueError(f"unknown Fisher method {method!r}; choose from {FISHER_METHODS}")
