"""Hot f-divergence kernels, compiled when available.

The Cython extension is preferred; setting ``EICEST_PURE_PYTHON=1`` in the
environment (or a failed build) selects the numpy implementation, which has
the same signature and algorithm.

``fdivergence`` is the entry point used by the rest of the package.  It first
tries a fixed Gauss product rule at two orders (Hermite for normal variables,
generalised Laguerre for gamma and chi-square ones) and accepts the higher
order when both agree to ``rtol``.  Near-diagonal pairs, which dominate
finite-difference Hessians, always pass that test and the result is then a
smooth function of the parameters.  Otherwise adaptive G7/K15 is used.
"""
import math
import os
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import gammaln, roots_genlaguerre

from . import _pykernels
from ._pykernels import FAM_GAMMA, FAM_NORMAL, FAM_NORMAL_IID, ft, weighted

GEN_HELLINGER2 = 0
GEN_KL = 1
GEN_CHI2 = 2
# plain ratio r, uncentred; E_Q[r] = 1 measures how much of P the nodes see
GEN_MASS = 3
MASS_TOL = 1e-8

RULE_ORDERS = (32, 48)

BACKEND = "python"
fdiv_kernel = _pykernels.fdiv_kernel
fdiv_rule = _pykernels.fdiv_rule

if os.environ.get("EICEST_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._ckernels import fdiv_kernel, fdiv_rule  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        pass

_EMPTY = np.zeros(0)


@lru_cache(maxsize=None)
def hermite_rule(n: int):
    """Nodes and log-weights of the n-point rule for N(0, 1)."""
    z, w = hermegauss(n)
    return np.ascontiguousarray(z), np.ascontiguousarray(np.log(w) - 0.5 * math.log(2 * math.pi))


@lru_cache(maxsize=None)
def gamma_rule(n: int, shape: float):
    """Nodes and log-weights of the n-point rule for Gamma(shape, 1)."""
    u, w = roots_genlaguerre(n, shape - 1.0)
    with np.errstate(divide="ignore"):
        lw = np.log(w) - gammaln(shape)
    return np.ascontiguousarray(u), np.ascontiguousarray(lw)


def _rule(family, pa, pb, gen, order):
    if family == FAM_NORMAL:
        x1, lw1 = hermite_rule(order)
        return fdiv_rule(family, pa, pb, gen, x1, lw1, _EMPTY, _EMPTY), order
    if family == FAM_GAMMA:
        x1, lw1 = gamma_rule(order, float(pa[0]))
        return fdiv_rule(family, pa, pb, gen, x1, lw1, _EMPTY, _EMPTY), order
    x1, lw1 = hermite_rule(order)
    # chi-square with n-1 dof is 2 * Gamma((n-1)/2)
    u, lw2 = gamma_rule(order, 0.5 * (float(pa[2]) - 1.0))
    return fdiv_rule(family, pa, pb, gen, x1, lw1,
                     np.ascontiguousarray(2.0 * u), lw2), order * order


def fdivergence(family, pa, pb, gen, rtol=1e-10, atol=1e-300, limit=400):
    """Centred f-divergence of P=``pa`` from Q=``pb``.

    Returns ``(value, error, neval, code, method)``; ``code`` 0 means the
    tolerance was met.  Code 4 means the nodes, centred on Q, do not see all of P's mass (the
    pair is too far apart); the centred integrand is then biased and the
    caller has to integrate over a domain covering both.
    """
    lo, n_lo = _rule(family, pa, pb, gen, RULE_ORDERS[0])
    hi, n_hi = _rule(family, pa, pb, gen, RULE_ORDERS[1])
    diff = abs(hi - lo)
    if math.isfinite(hi) and diff <= max(atol, rtol * abs(hi)):
        mass, n_m = _rule(family, pa, pb, GEN_MASS, RULE_ORDERS[1])
        if abs(mass - 1.0) <= MASS_TOL:
            return hi, diff, n_lo + n_hi + n_m, 0, "gauss"
    val, err, ne, code = fdiv_kernel(family, pa, pb, gen, rtol, atol, limit)
    mass, _, ne_m, code_m = fdiv_kernel(family, pa, pb, GEN_MASS, rtol, atol, limit)
    if code == 0 and (code_m != 0 or abs(mass - 1.0) > MASS_TOL):
        code = 4
    return val, err, ne + ne_m + n_lo + n_hi, code, "gk15"


__all__ = [
    "BACKEND",
    "FAM_GAMMA",
    "FAM_NORMAL",
    "FAM_NORMAL_IID",
    "GEN_CHI2",
    "GEN_HELLINGER2",
    "GEN_KL",
    "GEN_MASS",
    "fdiv_kernel",
    "fdiv_rule",
    "fdivergence",
    "ft",
    "weighted",
]
