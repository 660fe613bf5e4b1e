"""Pure numpy twin of the compiled f-divergence kernels."""
import math

import numpy as np

from ..errors import IntegralNotConverged
from ..numerics.quadrature import Axis, integrate_1d

FAM_NORMAL = 0
FAM_GAMMA = 1
FAM_NORMAL_IID = 2

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_LOG2 = math.log(2.0)
_NORMAL_AXIS = Axis(-math.inf, math.inf, 0.0, 1.0)


def ft(lr, gen):
    """Centred generator ``F(r) - F'(1)(r - 1)`` as a function of ``log r``.

    ``gen == 3`` is the plain ratio ``r``, used to check ``E_Q[r] = 1``.
    """
    lr = np.asarray(lr, dtype=float)
    if gen == 0:
        e = np.expm1(0.5 * lr)
        return 0.5 * e * e
    if gen == 1:
        small = np.abs(lr) < 1e-2
        out = np.empty_like(lr)
        ls = lr[small]
        out[small] = ls * ls * (0.5 + ls * (1.0 / 3.0 + ls * (0.125 + ls * (
            1.0 / 30.0 + ls * (1.0 / 144.0 + ls * (1.0 / 840.0))))))
        lb = lr[~small]
        with np.errstate(over="ignore", invalid="ignore"):
            out[~small] = np.exp(lb) * lb - np.expm1(lb)
        return out
    if gen == 3:
        with np.errstate(over="ignore"):
            return np.exp(lr)
    e = np.expm1(lr)
    return e * e


def _log_ft_large(lr, gen):
    if gen == 0:
        return lr + 2.0 * np.log1p(-np.exp(-0.5 * lr)) - _LOG2
    if gen == 1:
        return lr + np.log(lr - 1.0 + np.exp(-lr))
    if gen == 3:
        return lr
    return 2.0 * lr + 2.0 * np.log1p(-np.exp(-lr))


def weighted(lr, logw, gen):
    """``exp(logw) * ft(lr)`` without overflow when the ratio is huge."""
    lr = np.asarray(lr, dtype=float)
    logw = np.broadcast_to(np.asarray(logw, dtype=float), lr.shape)
    out = np.zeros_like(lr)
    lo = lr <= 30.0
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        w = np.exp(logw[lo])
        vals = ft(lr[lo], gen)
        out[lo] = np.where(w == 0.0, 0.0, w * vals)
        hi = ~lo
        if np.any(hi):
            out[hi] = np.exp(logw[hi] + _log_ft_large(lr[hi], gen))
    return out


def _normal_consts(mu1, s1, mu2, s2):
    ratio = s2 / s1
    one_minus = (s1 - s2) / s1
    shift = (mu2 - mu1) / s1
    lrho = math.log1p((s2 - s1) / s1)
    return ratio, one_minus, shift, lrho


def _run(fn, axis, rtol, atol, limit):
    try:
        r = integrate_1d(fn, axis, rtol, atol, limit, strict=False)
    except IntegralNotConverged as exc:
        return exc.estimate, exc.error, 0, 3
    return r.value, r.error, r.neval, 0 if r.converged else 1


def fdiv_kernel(family, pa, pb, gen, rtol=1e-10, atol=1e-300, limit=400):
    """Same contract as the compiled ``fdiv_kernel``."""
    if family == FAM_NORMAL:
        ratio, one_minus, shift, lrho = _normal_consts(pa[0], pa[1], pb[0], pb[1])

        def f(z):
            lr = lrho + 0.5 * (z * one_minus - shift) * (z * (1.0 + ratio) + shift)
            return weighted(lr, -0.5 * z * z - _LOG_SQRT_2PI, gen)

        return _run(f, _NORMAL_AXIS, rtol, atol, limit)

    if family == FAM_GAMMA:
        k = float(pa[0])
        d = (pa[1] - pb[1]) / pb[1]
        log1pd = math.log1p(d)
        lgk = math.lgamma(k)

        def f(y):
            out = np.zeros_like(y)
            pos = y > 0
            yp = y[pos]
            logw = (k - 1.0) * np.log(yp) - yp - lgk
            out[pos] = weighted(k * log1pd - d * yp, logw, gen)
            return out

        return _run(f, Axis(0.0, math.inf, 0.0, k), rtol, atol, limit)

    if family == FAM_NORMAL_IID:
        n = float(pa[2])
        rn = math.sqrt(n)
        ratio, one_minus, shift, lrho = _normal_consts(
            pa[0] * rn, pa[1], pb[0] * rn, pb[1])
        kchi = n - 1.0
        lchi = math.lgamma(0.5 * kchi)
        fails = []
        count = [0]

        def inner(offset):
            def f(z):
                lr = offset + 0.5 * (z * one_minus - shift) * (z * (1.0 + ratio) + shift)
                return weighted(lr, -0.5 * z * z - _LOG_SQRT_2PI, gen)
            return f

        def outer(w):
            out = np.zeros_like(w)
            for i, wi in enumerate(w):
                if wi <= 0.0:
                    continue
                logw = ((kchi - 1.0) * math.log(wi) - 0.5 * wi * wi
                        - (0.5 * kchi - 1.0) * _LOG2 - lchi)
                if logw < -745.0:
                    continue
                offset = n * lrho + 0.5 * wi * wi * one_minus * (1.0 + ratio)
                val, _, ne, code = _run(inner(offset), _NORMAL_AXIS,
                                        rtol * 0.1, atol, limit)
                count[0] += ne
                if code:
                    fails.append(code)
                out[i] = val * math.exp(logw)
            return out

        val, err, ne, code = _run(outer, Axis(0.0, math.inf, 0.0, math.sqrt(kchi)),
                                  rtol, atol, limit)
        if code == 0 and fails:
            code = fails[0]
        return val, err, ne + count[0], code

    raise ValueError(f"unknown kernel family {family}")


def fdiv_rule(family, pa, pb, gen, x1, lw1, x2, lw2):
    """Same contract as the compiled ``fdiv_rule``."""
    x1 = np.asarray(x1, dtype=float)
    lw1 = np.asarray(lw1, dtype=float)
    if family == FAM_NORMAL:
        ratio, one_minus, shift, lrho = _normal_consts(pa[0], pa[1], pb[0], pb[1])
        lr = lrho + 0.5 * (x1 * one_minus - shift) * (x1 * (1.0 + ratio) + shift)
        return math.fsum(weighted(lr, lw1, gen).tolist())
    if family == FAM_GAMMA:
        k = float(pa[0])
        d = (pa[1] - pb[1]) / pb[1]
        return math.fsum(weighted(k * math.log1p(d) - d * x1, lw1, gen).tolist())
    if family == FAM_NORMAL_IID:
        n = float(pa[2])
        rn = math.sqrt(n)
        ratio, one_minus, shift, lrho = _normal_consts(
            pa[0] * rn, pa[1], pb[0] * rn, pb[1])
        x2 = np.asarray(x2, dtype=float)
        lw2 = np.asarray(lw2, dtype=float)
        off = n * lrho + 0.5 * x2 * one_minus * (1.0 + ratio)
        lr = off[:, None] + (0.5 * (x1 * one_minus - shift) * (x1 * (1.0 + ratio) + shift))[None, :]
        return math.fsum(weighted(lr, lw2[:, None] + lw1[None, :], gen).ravel().tolist())
    raise ValueError(f"unknown kernel family {family}")
