# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled f-divergence integrals for the built-in continuous families.

Each routine integrates ``q(x) * Ft(r(x))`` where ``Ft(r) = F(r) - F'(1)(r - 1)``
is the centred generator, after standardising x under the reference
distribution Q.  The algorithm is the same globally adaptive G7/K15 driver
used by the pure-Python fallback, so both backends agree to rounding.
"""
from libc.math cimport exp, log, log1p, expm1, tan, fabs, lgamma, sqrt, pow, isfinite, M_PI
from libc.stdlib cimport malloc, free

cdef double EPMACH = 2.220446049250313e-16
cdef double UFLOW = 2.2250738585072014e-308
cdef double LOG_SQRT_2PI = 0.91893853320467274178
cdef double LOG2 = 0.69314718055994530942

cdef double XGK[8]
cdef double WGK[8]
cdef double WG[4]
XGK[:] = [0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
          0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
          0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
          0.207784955007898467600689403773245, 0.0]
WGK[:] = [0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
          0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
          0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
          0.204432940075298892414161999234649, 0.209482141084727828012999174891714]
WG[:] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
         0.381830050505118944950369775488975, 0.417959183673469387755102040816327]

cdef enum:
    FAM_NORMAL = 0
    FAM_GAMMA = 1
    FAM_NORMAL_IID = 2

ctypedef double (*integrand_t)(double, void*) noexcept nogil


cdef struct Ctx:
    int gen
    int fail
    # normal: ratio = s2/s1, one_minus = (s1-s2)/s1, shift = (mu2-mu1)/s1, lrho = log(s2/s1)
    double ratio
    double one_minus
    double shift
    double lrho
    # gamma: k, d = (l1-l2)/l2, lgk = lgamma(k), log1pd
    double k
    double d
    double lgk
    double log1pd
    # normal iid: n, chi dof, chi log-normaliser, current w-dependent offset
    double n
    double kchi
    double lchi
    double offset
    double rtol
    double atol
    int limit
    int neval


cdef inline double ft(double lr, int gen) noexcept nogil:
    cdef double e, l2
    if gen == 0:
        e = expm1(0.5 * lr)
        return 0.5 * e * e
    elif gen == 1:
        if fabs(lr) < 1e-2:
            l2 = lr * lr
            return l2 * (0.5 + lr * (1.0 / 3.0 + lr * (0.125 + lr * (1.0 / 30.0
                   + lr * (1.0 / 144.0 + lr * (1.0 / 840.0))))))
        return exp(lr) * lr - expm1(lr)
    elif gen == 3:
        return exp(lr)
    else:
        e = expm1(lr)
        return e * e


cdef inline double log_ft_large(double lr, int gen) noexcept nogil:
    if gen == 0:
        return lr + 2.0 * log1p(-exp(-0.5 * lr)) - LOG2
    elif gen == 1:
        return lr + log(lr - 1.0 + exp(-lr))
    elif gen == 3:
        return lr
    else:
        return 2.0 * lr + 2.0 * log1p(-exp(-lr))


cdef inline double weighted(double lr, double logw, int gen) noexcept nogil:
    cdef double w
    if lr <= 30.0:
        w = exp(logw)
        if w == 0.0:
            return 0.0
        return w * ft(lr, gen)
    return exp(logw + log_ft_large(lr, gen))


cdef inline double normal_lr(double z, Ctx* c) noexcept nogil:
    # log p/q at standardised z; (z-w)(z+w) avoids cancellation near p == q
    cdef double a = z * c.one_minus - c.shift
    cdef double b = z * (1.0 + c.ratio) + c.shift
    return c.lrho + 0.5 * a * b


cdef double f_normal(double t, void* vp) noexcept nogil:
    cdef Ctx* c = <Ctx*> vp
    cdef double u = 0.5 * M_PI * t
    cdef double z = tan(u)
    cdef double jac = 0.5 * M_PI * (1.0 + z * z)
    cdef double logw = -0.5 * z * z - LOG_SQRT_2PI
    cdef double v = weighted(normal_lr(z, c), logw, c.gen)
    if v == 0.0:
        return 0.0
    return v * jac


cdef double f_gamma(double t, void* vp) noexcept nogil:
    cdef Ctx* c = <Ctx*> vp
    cdef double u = 0.5 * M_PI * t
    cdef double tn = tan(u)
    cdef double y = c.k * tn
    cdef double jac = c.k * 0.5 * M_PI * (1.0 + tn * tn)
    cdef double logw, lr, v
    if y <= 0.0:
        return 0.0
    logw = (c.k - 1.0) * log(y) - y - c.lgk
    lr = c.k * c.log1pd - c.d * y
    v = weighted(lr, logw, c.gen)
    if v == 0.0:
        return 0.0
    return v * jac


cdef double f_iid_inner(double t, void* vp) noexcept nogil:
    cdef Ctx* c = <Ctx*> vp
    cdef double u = 0.5 * M_PI * t
    cdef double z = tan(u)
    cdef double jac = 0.5 * M_PI * (1.0 + z * z)
    cdef double logw = -0.5 * z * z - LOG_SQRT_2PI
    cdef double a = z * c.one_minus - c.shift
    cdef double b = z * (1.0 + c.ratio) + c.shift
    cdef double lr = c.offset + 0.5 * a * b
    cdef double v = weighted(lr, logw, c.gen)
    if v == 0.0:
        return 0.0
    return v * jac


cdef double f_iid_outer(double t, void* vp) noexcept nogil:
    cdef Ctx* c = <Ctx*> vp
    cdef double u = 0.5 * M_PI * t
    cdef double tn = tan(u)
    cdef double s = sqrt(c.kchi)
    cdef double w = s * tn
    cdef double jac = s * 0.5 * M_PI * (1.0 + tn * tn)
    cdef double logw, val, err
    cdef double cuts[3]
    cdef int ne = 0
    cdef int code
    if w <= 0.0:
        return 0.0
    logw = (c.kchi - 1.0) * log(w) - 0.5 * w * w - (0.5 * c.kchi - 1.0) * LOG2 - c.lchi
    if logw < -745.0:
        return 0.0
    c.offset = c.n * c.lrho + 0.5 * w * w * c.one_minus * (1.0 + c.ratio)
    cuts[0] = -1.0
    cuts[1] = 0.0
    cuts[2] = 1.0
    code = adapt_c(f_iid_inner, vp, cuts, 3, c.rtol * 0.1, c.atol, c.limit,
                   &val, &err, &ne)
    c.neval += ne
    if code != 0:
        c.fail = code
    return val * exp(logw) * jac


cdef void panel(integrand_t f, void* ctx, double a, double b,
                double* res, double* err, int* bad) noexcept nogil:
    cdef double centr = 0.5 * (a + b)
    cdef double hlgth = 0.5 * (b - a)
    cdef double fv1[7]
    cdef double fv2[7]
    cdef double fc = f(centr, ctx)
    cdef double resg = fc * WG[3]
    cdef double resk = fc * WGK[7]
    cdef double resabs = fabs(resk)
    cdef double absc, f1, f2, reskh, resasc, abserr
    cdef int j
    for j in range(7):
        absc = hlgth * XGK[j]
        f1 = f(centr - absc, ctx)
        f2 = f(centr + absc, ctx)
        if not (isfinite(f1) and isfinite(f2)):
            bad[0] = 1
        fv1[j] = f1
        fv2[j] = f2
        resk = resk + WGK[j] * (f1 + f2)
        resabs = resabs + WGK[j] * (fabs(f1) + fabs(f2))
        if j % 2 == 1:
            resg = resg + WG[j // 2] * (f1 + f2)
    if not isfinite(fc):
        bad[0] = 1
    reskh = resk * 0.5
    resasc = WGK[7] * fabs(fc - reskh)
    for j in range(7):
        resasc = resasc + WGK[j] * (fabs(fv1[j] - reskh) + fabs(fv2[j] - reskh))
    res[0] = resk * hlgth
    resabs = resabs * fabs(hlgth)
    resasc = resasc * fabs(hlgth)
    abserr = fabs((resk - resg) * hlgth)
    if resasc != 0.0 and abserr != 0.0:
        abserr = resasc * min(1.0, pow(200.0 * abserr / resasc, 1.5))
    if resabs > UFLOW / (50.0 * EPMACH):
        abserr = max(EPMACH * 50.0 * resabs, abserr)
    err[0] = abserr


cdef int adapt_c(integrand_t f, void* ctx, double* cuts, int ncuts,
                 double rtol, double atol, int limit,
                 double* out_val, double* out_err, int* neval) noexcept nogil:
    """Return 0 on convergence, 1 at the interval limit, 2 on roundoff, 3 on NaN."""
    cdef int cap = limit + ncuts
    cdef double* ia = <double*> malloc(cap * sizeof(double))
    cdef double* ib = <double*> malloc(cap * sizeof(double))
    cdef double* ir = <double*> malloc(cap * sizeof(double))
    cdef double* ie = <double*> malloc(cap * sizeof(double))
    cdef int m = 0
    cdef int i, imax, code = 0
    cdef int bad = 0
    cdef double total, err, emax, lo, hi, mid, r1, e1, r2, e2
    for i in range(ncuts - 1):
        ia[m] = cuts[i]
        ib[m] = cuts[i + 1]
        panel(f, ctx, ia[m], ib[m], &ir[m], &ie[m], &bad)
        m += 1
    neval[0] = 15 * m
    while True:
        total = 0.0
        err = 0.0
        imax = 0
        emax = -1.0
        for i in range(m):
            total += ir[i]
            err += ie[i]
            if ie[i] > emax:
                emax = ie[i]
                imax = i
        if bad:
            code = 3
            break
        if err <= max(atol, rtol * fabs(total)):
            code = 0
            break
        if m >= limit:
            code = 1
            break
        lo = ia[imax]
        hi = ib[imax]
        mid = 0.5 * (lo + hi)
        if not (lo < mid and mid < hi) or (hi - lo) <= 4.0 * EPMACH * max(fabs(lo), fabs(hi)):
            code = 2
            break
        panel(f, ctx, lo, mid, &r1, &e1, &bad)
        panel(f, ctx, mid, hi, &r2, &e2, &bad)
        neval[0] += 30
        ib[imax] = mid
        ir[imax] = r1
        ie[imax] = e1
        ia[m] = mid
        ib[m] = hi
        ir[m] = r2
        ie[m] = e2
        m += 1
    out_val[0] = total
    out_err[0] = err
    free(ia)
    free(ib)
    free(ir)
    free(ie)
    return code


cdef void setup_normal(Ctx* c, double mu1, double s1, double mu2, double s2) noexcept nogil:
    c.ratio = s2 / s1
    c.one_minus = (s1 - s2) / s1
    c.shift = (mu2 - mu1) / s1
    c.lrho = log1p((s2 - s1) / s1)


def fdiv_kernel(int family, tuple pa, tuple pb, int gen,
                double rtol=1e-10, double atol=1e-300, int limit=400):
    """Integrate the centred f-divergence of P=``pa`` from Q=``pb``.

    Returns ``(value, error, neval, code)`` where ``code`` is 0 on convergence.
    """
    cdef Ctx c
    cdef double cuts[3]
    cdef double val = 0.0, err = 0.0
    cdef int ne = 0, code = 0
    c.gen = gen
    c.fail = 0
    c.rtol = rtol
    c.atol = atol
    c.limit = limit
    c.neval = 0
    if family == FAM_NORMAL:
        setup_normal(&c, pa[0], pa[1], pb[0], pb[1])
        cuts[0] = -1.0
        cuts[1] = 0.0
        cuts[2] = 1.0
        with nogil:
            code = adapt_c(f_normal, &c, cuts, 3, rtol, atol, limit, &val, &err, &ne)
    elif family == FAM_GAMMA:
        c.k = pa[0]
        c.d = (pa[1] - pb[1]) / pb[1]
        c.log1pd = log1p(c.d)
        c.lgk = lgamma(c.k)
        cuts[0] = 0.0
        cuts[1] = 1.0
        with nogil:
            code = adapt_c(f_gamma, &c, cuts, 2, rtol, atol, limit, &val, &err, &ne)
    elif family == FAM_NORMAL_IID:
        c.n = pa[2]
        setup_normal(&c, pa[0] * sqrt(c.n), pa[1], pb[0] * sqrt(c.n), pb[1])
        c.kchi = c.n - 1.0
        c.lchi = lgamma(0.5 * c.kchi)
        cuts[0] = 0.0
        cuts[1] = 1.0
        with nogil:
            code = adapt_c(f_iid_outer, &c, cuts, 2, rtol, atol, limit, &val, &err, &ne)
        ne += c.neval
        if code == 0 and c.fail != 0:
            code = c.fail
    else:
        raise ValueError(f"unknown kernel family {family}")
    return val, err, ne, code


def fdiv_rule(int family, tuple pa, tuple pb, int gen,
              double[::1] x1, double[::1] lw1, double[::1] x2, double[::1] lw2):
    """Fixed product-rule value of the same integral.

    ``x1``/``lw1`` are nodes and log-weights of a probability rule for the
    first standardised variable (normal z, or gamma y); ``x2``/``lw2`` carry
    the chi-square variable of the iid normal family and are ignored otherwise.
    """
    cdef Ctx c
    cdef Py_ssize_t i, j, n1 = x1.shape[0], n2 = x2.shape[0]
    cdef double total = 0.0, row, off, lr, z
    c.gen = gen
    if family == FAM_NORMAL:
        setup_normal(&c, pa[0], pa[1], pb[0], pb[1])
        with nogil:
            for i in range(n1):
                total += weighted(normal_lr(x1[i], &c), lw1[i], gen)
    elif family == FAM_GAMMA:
        c.k = pa[0]
        c.d = (pa[1] - pb[1]) / pb[1]
        c.log1pd = log1p(c.d)
        with nogil:
            for i in range(n1):
                total += weighted(c.k * c.log1pd - c.d * x1[i], lw1[i], gen)
    elif family == FAM_NORMAL_IID:
        c.n = pa[2]
        setup_normal(&c, pa[0] * sqrt(c.n), pa[1], pb[0] * sqrt(c.n), pb[1])
        with nogil:
            for j in range(n2):
                off = c.n * c.lrho + 0.5 * x2[j] * c.one_minus * (1.0 + c.ratio)
                row = 0.0
                for i in range(n1):
                    z = x1[i]
                    lr = off + 0.5 * (z * c.one_minus - c.shift) * (z * (1.0 + c.ratio) + c.shift)
                    row += weighted(lr, lw1[i] + lw2[j], gen)
                total += row
    else:
        raise ValueError(f"unknown kernel family {family}")
    return total
