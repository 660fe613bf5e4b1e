"""Acceptance computations, one function per criterion.

Each ``criterion_k(seed)`` returns ``(values, verdict)``: ``values`` holds
only numbers derived from the computation, ``verdict`` the pass flag and
the tolerances it was judged against.  Timing goes to a separate metadata
record so the value report is reproducible byte for byte.

Run ``python -m eicest.acceptance --out report.json`` to write all of them.
"""
from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np
from scipy import optimize

from . import axioms as A
from . import losses as L
from . import suite
from .report import dumps
from .estimators import EstimatorSpec, estimate, loss_to_penalty, pmle_to_loss
from .model import ParameterSpace, UniformBox
from .numerics.fisher import fisher_information
from .numerics.hessian import hessian_at_diagonal
from .risk import make_spectrum, utility_ratio_curve

__all__ = ["CRITERIA", "BUDGETS", "run", "dumps"]

# runtime budgets in seconds
BUDGETS = {1: 60, 2: 120, 3: 30, 4: 120, 5: 120, 6: 1, 7: 180, 8: 60, 9: 30}


def _interior(problem, n, rng):
    lo, hi = problem.theta_space.lower_array, problem.theta_space.upper_array
    return [lo + (hi - lo) * rng.uniform(0.1, 0.9, lo.shape) for _ in range(n)]


def criterion_1(seed: int = 0):
    """Loss Hessian against gamma times Fisher information."""
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    problems = suite.fisher_problems()
    thetas = {name: _interior(p, 10, rng) for name, p in problems.items()}
    for gen in suite.FDIV_SUITE:
        loss = L.fdivergence(gen)
        gamma = loss.generator.gamma
        for name, p in problems.items():
            for t in thetas[name]:
                H = hessian_at_diagonal(loss, p, t)
                target = gamma * fisher_information(p, t).array
                dev = H.max_rel_deviation(target)
                worst = max(worst, dev)
                rows.append({"loss": gen, "problem": name, "theta": t.tolist(), "dev": dev})
    tol = 1e-2
    return {"rows": rows, "max_rel_dev": worst}, {"pass": worst < tol, "tolerance": tol}


def criterion_2(seed: int = 0):
    """EIC under squared Hellinger against Wallace-Freeman."""
    rows = []
    worst = 0.0
    eic = EstimatorSpec("EIC", L.fdivergence("Hellinger2"))
    wf = EstimatorSpec("WF")
    for p, xs in suite.eic_wf_cases():
        for x in xs:
            a = estimate(eic, p, x)
            b = estimate(wf, p, x)
            d = a.distance_to(b)
            worst = max(worst, d)
            rows.append({"problem": p.name, "class": p.cls, "x": list(x), "eic": a.as_dict()["points"],
                         "wf": b.as_dict()["points"], "distance": d})
    tol = 1e-4
    return {"rows": rows, "max_distance": worst}, {"pass": worst < tol, "tolerance": tol}


def criterion_3(seed: int = 0):
    """EIC equals discrete MAP on finite sets and continuous MAP under quadratic loss."""
    rows = []
    exact = True
    dmap = EstimatorSpec("DMAP")
    for p, xs in ((suite.golden_discrete_problem(), [[0.0], [1.0]]),
                  (suite.finite_binomial_problem(), [[0], [2], [5], [8], [10]])):
        for x in xs:
            ref = estimate(dmap, p, x).as_dict()["points"]
            for loss in (L.fdivergence("Hellinger2"), L.fdivergence("KL"), L.quadratic()):
                got = estimate(EstimatorSpec("EIC", loss), p, x).as_dict()["points"]
                exact &= got == ref
                rows.append({"problem": p.name, "x": x, "loss": loss.name, "eic": got, "dmap": ref})
    worst = 0.0
    eic = EstimatorSpec("EIC", L.quadratic())
    cmap = EstimatorSpec("CMAP")
    cases = suite.eic_wf_cases()
    cont = [(suite.gaussian_mean_problem(), [[1.2], [-0.4], [3.0]])] + [(p, xs[:3]) for p, xs in cases]
    for p, xs in cont:
        for x in xs:
            a = estimate(eic, p, x)
            b = estimate(cmap, p, x)
            d = a.distance_to(b)
            worst = max(worst, d)
            rows.append({"problem": p.name, "x": list(x), "loss": "Quadratic",
                         "eic": a.as_dict()["points"], "cmap": b.as_dict()["points"], "distance": d})
    tol = 1e-4
    return ({"rows": rows, "discrete_exact": exact, "max_continuous_distance": worst},
            {"pass": bool(exact and worst < tol), "tolerance": tol})


def criterion_4(seed: int = 0):
    """PMLE and EIC span each other in both directions."""
    s = ParameterSpace.box([0.02], [0.98])
    from .model import BetaParams, BinomialN, EstimationProblem
    p = EstimationProblem(s, BinomialN(10), BetaParams(s, 2.0, 2.0), name="BinomialN(10)")
    x = [7]
    rows = []
    worst = 0.0
    for k in range(10):
        g = suite.random_penalty(seed * 1000 + k, s)
        a = estimate(EstimatorSpec("EIC", pmle_to_loss(g, p)), p, x)
        b = estimate(EstimatorSpec("PMLE", penalty=g), p, x)
        d = a.distance_to(b)
        worst = max(worst, d)
        rows.append({"direction": "penalty->loss", "g": k, "eic": a.as_dict()["points"],
                     "pmle": b.as_dict()["points"], "distance": d})
    for gen in suite.FDIV_SUITE:
        loss = L.fdivergence(gen)
        a = estimate(EstimatorSpec("PMLE", penalty=loss_to_penalty(loss, p)), p, x)
        b = estimate(EstimatorSpec("EIC", loss), p, x)
        d = a.distance_to(b)
        worst = max(worst, d)
        rows.append({"direction": "loss->penalty", "loss": gen, "pmle": a.as_dict()["points"],
                     "eic": b.as_dict()["points"], "distance": d})
    tol = 1e-4
    return {"rows": rows, "max_distance": worst}, {"pass": worst < tol, "tolerance": tol}


def criterion_5(seed: int = 0):
    """Utility ratios converge to the EIC metric ratio as the error limit shrinks."""
    p = suite.gaussian_mean_problem()
    x = [1.2]
    v = 1.0 / (1.0 + 1.0 / 4.0)
    t1 = v * 1.2
    t2 = t1 + math.sqrt(2.0 * v * math.log(2.0))
    curve = utility_ratio_curve(p, L.quadratic(), make_spectrum("SmoothStep"), x, [t1], [t2])
    stable = [r for r in curve.records if r["stable"]]
    errs = [abs(r["ratio"] - curve.predicted) for r in stable]
    last = errs[-3:]
    monotone = len(last) == 3 and last[0] > last[1] > last[2]
    final = curve.final_rel_error()
    tol = 0.02
    values = {"curve": curve.as_dict(), "final_rel_error": final, "abs_errors": errs}
    return values, {"pass": bool(final < tol and monotone), "tolerance": tol, "monotone": monotone}


def criterion_6(seed: int = 0):
    """Two-point golden example for Bayes and discrete MAP."""
    p = suite.golden_discrete_problem()
    x = [0.0]
    b = estimate(EstimatorSpec("Bayes", L.quadratic(), extend_to_box=True), p, x)
    d = estimate(EstimatorSpec("DMAP"), p, x)
    est = b.point[0]
    risk = b.diagnostics["expected_loss"][0]
    dm = d.as_dict()["points"]
    tol = 1e-6
    ok = abs(est - 1.1) <= tol and abs(risk - 0.09) <= tol and dm == [[1.0]]
    return {"bayes": est, "expected_loss": risk, "dmap": dm}, {"pass": bool(ok), "tolerance": tol}


def criterion_7(seed: int = 0):
    """Axiom audit matrix and the factor-1/4 shrink of NoISI under a fair coin."""
    audit = suite.audit_matrix(seed)
    m = audit["matrix"]
    shape = suite.matrix_as_designed(m)
    fdiv_ok, exact = shape["fdiv_all_pass"], shape["designated_only"]
    semi = suite._semicontinuous_audit_problem()
    loss = L.no_isi()
    aug = A.augment_noise(semi, "BernoulliHalf")
    ratios = []
    for t1, t2 in suite.random_pairs(semi, 3, seed + 1):
        ratios.append(L.loss_value(loss, aug, t1, t2) / L.loss_value(loss, semi, t1, t2))
    ratio_ok = all(abs(r - 0.25) <= 1e-6 for r in ratios)
    ok = fdiv_ok and all(exact.values()) and ratio_ok
    values = {"rows": audit["rows"], "noisi_ratios": ratios}
    verdict = {"pass": bool(ok), "matrix": m, "fdiv_all_pass": fdiv_ok, "designated_only": exact,
               "ratio_ok": ratio_ok, "pass_below": A.PASS_TOL, "fail_above": A.FAIL_TOL}
    return values, verdict


def criterion_8(seed: int = 0):
    """Squared Hellinger depends on the pair only through c[p, q]."""
    s = ParameterSpace.box([-5.0], [5.0])
    from .model import EstimationProblem, GaussianKnownSigma
    gen = L.builtin_generator("Hellinger2")
    rows = []
    worst = 0.0
    for sigma, m1, m2 in ((1.0, 1.0, 0.0), (1.0, 0.2, -0.6), (2.0, 1.5, -0.9)):
        p = EstimationProblem(s, GaussianKnownSigma(sigma), UniformBox(s))
        R = A.canonical_rearrangement_1d(p, m1, m2)
        rearranged = R.fdiv(gen)
        direct = L.loss_value(L.fdivergence("Hellinger2"), p, m1, m2)
        oracle = 1.0 - math.exp(-(m1 - m2) ** 2 / (8.0 * sigma * sigma))
        dev = max(abs(rearranged - oracle), abs(direct - oracle))
        worst = max(worst, dev)
        rows.append({"sigma": sigma, "mu1": m1, "mu2": m2, "rearranged": rearranged, "direct": direct,
                     "oracle": oracle, "monotone": bool(np.all(np.diff(R.p) >= 0))})
    tol = 1e-3
    ok = worst < tol and all(r["monotone"] for r in rows)
    return {"rows": rows, "max_abs_dev": worst}, {"pass": bool(ok), "tolerance": tol}


def _stationary_sigma2(S: float, n: int, power: int) -> float:
    """Root of d/dsigma [power * log sigma - S / (2 sigma^2)] by bracketing."""
    root = optimize.brentq(lambda s: power / s + S / s ** 3, 1e-3, 1e3, xtol=1e-14, rtol=1e-15)
    return root * root


def criterion_9(seed: int = 0):
    """Normal sample with a 1/sigma prior: WF gives S/(n-1), CMAP gives S/(n+1)."""
    n, S = 10, 18.0
    x = suite.showcase_sample(n, S)
    p = suite.wf_showcase(n)
    wf = estimate(EstimatorSpec("WF"), p, x).point
    cm = estimate(EstimatorSpec("CMAP"), p, x).point
    # profile log metric in sigma: posterior sigma^-(n+1), WF divides by sigma^-2
    oracle_wf = _stationary_sigma2(S, n, -(n - 1))
    oracle_cm = _stationary_sigma2(S, n, -(n + 1))
    rel_wf = abs(wf[1] ** 2 - S / (n - 1)) / (S / (n - 1))
    rel_cm = abs(cm[1] ** 2 - S / (n + 1)) / (S / (n + 1))
    tol = 1e-3
    values = {"S": float(np.sum((x - x.mean()) ** 2)), "wf_sigma2": wf[1] ** 2, "cmap_sigma2": cm[1] ** 2,
              "closed_wf": S / (n - 1), "closed_cmap": S / (n + 1),
              "stationary_wf": oracle_wf, "stationary_cmap": oracle_cm,
              "rel_err_wf": rel_wf, "rel_err_cmap": rel_cm}
    ok = (rel_wf < tol and rel_cm < tol and abs(oracle_wf - S / (n - 1)) < 1e-9
          and abs(oracle_cm - S / (n + 1)) < 1e-9)
    return values, {"pass": bool(ok), "tolerance": tol}


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}


def run(which=None, seed: int = 0) -> tuple:
    """Run criteria; returns ``(values, verdicts, timings)`` keyed by number."""
    values, verdicts, timings = {}, {}, {}
    for k in which or sorted(CRITERIA):
        t0 = time.perf_counter()
        v, d = CRITERIA[k](seed)
        timings[k] = time.perf_counter() - t0
        values[k], verdicts[k] = v, d
    return values, verdicts, timings


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m eicest.acceptance")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--criteria", default="1,2,3,4,5,6,7,8,9")
    ap.add_argument("--out", help="value report path (JSON); verdicts and timings go beside it")
    args = ap.parse_args(argv)
    which = [int(c) for c in args.criteria.split(",") if c]
    values, verdicts, timings = run(which, args.seed)
    for k in which:
        status = "PASS" if verdicts[k]["pass"] else "FAIL"
        print(f"criterion {k}: {status} ({timings[k]:.1f} s, budget {BUDGETS[k]} s)")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(dumps(values))
        with open(args.out + ".verdicts.json", "w") as fh:
            fh.write(dumps(verdicts))
        with open(args.out + ".meta.json", "w") as fh:
            fh.write(dumps({"seed": args.seed, "timings": timings,
                            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}))
    return 0 if all(verdicts[k]["pass"] for k in which) else 1


if __name__ == "__main__":
    sys.exit(main())
