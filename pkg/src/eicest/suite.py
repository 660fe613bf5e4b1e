"""Catalogue of test problems, observations and the fixed audit battery."""
from __future__ import annotations

import math

import numpy as np

from . import axioms as A
from . import losses as L
from .model import (
    Bernoulli,
    BetaParams,
    BinomialN,
    Categorical,
    CustomModel,
    EstimationProblem,
    ExponentialRate,
    FinitePmf,
    GaussianKnownSigma,
    GaussianMeanSigma,
    GaussianParams,
    IIDProduct,
    ObservationSpace,
    ParameterSpace,
    PowerLawSigma,
    UniformBox,
)

__all__ = [
    "fisher_problems",
    "eic_wf_cases",
    "gaussian_mean_problem",
    "golden_discrete_problem",
    "finite_binomial_problem",
    "wf_showcase",
    "showcase_sample",
    "FDIV_SUITE",
    "param_battery",
    "obs_battery",
    "noise_battery",
    "random_pairs",
    "random_penalty",
    "matrix_as_designed",
    "audit_loss",
    "audit_matrix",
]

FDIV_SUITE = ("Hellinger2", "KL", "ChiSquared")


def _box(lo, hi):
    return ParameterSpace.box(lo, hi)


def fisher_problems() -> dict:
    """One problem per built-in continuous-parameter family."""
    out = {}
    s = _box([0.05], [0.95])
    out["Bernoulli"] = EstimationProblem(s, Bernoulli(), UniformBox(s), name="Bernoulli")
    out["BinomialN(10)"] = EstimationProblem(s, BinomialN(10), BetaParams(s, 2, 2), name="BinomialN(10)")
    s = _box([-5.0], [5.0])
    out["GaussianKnownSigma"] = EstimationProblem(s, GaussianKnownSigma(1.5), GaussianParams(s, 0.0, 2.0),
                                                  name="GaussianKnownSigma")
    s = _box([-3.0, 0.3], [3.0, 3.0])
    out["GaussianMeanSigma(5)"] = EstimationProblem(s, GaussianMeanSigma(5), UniformBox(s),
                                                    name="GaussianMeanSigma(5)")
    s = _box([0.2], [5.0])
    out["ExponentialRate"] = EstimationProblem(s, ExponentialRate(), UniformBox(s), name="ExponentialRate")
    return out


def eic_wf_cases() -> list:
    """Three continuous and two semi-continuous problems, five observations each."""
    cases = []
    s = _box([-5.0], [5.0])
    p = EstimationProblem(s, IIDProduct(GaussianKnownSigma(1.0), 3), GaussianParams(s, 0.0, 2.0),
                          name="GaussianKnownSigma x3")
    cases.append((p, [[0.1, -0.4, 0.9], [1.2, 0.8, 1.9], [-1.0, -2.2, -0.3],
                      [0.0, 0.0, 0.5], [2.5, 1.1, 1.7]]))
    s = _box([0.1], [6.0])
    p = EstimationProblem(s, IIDProduct(ExponentialRate(), 5), GaussianParams(s, 1.5, 1.5),
                          name="ExponentialRate x5")
    cases.append((p, [[0.3, 1.2, 0.5, 0.8, 2.0], [0.1, 0.2, 0.4, 0.3, 0.6], [1.5, 2.5, 0.7, 3.1, 1.0],
                      [0.9, 0.9, 0.9, 0.9, 0.9], [0.05, 1.7, 0.4, 0.2, 0.8]]))
    s = _box([-3.0, 0.3], [3.0, 4.0])
    p = EstimationProblem(s, GaussianMeanSigma(5), UniformBox(s), name="GaussianMeanSigma(5)")
    cases.append((p, [[0.2, -0.5, 1.1, 0.4, -0.9], [1.0, 1.5, 0.2, 2.1, 0.9], [-0.3, 0.4, 0.1, -1.2, 2.0],
                      [0.5, 1.6, -0.4, 0.9, 0.1], [-1.4, 0.2, -2.0, 0.8, -0.6]]))
    s = _box([0.02], [0.98])
    p = EstimationProblem(s, BinomialN(10), BetaParams(s, 2.0, 2.0), name="BinomialN(10)")
    cases.append((p, [[0], [3], [5], [7], [10]]))
    s = _box([-4.0, -4.0], [4.0, 4.0])
    p = EstimationProblem(s, IIDProduct(Categorical(3), 4), GaussianParams(s, 0.0, 1.5), name="Categorical(3) x4")
    cases.append((p, [[0, 1, 2, 1], [2, 2, 2, 1], [0, 0, 0, 1], [1, 1, 1, 1], [0, 2, 0, 2]]))
    return cases


def gaussian_mean_problem() -> EstimationProblem:
    """Normal mean with known sigma 1 and a N(0, 2^2) prior truncated to [-10, 10]."""
    s = _box([-10.0], [10.0])
    return EstimationProblem(s, GaussianKnownSigma(1.0), GaussianParams(s, 0.0, 2.0), name="GaussianMean")


def golden_discrete_problem() -> EstimationProblem:
    """Two parameters, equal prior, and x=0 giving posterior (0.9, 0.1)."""
    space = ParameterSpace.finite_set([1.0, 2.0])

    def logf(theta, X):
        p0 = 0.9 if theta[0] == 1.0 else 0.1
        return np.where(np.asarray(X)[:, 0] == 0.0, math.log(p0), math.log1p(-p0))

    model = CustomModel(logf, ObservationSpace.finite([0.0, 1.0]), name="TwoPoint")
    return EstimationProblem(space, model, FinitePmf(space, [0.5, 0.5]), name="Golden")


def finite_binomial_problem() -> EstimationProblem:
    space = ParameterSpace.finite_set([0.1, 0.3, 0.5, 0.7, 0.9])
    return EstimationProblem(space, BinomialN(10), FinitePmf(space, [0.1, 0.2, 0.3, 0.25, 0.15]),
                             name="FiniteBinomial")


def showcase_sample(n: int = 10, S: float = 18.0, mean: float = 0.3, seed: int = 1) -> np.ndarray:
    """n normal draws rescaled so the centred sum of squares is exactly S."""
    rng = np.random.default_rng(seed)
    x = rng.normal(mean, 1.4, n)
    x = x - x.mean()
    return mean + x * math.sqrt(S / float(np.sum(x * x)))


def wf_showcase(n: int = 10) -> EstimationProblem:
    s = _box([-2.0, 0.3], [2.6, 4.0])
    return EstimationProblem(s, GaussianMeanSigma(n), PowerLawSigma(s), name=f"GaussianMeanSigma({n}) 1/sigma")


# --------------------------------------------------------------------------
# audit battery


def param_battery() -> list:
    return [A.affine_param([2.0], [1.0]),
            A.cube_param(),
            A.custom_param(np.exp, np.log, lambda t: np.diag(np.exp(t)), "exp", coordinatewise=True)]


def obs_battery() -> list:
    return [A.affine_obs(2.0, 1.0), A.power3_obs(), A.piecewise_affine_obs(), A.cdf_obs()]


def noise_battery(problem) -> list:
    if problem.obs_space.is_finite:
        return ["BernoulliHalf", "Point"]
    return ["Uniform01", "Gauss01"]


def random_pairs(problem, n: int, seed: int) -> list:
    """Seeded distinct parameter pairs from the middle half of the box."""
    rng = np.random.default_rng(seed)
    lo, hi = problem.theta_space.lower_array, problem.theta_space.upper_array
    mid, half = 0.5 * (lo + hi), 0.25 * (hi - lo)
    pairs = []
    while len(pairs) < n:
        a = mid + half * rng.uniform(-1, 1, lo.shape)
        b = mid + half * rng.uniform(-1, 1, lo.shape)
        if np.max(np.abs(a - b)) > 0.05 * np.max(hi - lo):
            pairs.append((np.round(a, 6), np.round(b, 6)))
    return pairs


def random_penalty(seed: int, space):
    """Smooth positive penalty ``exp(sum a_k sin(k pi u + phi_k))`` on the box.

    ``u`` is the position rescaled to [0, 1] per axis; coefficients are drawn
    from ``default_rng(seed)`` so the function is reproducible.
    """
    rng = np.random.default_rng(seed)
    lo, hi = space.lower_array, space.upper_array
    a = rng.uniform(-0.5, 0.5, (3, space.dim))
    ph = rng.uniform(0.0, 2.0 * math.pi, (3, space.dim))
    k = np.arange(1, 4)[:, None]

    def g(t):
        u = (np.asarray(t, dtype=float).ravel() - lo) / (hi - lo)
        return math.exp(float(np.sum(a * np.sin(k * math.pi * u[None, :] + ph))))

    return g


def _row(loss, problem, axiom, item, dev):
    return {"loss": loss.name, "problem": problem.name, "axiom": axiom, "transform": item,
            "max_abs": dev.max_abs, "max_rel": dev.max_rel, "verdict": dev.verdict,
            "error": dev.error}


def audit_loss(loss, problem, pairs, axioms=("IRP", "IRO", "IIA", "ISI"), iia=None) -> list:
    """Run the fixed battery for one loss on one problem.

    ``iia`` is ``(problem_b, theta1, theta2)`` for the prior-alteration check;
    IIA is skipped without it.
    """
    rows = []
    if "IRP" in axioms:
        for T in param_battery():
            rows.append(_row(loss, problem, "IRP", T.name, A.check_irp(loss, problem, T, pairs)))
    if "IRO" in axioms:
        for G in obs_battery():
            rows.append(_row(loss, problem, "IRO", G.name, A.check_iro(loss, problem, G, pairs)))
    if "IIA" in axioms and iia is not None:
        other, t1, t2 = iia
        rows.append(_row(loss, problem, "IIA", "prior-alteration", A.check_iia(loss, problem, other, t1, t2)))
    if "ISI" in axioms:
        for noise in noise_battery(problem):
            rows.append(_row(loss, problem, "ISI", noise, A.check_isi(loss, problem, noise, pairs)))
    return rows


def _continuous_audit_problem():
    s = _box([-5.0], [5.0])
    return EstimationProblem(s, GaussianKnownSigma(1.0), GaussianParams(s, 0.0, 1.5), name="GaussianKnownSigma")


def _semicontinuous_audit_problem():
    s = _box([0.01], [0.99])
    return EstimationProblem(s, BinomialN(10), BetaParams(s, 2.0, 2.0), name="BinomialN(10)")


def _iia_witness(problem, t1, t2, add_at, remove_at, width, mass):
    other = A.alter_prior(problem, [t1, t2], add_at=add_at, remove_at=remove_at, width=width, mass=mass)
    return other, t1, t2


def audit_matrix(seed: int = 0, n_pairs: int = 3, n_mc: int = 20000) -> dict:
    """Audit the f-divergence suite and the four counterexample losses.

    Returns ``{"rows": [...], "matrix": {loss: {axiom: verdict}}, "designated": ...}``.
    Each counterexample is audited on the problem class of its witness and
    only on the axioms that class's characterisation uses.
    """
    cont = _continuous_audit_problem()
    semi = _semicontinuous_audit_problem()
    pairs_c = random_pairs(cont, n_pairs, seed)
    pairs_s = random_pairs(semi, n_pairs, seed + 1)
    iia_c = _iia_witness(cont, 0.0, 0.5, add_at=0.75, remove_at=-1.0, width=0.2, mass=0.02)
    iia_s = _iia_witness(semi, 0.3, 0.7, add_at=0.76, remove_at=0.5, width=0.03, mass=0.03)
    H = L.fdivergence("Hellinger2")
    rows = []
    plan = []
    for name in FDIV_SUITE:
        loss = L.fdivergence(name)
        plan.append((loss, cont, pairs_c, ("IRP", "IRO", "IIA", "ISI"), iia_c))
        plan.append((loss, semi, pairs_s, ("IRP", "IRO", "IIA", "ISI"), iia_s))
    plan.append((L.quadratic(), cont, pairs_c, ("IRP", "IRO", "IIA", "ISI"), iia_c))
    plan.append((L.no_iro(), cont, pairs_c, ("IRP", "IRO", "IIA"), iia_c))
    plan.append((L.no_iia(H, H, threshold=0.05, n_mc=n_mc, seed=seed), semi, pairs_s[:2],
                 ("IRP", "IRO", "IIA", "ISI"), iia_s))
    plan.append((L.no_isi(), semi, pairs_s, ("IRP", "IRO", "IIA", "ISI"), iia_s))
    for loss, prob, pairs, axioms, iia in plan:
        rows.extend(audit_loss(loss, prob, pairs, axioms, iia))
    matrix: dict = {}
    for r in rows:
        cell = matrix.setdefault(r["loss"], {}).setdefault(r["axiom"], [])
        cell.append(r["verdict"])
    order = {"fail": 2, "inconclusive": 1, "pass": 0}
    summary = {loss: {ax: max(v, key=order.__getitem__) for ax, v in axs.items()}
               for loss, axs in matrix.items()}
    designated = {"Quadratic": "IRP", "NoIRO": "IRO", "NoIIA": "IIA", "NoISI": "ISI"}
    return {"rows": rows, "matrix": summary, "designated": designated}


def matrix_as_designed(matrix: dict) -> dict:
    """Check the worst-verdict matrix against the designed outcome.

    The f-divergences must pass every audited axiom; each counterexample
    must fail its designated axiom and pass every other one it was audited on.
    """
    fdiv_ok = all(v == "pass" for g in FDIV_SUITE for v in matrix.get(g, {"": "missing"}).values())
    designated = {"Quadratic": "IRP", "NoIRO": "IRO", "NoISI": "ISI"}
    for name in matrix:
        if name.startswith("NoIIA"):
            designated[name] = "IIA"
    exact = {name: all((v == "fail") == (a == ax) and v in ("pass", "fail")
                       for a, v in matrix.get(name, {"": "missing"}).items())
             for name, ax in designated.items()}
    return {"fdiv_all_pass": fdiv_ok, "designated_only": exact,
            "pass": bool(fdiv_ok and all(exact.values()))}
