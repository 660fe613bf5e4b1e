"""Command-line front end.

``eicest --config run.yaml [--command NAME] [--out PATH] [--format csv|json]
[--seed N] [--tol-override key=value ...]``

Exit codes: 0 all checks within tolerance, 1 a check failed, 2 the
configuration is invalid (no report is written), 3 a numeric error (the
report carries a diagnostic record naming the failing operation).
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from itertools import combinations
from pathlib import Path

import numpy as np

from . import axioms as A
from . import config as C
from . import suite
from .errors import ConfigError, EicError
from .estimators import EstimatorSpec, estimate, loss_to_penalty, pmle_to_loss
from .numerics.fisher import fisher_information
from .numerics.hessian import hessian_at_diagonal
from .report import write_meta, write_report
from .risk import make_spectrum, utility_ratio_curve

__all__ = ["main", "run", "COMMANDS"]

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _estimates(cfg, problem):
    num = cfg["numerics"]
    specs = [C.build_estimator(e, num) for e in cfg["estimators"]]
    out = []
    for spec in specs:
        for i, x in enumerate(C.observations(cfg)):
            out.append((spec, i, x, estimate(spec, problem, x)))
    return out


def _record(spec, i, x, res):
    d = res.as_dict()
    return {"estimator": spec.label, "observation_index": i, "observation": x,
            "points": d["points"], "values": d["values"], "tie_tolerance": d["tie_tolerance"],
            "boundary_maximum": bool(res.diagnostics.get("boundary_maximum", False)),
            "evaluations": res.diagnostics.get("evaluations")}


def cmd_estimate(cfg, problem):
    rows = [_record(*item) for item in _estimates(cfg, problem)]
    return {"records": rows}, {"pass": True, "checks": []}


def cmd_compare(cfg, problem):
    items = _estimates(cfg, problem)
    rows = [_record(*item) for item in items]
    tol = cfg["numerics"]["tolerance"]
    by_obs: dict = {}
    for spec, i, _x, res in items:
        by_obs.setdefault(i, []).append((spec.label, res))
    dists, checks = [], []
    for i in sorted(by_obs):
        for (la, ra), (lb, rb) in combinations(by_obs[i], 2):
            d = ra.distance_to(rb)
            dists.append({"observation_index": i, "a": la, "b": lb, "distance": d})
            checks.append({"check": f"obs{i}:{la}~{lb}", "value": d, "pass": d < tol})
    worst = max((r["distance"] for r in dists), default=0.0)
    values = {"records": rows, "distances": dists, "max_distance": worst}
    return values, {"pass": all(c["pass"] for c in checks), "tolerance": tol, "checks": checks}


def cmd_verify_fisher(cfg, problem):
    tol = cfg["numerics"]["tolerance"]
    method = cfg["numerics"]["fisher_method"]
    step = cfg["numerics"]["hessian_step"]
    rows, checks = [], []
    for ld in cfg["losses"]:
        loss = C.build_loss(ld)
        gen = getattr(loss, "generator", None)
        gamma = gen.gamma if gen is not None else None
        for t in cfg["thetas"]:
            t = np.atleast_1d(np.asarray(t, dtype=float))
            H = hessian_at_diagonal(loss, problem, t, step).array
            info = fisher_information(problem, t, method).array
            # least-squares scale of I onto H
            g_hat = float(np.sum(H * info) / np.sum(info * info))
            row = {"loss": loss.name, "theta": t.tolist(), "H": H.tolist(), "I": info.tolist(),
                   "gamma_hat": g_hat}
            if gamma is not None:
                target = gamma * info
                dev = float(np.max(np.abs(H - target)) / max(np.max(np.abs(target)), 1e-300))
                row.update(gamma=gamma, gamma_I=target.tolist(), max_rel_dev=dev)
                ok = dev < tol and abs(g_hat - gamma) <= tol * gamma
            else:
                # no generator: only proportionality is testable
                resid = H - g_hat * info
                dev = float(np.max(np.abs(resid)) / max(np.max(np.abs(H)), 1e-300))
                row.update(max_rel_dev=dev)
                ok = dev < tol
            rows.append(row)
            checks.append({"check": f"{loss.name}@{t.tolist()}", "value": dev, "pass": bool(ok)})
    worst = max((r["max_rel_dev"] for r in rows), default=0.0)
    values = {"records": rows, "max_rel_dev": worst}
    return values, {"pass": all(c["pass"] for c in checks), "tolerance": tol, "checks": checks}


def cmd_verify_limit(cfg, problem):
    tol = cfg["numerics"]["tolerance"]
    sp = cfg["spectrum"]
    spectrum = make_spectrum(sp["family"], v_max=sp.get("v_max", 1.0), k=sp.get("k", 5.0))
    loss = C.build_loss(cfg["loss"])
    x = C.observations(cfg)[0]
    curve = utility_ratio_curve(problem, loss, spectrum, x, cfg["theta1"], cfg["theta2"],
                                cfg["eps"], cfg["numerics"]["rtol"])
    final = curve.final_rel_error()
    values = {"records": curve.records, "predicted": curve.predicted,
              "min_stable_eps": curve.min_stable_eps, "final_rel_error": final}
    checks = [{"check": "final_rel_error", "value": final, "pass": final < tol}]
    return values, {"pass": checks[0]["pass"], "tolerance": tol, "checks": checks}


def cmd_verify_pmle(cfg, problem):
    tol = cfg["numerics"]["tolerance"]
    if problem.theta_space.kind != "Box":
        raise ConfigError("verify-pmle needs a Box parameter space")
    am = C.argmax_config(cfg["numerics"])
    seed = cfg["seed"]
    rows = []
    for i, x in enumerate(C.observations(cfg)):
        for k in range(cfg["penalties"]):
            g = suite.random_penalty(seed * 1000 + k, problem.theta_space)
            a = estimate(EstimatorSpec("EIC", pmle_to_loss(g, problem), argmax=am), problem, x)
            b = estimate(EstimatorSpec("PMLE", penalty=g, argmax=am), problem, x)
            rows.append({"direction": "penalty->loss", "observation_index": i, "penalty": k,
                         "eic": a.as_dict()["points"], "pmle": b.as_dict()["points"],
                         "distance": a.distance_to(b)})
        for ld in cfg["losses"]:
            loss = C.build_loss(ld)
            a = estimate(EstimatorSpec("PMLE", penalty=loss_to_penalty(loss, problem), argmax=am), problem, x)
            b = estimate(EstimatorSpec("EIC", loss, argmax=am), problem, x)
            rows.append({"direction": "loss->penalty", "observation_index": i, "loss": loss.name,
                         "pmle": a.as_dict()["points"], "eic": b.as_dict()["points"],
                         "distance": a.distance_to(b)})
    checks = [{"check": f"{r['direction']}:{r.get('penalty', r.get('loss'))}:obs{r['observation_index']}",
               "value": r["distance"], "pass": r["distance"] < tol} for r in rows]
    values = {"records": rows, "max_distance": max(r["distance"] for r in rows)}
    return values, {"pass": all(c["pass"] for c in checks), "tolerance": tol, "checks": checks}


def cmd_audit_axioms(cfg, problem):
    audit = cfg["audit"]
    seed = cfg["seed"]
    if audit["suite"]:
        res = suite.audit_matrix(seed, n_pairs=audit["pairs"])
        shape = suite.matrix_as_designed(res["matrix"])
        values = {"records": res["rows"]}
        checks = [{"check": f"{r['loss']}:{r['axiom']}:{r['transform']}", "verdict": r["verdict"],
                   "max_rel": r["max_rel"]} for r in res["rows"]]
        return values, {"pass": shape["pass"], "matrix": res["matrix"], "designated": res["designated"],
                        "fdiv_all_pass": shape["fdiv_all_pass"], "designated_only": shape["designated_only"],
                        "pass_below": A.PASS_TOL, "fail_above": A.FAIL_TOL, "checks": checks}
    if "pairs" in cfg:
        pairs = [tuple(np.atleast_1d(np.asarray(t, dtype=float)) for t in pr) for pr in cfg["pairs"]]
    else:
        pairs = suite.random_pairs(problem, audit["pairs"], seed)
    iia = None
    if "IIA" in audit["axioms"] and "iia" in audit:
        w = audit["iia"]
        other = A.alter_prior(problem, [w["theta1"], w["theta2"]], add_at=w["add_at"],
                              remove_at=w["remove_at"], width=w.get("width", 0.05), mass=w.get("mass", 0.02))
        iia = (other, w["theta1"], w["theta2"])
    rows = []
    for ld in cfg["losses"]:
        rows.extend(suite.audit_loss(C.build_loss(ld), problem, pairs, tuple(audit["axioms"]), iia))
    checks = [{"check": f"{r['loss']}:{r['axiom']}:{r['transform']}", "verdict": r["verdict"],
               "max_rel": r["max_rel"], "pass": r["verdict"] == "pass"} for r in rows]
    return {"records": rows}, {"pass": all(c["pass"] for c in checks), "pass_below": A.PASS_TOL,
                               "fail_above": A.FAIL_TOL, "checks": checks}


def cmd_c_function(cfg, problem):
    tol = cfg["numerics"]["tolerance"]
    c = A.c_function(problem, cfg["theta1"], cfg["theta2"], cfg["n_samples"], cfg["seed"])
    n = cfg["t_grid"]
    t = (np.arange(n) + 0.5) / n
    vals = np.asarray(A.c_eval(c, t), dtype=float)
    integral = c.integral()
    rows = [{"t": float(a), "c": float(b)} for a, b in zip(t, vals)]
    values = {"records": rows, "kind": c.kind, "integral": integral,
              "nondecreasing": bool(np.all(np.diff(vals) >= 0))}
    checks = [{"check": "unit_integral", "value": abs(integral - 1.0), "pass": abs(integral - 1.0) < tol},
              {"check": "nondecreasing", "pass": values["nondecreasing"]}]
    return values, {"pass": all(ch["pass"] for ch in checks), "tolerance": tol, "checks": checks}


COMMANDS = {
    "estimate": cmd_estimate,
    "compare": cmd_compare,
    "verify-fisher": cmd_verify_fisher,
    "verify-limit": cmd_verify_limit,
    "verify-pmle": cmd_verify_pmle,
    "audit-axioms": cmd_audit_axioms,
    "c-function": cmd_c_function,
}


def run(cfg: dict) -> tuple:
    """Execute a resolved config; returns ``(values, verdicts)``."""
    problem = C.build_problem(cfg["problem"])
    return COMMANDS[cfg["command"]](cfg, problem)


def _failing_operation(exc: BaseException) -> str:
    """Innermost package frame of the traceback, as ``module.function``."""
    name = "eicest.cli.run"
    for fr in traceback.extract_tb(exc.__traceback__):
        path = Path(fr.filename)
        if "eicest" in path.parts:
            mod = ".".join(path.parts[path.parts.index("eicest"):]).removesuffix(".py")
            name = f"{mod}.{fr.name}"
    return name


def _diagnostic(exc: BaseException, code: int) -> dict:
    return {"exit_code": code, "error": type(exc).__name__, "message": str(exc),
            "operation": _failing_operation(exc)}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eicest", description="EIC estimation and verification harness")
    ap.add_argument("--config", required=True, help="YAML or JSON run configuration")
    ap.add_argument("--command", choices=sorted(COMMANDS), help="override the config's command")
    ap.add_argument("--out", help="report path (overrides output.path)")
    ap.add_argument("--format", choices=("json", "csv"), help="override output.format")
    ap.add_argument("--seed", type=int, help="override the config's seed")
    ap.add_argument("--tol-override", action="append", default=[], metavar="KEY=VALUE",
                    help="numerics override, e.g. tolerance=1e-3 or argmax.grid=64 (repeatable)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = C.load(args.config)
        if args.command:
            raw["command"] = args.command
        raw = C.apply_overrides(raw, args.tol_override)
        if args.format:
            raw.setdefault("output", {})["format"] = args.format
        if args.out:
            raw.setdefault("output", {})["path"] = args.out
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = C.resolve(raw, args.seed)
        # numeric tolerances are validated lazily by the estimators; catch bad keys here
        C.argmax_config(cfg["numerics"])
    except (ConfigError, TypeError) as exc:
        print(json.dumps(_diagnostic(exc, EXIT_CONFIG)), file=sys.stderr)
        return EXIT_CONFIG
    out = cfg["output"].get("path")
    fmt = cfg["output"]["format"]
    t0 = time.perf_counter()
    try:
        values, verdicts = run(cfg)
    except ConfigError as exc:
        print(json.dumps(_diagnostic(exc, EXIT_CONFIG)), file=sys.stderr)
        return EXIT_CONFIG
    except (EicError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        diag = _diagnostic(exc, EXIT_NUMERIC)
        print(json.dumps(diag), file=sys.stderr)
        if out:
            write_report(out, cfg["command"], cfg, {"records": []},
                         {"pass": False, "diagnostic": diag, "checks": []}, fmt)
            write_meta(out, seed=cfg["seed"], elapsed=time.perf_counter() - t0)
        return EXIT_NUMERIC
    elapsed = time.perf_counter() - t0
    code = EXIT_OK if verdicts["pass"] else EXIT_CHECK
    if out:
        write_report(out, cfg["command"], cfg, values, verdicts, fmt)
        write_meta(out, seed=cfg["seed"], elapsed=elapsed, exit_code=code)
    _summary(cfg["command"], values, verdicts)
    return code


def _summary(command, values, verdicts) -> None:
    """Human-readable table on stdout."""
    print(f"{command}: {'PASS' if verdicts['pass'] else 'FAIL'}")
    for ch in verdicts.get("checks", [])[:50]:
        mark = ch.get("verdict") or ("pass" if ch.get("pass") else "fail")
        val = ch.get("value", ch.get("max_rel"))
        val = f"{val:.3e}" if isinstance(val, float) else ""
        print(f"  {mark:<12} {val:>11}  {ch['check']}")
    if command == "estimate":
        for r in values["records"]:
            pts = "; ".join(", ".join(f"{v:.8g}" for v in p) for p in r["points"])
            print(f"  {r['estimator']:<22} x[{r['observation_index']}] -> {pts}")


if __name__ == "__main__":
    sys.exit(main())
