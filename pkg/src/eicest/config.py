"""Run configuration: loading, defaults, validation and object construction.

Configs are YAML or JSON documents validated against
``schema/config.schema.json``.  ``resolve`` fills every default so that
reports can embed the exact configuration that produced them.
"""
from __future__ import annotations

import copy
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import losses as L
from .errors import ConfigError, EicError
from .estimators import EstimatorSpec
from .model import (
    Bernoulli,
    BetaParams,
    BinomialN,
    Categorical,
    EstimationProblem,
    ExponentialRate,
    FinitePmf,
    GaussianKnownSigma,
    GaussianMeanSigma,
    GaussianParams,
    IIDProduct,
    ParameterSpace,
    PowerLawSigma,
    UniformBox,
)
from .numerics.optimize import ArgmaxConfig

__all__ = [
    "SUPPORTED_SPEC_MAJOR",
    "schema",
    "load",
    "resolve",
    "apply_overrides",
    "build_problem",
    "build_loss",
    "build_estimator",
    "observations",
]

SUPPORTED_SPEC_MAJOR = 1

_DEFAULT_TOL = {
    "estimate": 1e-4,
    "compare": 1e-4,
    "verify-fisher": 1e-2,
    "verify-limit": 0.02,
    "verify-pmle": 1e-4,
    "audit-axioms": 1e-5,
    "c-function": 1e-2,
}


def schema() -> dict:
    text = resources.files("eicest").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def load(path) -> dict:
    """Parse a YAML/JSON config file (no validation)."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    data.setdefault("_base_dir", str(p.resolve().parent))
    return data


def _coerce(text: str):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``key=value`` overrides under ``numerics`` (dotted keys allowed).

    ``argmax.grid=64`` sets ``numerics.argmax.grid``; ``tolerance=1e-3``
    sets ``numerics.tolerance``.
    """
    out = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        node = out.setdefault("numerics", {})
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping")
        node[parts[-1]] = _coerce(value.strip())
    return out


def resolve(cfg: dict, seed: int | None = None) -> dict:
    """Validate and fill defaults; returns a new dict."""
    out = copy.deepcopy(cfg)
    base_dir = out.pop("_base_dir", None)
    if seed is not None:
        out["seed"] = int(seed)
    try:
        jsonschema.validate(out, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    major = int(out["spec_version"].split(".")[0])
    if major != SUPPORTED_SPEC_MAJOR:
        raise ConfigError(f"spec_version {out['spec_version']} is not supported")
    out.setdefault("seed", 0)
    out.setdefault("output", {})
    out["output"].setdefault("format", "json")
    num = out.setdefault("numerics", {})
    num.setdefault("tolerance", _DEFAULT_TOL[out["command"]])
    num.setdefault("rtol", 1e-10)
    num.setdefault("fisher_method", "Analytic")
    num.setdefault("hessian_step", None)
    am = num.setdefault("argmax", {})
    defaults = ArgmaxConfig()
    for key in ("grid", "max_grid_points", "top_k", "tie_tol", "maxiter"):
        am.setdefault(key, getattr(defaults, key))
    if "observations_file" in out:
        path = Path(out["observations_file"])
        if not path.is_absolute() and base_dir:
            path = Path(base_dir) / path
        out["observations"] = _read_batch(path)
        out["observations_file"] = str(path)
    cmd = out["command"]
    if cmd in ("estimate", "compare"):
        if "estimators" not in out:
            raise ConfigError(f"{cmd} needs an 'estimators' list")
        if not out.get("observations"):
            raise ConfigError(f"{cmd} needs observations")
        for est in out["estimators"]:
            if est["kind"] in ("Bayes", "EIC") and "loss" not in est:
                if "loss" not in out:
                    raise ConfigError(f"estimator {est['kind']} needs a loss")
                est["loss"] = copy.deepcopy(out["loss"])
            est.setdefault("extend_to_box", False)
    if cmd == "verify-fisher":
        if "losses" not in out:
            out["losses"] = [out["loss"]] if "loss" in out else [
                {"kind": "FDivergence", "generator": g} for g in ("Hellinger2", "KL", "ChiSquared")]
        if "thetas" not in out:
            raise ConfigError("verify-fisher needs 'thetas'")
    if cmd == "verify-limit":
        for key in ("theta1", "theta2"):
            if key not in out:
                raise ConfigError(f"verify-limit needs '{key}'")
        if not out.get("observations"):
            raise ConfigError("verify-limit needs one observation")
        out.setdefault("loss", {"kind": "Quadratic"})
        out.setdefault("eps", [1.0, 1e-1, 1e-2, 1e-3, 1e-4])
        out.setdefault("spectrum", {"family": "SmoothStep"})
    if cmd == "verify-pmle":
        if not out.get("observations"):
            raise ConfigError("verify-pmle needs observations")
        out.setdefault("penalties", 10)
        if "losses" not in out:
            out["losses"] = [{"kind": "FDivergence", "generator": g} for g in ("Hellinger2", "KL", "ChiSquared")]
    if cmd == "audit-axioms":
        audit = out.setdefault("audit", {})
        audit.setdefault("suite", False)
        audit.setdefault("axioms", ["IRP", "IRO", "IIA", "ISI"])
        audit.setdefault("pairs", 3)
        if not audit["suite"] and "losses" not in out:
            out["losses"] = [out["loss"]] if "loss" in out else [
                {"kind": "FDivergence", "generator": g} for g in ("Hellinger2", "KL", "ChiSquared")]
    if cmd == "c-function":
        for key in ("theta1", "theta2"):
            if key not in out:
                raise ConfigError(f"c-function needs '{key}'")
        out.setdefault("n_samples", 100_000)
        out.setdefault("t_grid", 64)
    for loss in out.get("losses", []) + ([out["loss"]] if "loss" in out else []):
        _fill_loss(loss)
    for est in out.get("estimators", []):
        if "loss" in est:
            _fill_loss(est["loss"])
    return out


def _fill_loss(d: dict) -> None:
    if d["kind"] in ("FDivergence", "NoIIA"):
        d.setdefault("generator", "Hellinger2")
    if d["kind"] == "NoIIA":
        d.setdefault("threshold", 0.05)
        d.setdefault("n_mc", 20000)


def _read_batch(path: Path) -> list:
    """One observation per line; whitespace or comma separated; '#' comments."""
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read observations file {path}: {exc}") from exc
    rows = []
    for i, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(v) for v in line.replace(",", " ").split()])
        except ValueError:
            raise ConfigError(f"{path}:{i}: not a list of numbers") from None
    if not rows:
        raise ConfigError(f"observations file {path} is empty")
    return rows


def _vec(v, dim):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    return np.broadcast_to(a, (dim,)).copy() if a.size == 1 else a


def build_problem(d: dict) -> EstimationProblem:
    ts = d["theta_space"]
    try:
        if ts["kind"] == "FiniteSet":
            if "points" not in ts:
                raise ConfigError("FiniteSet theta_space needs 'points'")
            space = ParameterSpace.finite_set(ts["points"])
        else:
            if "lower" not in ts or "upper" not in ts:
                raise ConfigError("Box theta_space needs 'lower' and 'upper'")
            space = ParameterSpace.box(ts["lower"], ts["upper"])
        m = d["model"]
        fam = m["family"]
        if fam == "Bernoulli":
            model = Bernoulli()
        elif fam == "BinomialN":
            model = BinomialN(m.get("n", 1))
        elif fam == "Categorical":
            model = Categorical(m.get("k", 2))
        elif fam == "GaussianKnownSigma":
            model = GaussianKnownSigma(m.get("sigma", 1.0))
        elif fam == "GaussianMeanSigma":
            model = GaussianMeanSigma(m.get("n", 1))
        else:
            model = ExponentialRate()
        if m.get("iid", 1) > 1:
            model = IIDProduct(model, m["iid"])
        p = d["prior"]
        kind = p["kind"]
        if kind == "FinitePmf":
            prior = FinitePmf(space, p["masses"])
        elif kind == "UniformBox":
            prior = UniformBox(space)
        elif kind == "BetaParams":
            prior = BetaParams(space, _vec(p.get("a", 1.0), space.dim), _vec(p.get("b", 1.0), space.dim))
        elif kind == "GaussianParams":
            prior = GaussianParams(space, _vec(p.get("mean", 0.0), space.dim), _vec(p.get("sd", 1.0), space.dim))
        else:
            prior = PowerLawSigma(space, p.get("axis", -1))
        return EstimationProblem(space, model, prior, name=d.get("name", fam))
    except ConfigError:
        raise
    except EicError as exc:
        raise ConfigError(f"problem does not build: {exc}") from exc


def build_loss(d: dict) -> L.LossSpec:
    kind = d["kind"]
    if kind == "Quadratic":
        return L.quadratic()
    if kind == "FDivergence":
        return L.fdivergence(d.get("generator", "Hellinger2"))
    if kind == "Bhattacharyya":
        return L.bhattacharyya()
    if kind == "NoIRO":
        return L.no_iro()
    if kind == "NoISI":
        return L.no_isi()
    inner = L.fdivergence(d.get("generator", "Hellinger2"))
    return L.no_iia(inner, inner, d.get("threshold", 0.05), d.get("n_mc", 20000), d.get("seed", 0))


def argmax_config(num: dict) -> ArgmaxConfig:
    return ArgmaxConfig().replace(**num.get("argmax", {}))


def build_estimator(d: dict, num: dict) -> EstimatorSpec:
    loss = build_loss(d["loss"]) if "loss" in d else None
    try:
        return EstimatorSpec(d["kind"], loss=loss, fisher_method=num.get("fisher_method", "Analytic"),
                             step=num.get("hessian_step"), argmax=argmax_config(num),
                             extend_to_box=d.get("extend_to_box", False), name=d.get("name"))
    except EicError as exc:
        raise ConfigError(str(exc)) from exc


def observations(cfg: dict) -> list:
    return [list(map(float, x)) for x in cfg.get("observations", [])]


def finite_or_str(v):
    return v if math.isfinite(v) else repr(v)
