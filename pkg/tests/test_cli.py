import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from eicest import cli
from eicest import config as C
from eicest.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def _bernoulli_estimate(**extra):
    cfg = {
        "spec_version": "1.0",
        "command": "estimate",
        "problem": {
            "theta_space": {"kind": "Box", "lower": [0.01], "upper": [0.99]},
            "model": {"family": "BinomialN", "n": 10},
            "prior": {"kind": "BetaParams", "a": 2.0, "b": 2.0},
        },
        "estimators": [{"kind": "CMAP"}, {"kind": "WF"}],
        "observations": [[7]],
    }
    cfg.update(extra)
    return cfg


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    raw = C.load(path)
    if path.name.startswith("broken"):
        with pytest.raises(ConfigError):
            C.resolve(raw)
    else:
        cfg = C.resolve(raw)
        assert cfg["command"] in cli.COMMANDS


def test_compare_exit_ok(tmp_path):
    out = tmp_path / "cmp.json"
    assert cli.main(["--config", str(CONFIGS / "compare_gaussian_mean.yaml"), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["verdicts"]["pass"] is True
    assert set(rep) == {"command", "config", "values", "verdicts"}
    assert (tmp_path / "cmp.json.meta.json").exists()


def test_estimate_binomial_values(tmp_path):
    out = tmp_path / "est.json"
    assert cli.main(["--config", str(CONFIGS / "estimate_binomial.yaml"), "--out", str(out)]) == 0
    recs = json.loads(out.read_text())["values"]["records"]
    first = {r["estimator"]: r["points"][0][0] for r in recs if r["observation_index"] == 0}
    # x = 7 of 10 with Beta(2, 2): mode 8/12, WF (7.5 + 1)/(10 + 3), posterior mean 9/14
    assert first["CMAP"] == pytest.approx(8 / 12, abs=1e-6)
    assert first["WF"] == pytest.approx(8.5 / 13, abs=1e-6)
    assert first["Bayes(Quadratic)"] == pytest.approx(9 / 14, abs=1e-6)


def test_verify_fisher_gamma(tmp_path):
    out = tmp_path / "vf.json"
    assert cli.main(["--config", str(CONFIGS / "verify_fisher_bernoulli.yaml"), "--out", str(out)]) == 0
    recs = json.loads(out.read_text())["values"]["records"]
    for r in recs:
        assert r["gamma_hat"] == pytest.approx(1.0, rel=1e-5)


def test_broken_config_exit_2(tmp_path, capsys):
    out = tmp_path / "never.json"
    code = cli.main(["--config", str(CONFIGS / "broken_missing_family.yaml"), "--out", str(out)])
    assert code == 2
    assert not out.exists()
    diag = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert diag["exit_code"] == 2


def test_numeric_error_exit_3(tmp_path, capsys):
    cfg = yaml.safe_load((CONFIGS / "verify_fisher_bernoulli.yaml").read_text())
    cfg["thetas"] = [[0.5], [1.7]]  # outside the parameter box
    out = tmp_path / "num.json"
    code = cli.main(["--config", str(_write(tmp_path, cfg)), "--out", str(out)])
    assert code == 3
    rep = json.loads(out.read_text())
    diag = rep["verdicts"]["diagnostic"]
    assert diag["operation"] == "eicest.model.check"
    assert rep["verdicts"]["pass"] is False


def test_check_failure_exit_1(tmp_path):
    cfg = {
        "spec_version": "1.0",
        "command": "audit-axioms",
        "problem": {
            "theta_space": {"kind": "Box", "lower": [-5.0], "upper": [5.0]},
            "model": {"family": "GaussianKnownSigma", "sigma": 1.0},
            "prior": {"kind": "UniformBox"},
        },
        "losses": [{"kind": "Quadratic"}],
        "audit": {"axioms": ["IRP"], "pairs": 2},
    }
    assert cli.main(["--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "a.json")]) == 1


def test_missing_config_file(tmp_path):
    assert cli.main(["--config", str(tmp_path / "nope.yaml")]) == 2


def test_bad_seed(tmp_path):
    assert cli.main(["--config", str(_write(tmp_path, _bernoulli_estimate())), "--seed", "-1"]) == 2


def test_tol_override(tmp_path):
    out = tmp_path / "o.json"
    p = _write(tmp_path, _bernoulli_estimate())
    assert cli.main(["--config", str(p), "--out", str(out), "--tol-override", "argmax.grid=64"]) == 0
    assert json.loads(out.read_text())["config"]["numerics"]["argmax"]["grid"] == 64
    assert cli.main(["--config", str(p), "--tol-override", "nonsense"]) == 2


def test_seed_recorded(tmp_path):
    out = tmp_path / "s.json"
    p = _write(tmp_path, _bernoulli_estimate())
    assert cli.main(["--config", str(p), "--out", str(out), "--seed", "12345"]) == 0
    assert json.loads(out.read_text())["config"]["seed"] == 12345


def test_deterministic_reports(tmp_path):
    p = _write(tmp_path, _bernoulli_estimate())
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli.main(["--config", str(p), "--out", str(a)])
    cli.main(["--config", str(p), "--out", str(b)])
    ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
    ja["config"]["output"].pop("path")
    jb["config"]["output"].pop("path")
    assert ja == jb


def test_csv_sidecars(tmp_path):
    out = tmp_path / "c.csv"
    assert cli.main(["--config", str(CONFIGS / "c_function_gaussian.yaml"), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 33  # header plus 32 grid points
    verdicts = (tmp_path / "c.csv.verdicts.csv").read_text().splitlines()
    assert verdicts[1].split(",")[0] == "overall"
    assert json.loads((tmp_path / "c.csv.config.json").read_text())["command"] == "c-function"


def test_command_override(tmp_path):
    out = tmp_path / "x.json"
    p = _write(tmp_path, _bernoulli_estimate())
    assert cli.main(["--config", str(p), "--command", "compare", "--out", str(out)]) in (0, 1)
    assert json.loads(out.read_text())["command"] == "compare"


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "eicest.cli", "--config",
                        str(CONFIGS / "broken_missing_family.yaml")], capture_output=True, text=True)
    assert r.returncode == 2
