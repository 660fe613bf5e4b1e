"""One test per acceptance criterion, tolerances pinned here.

The criteria are computed once per session by ``eicest.acceptance.run``;
each test re-judges the recorded values against its own constants rather
than trusting the harness verdict, and checks the runtime budget.
"""
import subprocess
import sys

import pytest

from eicest import acceptance

BUDGET = {1: 60.0, 2: 120.0, 3: 30.0, 4: 120.0, 5: 120.0, 6: 1.0, 7: 180.0, 8: 60.0, 9: 30.0}


@pytest.fixture(scope="module")
def results():
    return acceptance.run(seed=0)


def _report(k, ok):
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}")
    assert ok


def _timed(results, k):
    return results[2][k] < BUDGET[k]


def test_criterion_1_hessian_fisher(results):
    v = results[0][1]
    assert len(v["rows"]) == 3 * 5 * 10
    ok = all(r["dev"] < 1e-2 for r in v["rows"]) and _timed(results, 1)
    _report(1, ok)


def test_criterion_2_eic_equals_wf(results):
    v = results[0][2]
    classes = {}
    for r in v["rows"]:
        classes.setdefault(r["class"], set()).add(r["problem"])
    assert len(classes.get("Continuous", ())) == 3 and len(classes.get("SemiContinuous", ())) == 2
    assert len(v["rows"]) == 25
    ok = all(r["distance"] < 1e-4 for r in v["rows"]) and _timed(results, 2)
    _report(2, ok)


def test_criterion_3_map_limits(results):
    v = results[0][3]
    discrete = [r for r in v["rows"] if "dmap" in r]
    cont = [r for r in v["rows"] if "cmap" in r]
    ok = (all(r["eic"] == r["dmap"] for r in discrete)
          and all(r["distance"] < 1e-4 for r in cont) and _timed(results, 3))
    _report(3, ok)


def test_criterion_4_pmle_span(results):
    v = results[0][4]
    fwd = [r for r in v["rows"] if r["direction"] == "penalty->loss"]
    back = [r for r in v["rows"] if r["direction"] == "loss->penalty"]
    assert len(fwd) == 10 and len(back) == 3
    ok = all(r["distance"] < 1e-4 for r in fwd + back) and _timed(results, 4)
    _report(4, ok)


def test_criterion_5_limit(results):
    v = results[0][5]
    last = v["abs_errors"][-3:]
    ok = (len(last) == 3 and last[0] > last[1] > last[2]
          and v["final_rel_error"] < 0.02 and _timed(results, 5))
    _report(5, ok)


def test_criterion_6_golden(results):
    v = results[0][6]
    ok = (abs(v["bayes"] - 1.1) <= 1e-6 and abs(v["expected_loss"] - 0.09) <= 1e-6
          and v["dmap"] == [[1.0]] and _timed(results, 6))
    _report(6, ok)


def test_criterion_7_axiom_matrix(results):
    v = results[0][7]
    rows = v["rows"]
    designated = {"Quadratic": "IRP", "NoIRO": "IRO", "NoISI": "ISI"}
    ok = True
    for r in rows:
        name = r["loss"]
        target = "IIA" if name.startswith("NoIIA") else designated.get(name)
        if target is None or r["axiom"] != target:
            ok &= r["max_rel"] < 1e-5
    for name, ax in list(designated.items()) + [("NoIIA", "IIA")]:
        dev = [r["max_rel"] for r in rows if r["loss"].startswith(name) and r["axiom"] == ax]
        ok &= bool(dev) and max(dev) > 1e-2
    ok &= all(abs(x - 0.25) <= 1e-6 for x in v["noisi_ratios"])
    ok &= _timed(results, 7)
    _report(7, ok)


def test_criterion_8_c_determinism(results):
    v = results[0][8]
    assert len(v["rows"]) == 3
    ok = all(abs(r["rearranged"] - r["oracle"]) < 1e-3 and abs(r["direct"] - r["oracle"]) < 1e-3
             and r["monotone"] for r in v["rows"]) and _timed(results, 8)
    _report(8, ok)


def test_criterion_9_wf_showcase(results):
    v = results[0][9]
    ok = (v["rel_err_wf"] < 1e-3 and v["rel_err_cmap"] < 1e-3
          and abs(v["stationary_wf"] - v["closed_wf"]) < 1e-9
          and abs(v["stationary_cmap"] - v["closed_cmap"]) < 1e-9
          and _timed(results, 9))
    _report(9, ok)


def test_criterion_10_determinism(results, tmp_path):
    out = tmp_path / "values.json"
    subprocess.run([sys.executable, "-m", "eicest.acceptance", "--seed", "0", "--out", str(out)],
                   check=False, capture_output=True, text=True)
    ok = out.read_bytes() == acceptance.dumps(results[0]).encode()
    _report(10, ok)
