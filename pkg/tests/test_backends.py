import json
import os
import subprocess
import sys

import numpy as np
import pytest

from eicest import _kernels as K
from eicest._kernels import _pykernels as py

c = pytest.importorskip("eicest._kernels._ckernels")

GENS = [K.GEN_HELLINGER2, K.GEN_KL, K.GEN_CHI2, K.GEN_MASS]
CASES = [
    (py.FAM_NORMAL, (0.0, 1.0), (0.5, 1.2)),
    (py.FAM_NORMAL, (2.0, 0.7), (1.7, 0.9)),
    (py.FAM_GAMMA, (3.0, 1.5), (3.0, 2.0)),
    (py.FAM_NORMAL_IID, (0.1, 0.9, 5.0), (0.3, 1.1, 5.0)),
]


@pytest.mark.parametrize("gen", GENS)
@pytest.mark.parametrize("family,pa,pb", CASES)
def test_kernel_agreement(family, pa, pb, gen):
    vc, _, _, kc = c.fdiv_kernel(family, pa, pb, gen, 1e-10)
    vp, _, _, kp = py.fdiv_kernel(family, pa, pb, gen, 1e-10)
    assert kc == kp == 0
    assert vc == pytest.approx(vp, rel=1e-8, abs=1e-14)


@pytest.mark.parametrize("gen", GENS)
@pytest.mark.parametrize("family,pa,pb", CASES)
def test_rule_agreement(family, pa, pb, gen):
    args = [family, pa, pb, gen]
    x1, lw1 = K.hermite_rule(32)
    x2 = lw2 = np.zeros(0)
    if family == py.FAM_GAMMA:
        x1, lw1 = K.gamma_rule(32, pa[0])
    elif family == py.FAM_NORMAL_IID:
        u, lw2 = K.gamma_rule(32, 0.5 * (pa[2] - 1.0))
        x2 = np.ascontiguousarray(2.0 * u)
    rc = c.fdiv_rule(*args, x1, lw1, x2, lw2)
    rp = py.fdiv_rule(*args, x1, lw1, x2, lw2)
    assert rc == pytest.approx(rp, rel=1e-12, abs=1e-15)


def test_mass_generator_is_one():
    for family, pa, pb in CASES:
        v, *_ = c.fdiv_kernel(family, pa, pb, K.GEN_MASS, 1e-10)
        assert v == pytest.approx(1.0, abs=1e-8)


_SNIPPET = """
import json
from eicest import losses as L, suite, BACKEND
p = suite.gaussian_mean_problem()
vals = [L.loss_value(L.fdivergence(g), p, [0.3], [1.1]) for g in ("Hellinger2", "KL", "ChiSquared")]
print(json.dumps({"backend": BACKEND, "vals": vals}))
"""


def _run(pure):
    env = dict(os.environ)
    env.pop("EICEST_PURE_PYTHON", None)
    if pure:
        env["EICEST_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", _SNIPPET], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_env_selects_backend_and_values_agree():
    a, b = _run(False), _run(True)
    assert a["backend"] == "cython"
    assert b["backend"] == "python"
    np.testing.assert_allclose(a["vals"], b["vals"], rtol=1e-9)
