"""Compiled versus pure-Python f-divergence kernels.

Times the two kernel entry points directly, then one EIC estimate (whose
argmax evaluates a finite-difference loss Hessian at every candidate) with
each backend selected through ``EICEST_PURE_PYTHON`` in a fresh process.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from eicest import _kernels as K
from eicest._kernels import _pykernels as py

try:
    from eicest._kernels import _ckernels as cy
except ImportError:  # pragma: no cover
    cy = None

CASES = {
    "normal": (py.FAM_NORMAL, (0.0, 1.0), (0.5, 1.2)),
    "gamma": (py.FAM_GAMMA, (3.0, 1.5), (3.0, 2.0)),
    "normal-iid(5)": (py.FAM_NORMAL_IID, (0.1, 0.9, 5.0), (0.3, 1.1, 5.0)),
}

_E2E = """
import json, time
from eicest import BACKEND, losses as L, suite
from eicest.estimators import EstimatorSpec, estimate
cases = suite.eic_wf_cases()
p, xs = cases[0]
t0 = time.perf_counter()
estimate(EstimatorSpec("EIC", L.fdivergence("Hellinger2")), p, xs[0])
print(json.dumps({"backend": BACKEND, "problem": p.name, "seconds": time.perf_counter() - t0}))
"""


def _rule_args(family, pa):
    x1, lw1 = K.hermite_rule(48)
    x2 = lw2 = np.zeros(0)
    if family == py.FAM_GAMMA:
        x1, lw1 = K.gamma_rule(48, pa[0])
    elif family == py.FAM_NORMAL_IID:
        u, lw2 = K.gamma_rule(48, 0.5 * (pa[2] - 1.0))
        x2 = np.ascontiguousarray(2.0 * u)
    return x1, lw1, x2, lw2


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_kernels(repeat):
    rows = []
    for name, (fam, pa, pb) in CASES.items():
        rargs = _rule_args(fam, pa)
        for label, mod in (("python", py), ("cython", cy)):
            if mod is None:
                continue
            number = 3 if fam == py.FAM_NORMAL_IID and mod is py else 20
            t_kernel = _best(lambda: mod.fdiv_kernel(fam, pa, pb, K.GEN_HELLINGER2, 1e-10), repeat, number)
            t_rule = _best(lambda: mod.fdiv_rule(fam, pa, pb, K.GEN_HELLINGER2, *rargs), repeat, 50)
            rows.append((name, label, t_kernel, t_rule))
    return rows


def bench_end_to_end():
    out = []
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("EICEST_PURE_PYTHON", None)
        if pure:
            env["EICEST_PURE_PYTHON"] = "1"
        r = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, text=True, check=True)
        out.append(json.loads(r.stdout.strip().splitlines()[-1]))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args(argv)
    rows = bench_kernels(args.repeat)
    print(f"{'case':<15}{'backend':<9}{'adaptive (ms)':>15}{'rule (us)':>12}")
    for name, label, tk, tr in rows:
        print(f"{name:<15}{label:<9}{tk * 1e3:>15.3f}{tr * 1e6:>12.1f}")
    by = {(n, b): (tk, tr) for n, b, tk, tr in rows}
    for name in CASES:
        if (name, "cython") in by:
            (pk, pr), (ck, cr) = by[(name, "python")], by[(name, "cython")]
            print(f"speed-up {name:<15} adaptive x{pk / ck:.1f}  rule x{pr / cr:.1f}")
    if not args.skip_e2e:
        for r in bench_end_to_end():
            print(f"EIC estimate on {r['problem']} with {r['backend']}: {r['seconds']:.2f} s")


if __name__ == "__main__":
    main()
