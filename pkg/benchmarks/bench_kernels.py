"""Compare the compiled and numpy kernel backends.

Times the raw kernels on d=500 vectors and a full fixed-step run on the
cyclic rotation instance, each backend in a fresh interpreter so the
import-time selection is exercised.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys

_CHILD = r"""
import json, timeit
import numpy as np
from fplab import kernels
from fplab.core import CountedOperator
from fplab.operators import make_rotation_hard
from fplab.solvers import SolverConfig, fixhal

rng = np.random.default_rng(0)
a, b = rng.standard_normal(500), rng.standard_normal(500)
k = kernels
cases = {
    "combine": lambda: k.combine(a, b, 0.3),
    "dist_l2": lambda: k.dist_l2(a, b),
    "rotation_hard": lambda: k.rotation_hard(a, 1.0, 0.1, False),
    "piecewise_slope": lambda: k.piecewise_slope(a, 1.0, 0.5, False),
}
out = {"backend": k.backend()}
for name, fn in cases.items():
    out[name] = min(timeit.repeat(fn, number=20000, repeat=REPEAT)) / 20000
spec = make_rotation_hard(500, 1.0)
def run():
    fixhal(CountedOperator(spec), np.zeros(500), 1e-3, SolverConfig(target_eps=1e-12, max_queries=10000))
out["fixhal_10k"] = min(timeit.repeat(run, number=1, repeat=REPEAT))
print(json.dumps(out))
"""


def measure(backend, repeat):
    env = dict(os.environ)
    env.pop("FPLAB_PURE_PYTHON", None)
    if backend == "python":
        env["FPLAB_PURE_PYTHON"] = "1"
    proc = subprocess.run([sys.executable, "-c", _CHILD.replace("REPEAT", str(repeat))],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    py = measure("python", args.repeat)
    cy = measure("cython", args.repeat)
    if cy["backend"] != "cython":
        print("compiled extension not built; only the numpy backend is available")
    print(f"{'case':<16}{'numpy':>12}{cy['backend']:>12}{'speedup':>10}")
    for key in py:
        if key == "backend":
            continue
        unit, scale = ("s", 1.0) if key == "fixhal_10k" else ("us", 1e6)
        print(f"{key:<16}{py[key] * scale:>10.3f}{unit:>2}{cy[key] * scale:>10.3f}{unit:>2}"
              f"{py[key] / cy[key]:>9.2f}x")


if __name__ == "__main__":
    main()
