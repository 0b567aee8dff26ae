"""Compiled vs pure-Python kernel timings.

Each backend runs in its own interpreter (``SOTPDEG_PURE_PYTHON`` is read at
import), and the script prints one table row per kernel and size.

    python benchmarks/bench_kernels.py [--repeats 5] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from sotpdeg import kernels
from sotpdeg.sampling import random_graph

rng = np.random.default_rng(0)
repeats = int(sys.argv[1])
rows = []

def best(fn):
    return min(timeit.repeat(fn, number=1, repeat=repeats))

for P, n in ((2, 64), (3, 16), (4, 8), (5, 6)):
    lams = [rng.uniform(0, 4, n) for _ in range(P)]
    c, s = [np.cos(l) for l in lams], [np.sin(l) for l in lams]
    rows.append({"kernel": "separable_cos_sin", "size": f"P={P} n={n}", "seconds": best(lambda: kernels.separable_cos_sin(c, s))})
    rows.append({"kernel": "kron_sum", "size": f"P={P} n={n}", "seconds": best(lambda: kernels.kron_sum(lams))})
for n in (64, 256, 1024):
    g = random_graph(rng, n, density=0.05)
    X = rng.standard_normal((n, 8))
    rows.append({"kernel": "dirichlet_edge_energy", "size": f"n={n} F=8", "seconds": best(lambda: kernels.dirichlet_edge_energy(g.adjacency, X))})
print(json.dumps({"backend": kernels.BACKEND, "rows": rows}))
"""


def run_backend(pure: bool, repeats: int) -> dict:
    env = dict(os.environ, SOTPDEG_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeats)], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--json", help="also write the raw timings here")
    args = ap.parse_args(argv)

    compiled = run_backend(False, args.repeats)
    fallback = run_backend(True, args.repeats)
    if compiled["backend"] != "cython":
        print("compiled extension not built; both columns use the numpy fallback", file=sys.stderr)
    print(f"{'kernel':<24}{'size':<14}{'cython (ms)':>13}{'python (ms)':>13}{'speedup':>9}")
    for a, b in zip(compiled["rows"], fallback["rows"]):
        print(f"{a['kernel']:<24}{a['size']:<14}{a['seconds'] * 1e3:>13.3f}{b['seconds'] * 1e3:>13.3f}{b['seconds'] / a['seconds']:>8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"compiled": compiled, "fallback": fallback}, fh, indent=2)


if __name__ == "__main__":
    main()
