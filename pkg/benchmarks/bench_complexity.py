"""Separable cosine filtering vs the dense product-Laplacian path as the product grows.

    python benchmarks/bench_complexity.py [--max-side 64] [--k K]
"""

import argparse

import numpy as np

from sotpdeg.experiments import complexity_benchmark


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-side", type=int, default=64, help="largest factor size (dense path is O((side^2)^3))")
    ap.add_argument("--k", type=int, default=None, help="eigenpairs kept per factor")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    sides = [s for s in (8, 16, 32, 64, 128) if s <= args.max_side]
    rows = complexity_benchmark(sizes=[(s, s) for s in sides], k=args.k, seed=args.seed)
    print(f"{'N1 x N2':<10}{'prod N':>8}{'separable (ms)':>16}{'dense (ms)':>14}{'ratio':>9}")
    for r in rows:
        print(f"{'x'.join(map(str, r['ns'])):<10}{r['product_size']:>8}{r['separable_s'] * 1e3:>16.2f}"
              f"{r['dense_s'] * 1e3:>14.1f}{r['separable_s'] / r['dense_s']:>9.4f}")
    if len(rows) > 1:
        x = np.log([r["product_size"] for r in rows])
        for key in ("separable_s", "dense_s"):
            print(f"log-log slope {key[:-2]}: {np.polyfit(x, np.log([r[key] for r in rows]), 1)[0]:.2f}")


if __name__ == "__main__":
    main()
