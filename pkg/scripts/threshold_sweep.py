#!/usr/bin/env python3
"""Collision fractions across an (N, M) grid for one mixing kind.

Example:
    python scripts/threshold_sweep.py --kind special-orthogonal \
        --n 4 6 8 10 --m 1 2 3 --seeds 10 --out sweep.csv
"""

import argparse

from momentlab.injectivity import SWEEP_CSV_HEADER, threshold_sweep
from momentlab.priors import random_relu_network
from momentlab.runner import write_csv
from pathlib import Path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--kind", default="special-orthogonal",
                    choices=["general-linear", "special-orthogonal"])
    ap.add_argument("--n", type=int, nargs="+", default=[4, 6, 8, 10, 12])
    ap.add_argument("--m", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--restarts", type=int, default=50)
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args()

    family = lambda N, M, seed: random_relu_network((M, M + 6, N), seed=seed)
    result = threshold_sweep(
        family, args.n, args.m, args.kind, range(args.seeds), restarts=args.restarts
    )
    write_csv(Path(args.out), SWEEP_CSV_HEADER, result.rows)
    for cell in result.cells:
        print(
            f"N={cell.N:3d} M={cell.M:2d} {cell.regime:16s} "
            f"collision fraction {cell.collisions_found_fraction:.2f}"
        )


if __name__ == "__main__":
    main()
