#!/usr/bin/env python3
"""Sweep the effective-Hamiltonian curve for a small generator zoo.

Computes alpha(c) for the pure twist and two standard-map strengths,
prints a table, and (with --out) writes a CSV.  The pure-twist column has
the closed form c^2/2, shown alongside as a sanity check.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from polykam import GridSpec, TwistGenerator, alpha_curve


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=128, help="grid resolution")
    ap.add_argument("--c-min", type=float, default=-1.0)
    ap.add_argument("--c-max", type=float, default=1.0)
    ap.add_argument("--steps", type=int, default=41)
    ap.add_argument("--out", type=Path, help="optional CSV output path")
    args = ap.parse_args()

    grid = GridSpec(args.n, 2)
    cs = np.linspace(args.c_min, args.c_max, args.steps)
    gens = {
        "pure_twist": TwistGenerator.pure_twist(),
        "standard_k0.5": TwistGenerator.standard(0.5),
        "standard_k2": TwistGenerator.standard(2.0),
    }
    columns = {label: alpha_curve(gen, cs, grid)[1] for label, gen in gens.items()}

    header = ["c", *columns, "pure_exact"]
    print("  ".join(f"{h:>14s}" for h in header))
    rows = []
    for i, c in enumerate(cs):
        row = [c, *(columns[label][i] for label in columns), c * c / 2]
        rows.append(row)
        print("  ".join(f"{v:14.8f}" for v in row))

    worst = float(np.max(np.abs(columns["pure_twist"] - cs**2 / 2)))
    print(f"\npure twist vs c^2/2: max deviation {worst:.3e}")

    if args.out:
        with args.out.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
