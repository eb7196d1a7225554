"""Truncation sweep of the two-asset model with escaping dual mass.

Writes a CSV (metadata line, header, one row per N) and prints the limits.
"""

import argparse

from solvency.cli import csv_metadata, write_csv_atomic
from solvency.primal_dual import singular_limits, singular_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--N", default="10,20,40,80")
    ap.add_argument("--mode", choices=["renormalize", "lumped"], default="renormalize")
    ap.add_argument("--out", default="singular_sweep.csv")
    args = ap.parse_args()

    rows = singular_sweep(args.alpha, [int(n) for n in args.N.split(",")], mode=args.mode)
    records = [r.as_record() for r in rows]
    write_csv_atomic(args.out, records, csv_metadata(0, alpha=args.alpha, mode=args.mode))
    for r in rows:
        print(f"N={r.N:4d} theta={r.theta:.6f} u={r.u:.10f} mass={r.mass_total[0]:.6f} head={r.head_mass:.6f} deficit={r.deficit:.6f}")
    lim = singular_limits(args.alpha)
    print(f"limits: value {lim['value']:.10f}, countably additive mass {lim['countably_additive_mass']:.4f}, deficit {lim['deficit']:.4f}")


if __name__ == "__main__":
    main()
