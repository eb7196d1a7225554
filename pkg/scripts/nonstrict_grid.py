"""Numeric value function of the constant-spread market against its closed forms."""

import argparse

from solvency.market import nonstrict_example_tree
from solvency.primal_dual import nonstrict_closed_form, nonstrict_grid, nonstrict_utility, solve_primal


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=50, help="grid points per case")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    tree = nonstrict_example_tree()
    print("case,x1,x2,numeric,closed_form,error")
    for case, x in nonstrict_grid(args.points, args.seed):
        u = solve_primal(tree, nonstrict_utility(case), x).value
        cf = nonstrict_closed_form(case, x)
        print(f"{case},{x[0]:.6f},{x[1]:.6f},{u:.12f},{cf:.12f},{abs(u - cf):.2e}")


if __name__ == "__main__":
    main()
