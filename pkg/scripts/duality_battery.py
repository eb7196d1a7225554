"""Paired primal/dual solves on random trees: gap, recovery, supergradient."""

import argparse
import time

import numpy as np

from solvency.primal_dual import random_instance, recover_primal, solve_dual, solve_primal, supergradient_probe


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trees", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    worst = {"gap": 0.0, "recovery": 0.0, "non_consumption": 0.0, "supergradient": -np.inf}
    t0 = time.perf_counter()
    for k in range(args.trees):
        inst = random_instance(rng)
        d = inst.U.d
        for x in inst.endowments:
            P = solve_primal(inst.tree, inst.U, x)
            Q = solve_dual(inst.tree, inst.U, x)
            worst["gap"] = max(worst["gap"], abs(Q.value - P.value) / (1 + abs(P.value)))
            worst["recovery"] = max(worst["recovery"], float(np.max(np.abs(recover_primal(Q.measure, inst.U) - P.X))))
            if d < inst.tree.D:
                worst["non_consumption"] = max(worst["non_consumption"], float(np.max(P.X[:, d:])))
            worst["supergradient"] = max(worst["supergradient"], supergradient_probe(inst.tree, inst.U, x, dual=Q).worst_excess)
        print(f"tree {k}: D={inst.tree.D} d={d} {inst.U.family} leaves={len(inst.tree.leaves)}")
    for key, v in worst.items():
        print(f"worst {key}: {v:.3e}")
    print(f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
