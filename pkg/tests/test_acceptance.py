"""Acceptance criteria, one recorded pass/fail line each.

Tolerances are pinned here as module constants.
"""

import time

import numpy as np
import pytest

from solvency.cone_algebra import BidAskMatrix, solvency_cone
from solvency.duality_engine import ConicProgram, verify_gap
from solvency.liquidation import composed_optimizer, solve_liquidation_formulation
from solvency.market import attainable_check, bid_ask_around, nonstrict_example_tree
from solvency.primal_dual import (
    nonstrict_closed_form,
    nonstrict_grid,
    nonstrict_utility,
    random_instance,
    random_utility,
    recover_primal,
    singular_limits,
    singular_sweep,
    solve_dual,
    solve_primal,
    supergradient_probe,
)
from solvency.utility import UtilitySpec, check_growth, check_mvra, numeric_conjugate

GRID_TOL, GRID_SECONDS = 1e-5, 10.0
GAP_REL_TOL = 1e-5
RECOVERY_TOL, NONCONSUMPTION_TOL = 1e-4, 1e-6
SUPERGRADIENT_SLACK = 1e-6
LIQ_VALUE_TOL, LIQ_OPT_TOL = 1e-5, 1e-4
DENSITY_REL, DENSITY_DRIFT = 0.10, 0.05
DEFICIT_LIMIT, DEFICIT_BAND = 0.35, 0.05
MASS_FD_TOL, SWEEP_SECONDS = 0.02, 60.0
CONJ_TOL, FENCHEL_TOL = 1e-6, 1e-8
HARNESS_GAP_TOL = 1e-5

N_TREES, N_ENDOW = 50, 3
N_PAIRS, N_PAIR_TREES = 100, 10
N_LIQ = 30
SEED = 2024


def test_c1_nonstrict_example(criterion):
    tree = nonstrict_example_tree()
    grid = nonstrict_grid(50, seed=SEED)
    t0 = time.perf_counter()
    worst = max(abs(solve_primal(tree, nonstrict_utility(c), x).value - nonstrict_closed_form(c, x)) for c, x in grid)
    elapsed = time.perf_counter() - t0
    ok = len(grid) == 100 and worst <= GRID_TOL and elapsed <= GRID_SECONDS
    criterion("C1 constant-spread example grid", ok, f"max error {worst:.2e} (tol {GRID_TOL:g}), {elapsed:.1f}s (limit {GRID_SECONDS:g}s)")
    assert ok


@pytest.fixture(scope="module")
def battery():
    rng = np.random.default_rng(SEED)
    rows = []
    for k in range(N_TREES):
        inst = random_instance(rng, n_endowments=N_ENDOW)
        for x in inst.endowments:
            P = solve_primal(inst.tree, inst.U, x)
            Q = solve_dual(inst.tree, inst.U, x)
            rows.append(
                {
                    "tree": k,
                    "inst": inst,
                    "x": x,
                    "primal": P,
                    "dual": Q,
                }
            )
    return rows


def test_c2_zero_duality_gap(battery, criterion):
    gaps = [abs(r["dual"].value - r["primal"].value) / (1 + abs(r["primal"].value)) for r in battery]
    Ds = {r["inst"].tree.D for r in battery}
    ok = max(gaps) <= GAP_REL_TOL and len(battery) == N_TREES * N_ENDOW
    criterion("C2 zero duality gap", ok, f"{len(battery)} solves over D in {sorted(Ds)}, worst relative gap {max(gaps):.2e} (tol {GAP_REL_TOL:g})")
    assert ok


def test_c3_primal_recovery(battery, criterion):
    rec, nc = 0.0, 0.0
    for r in battery:
        d = r["inst"].U.d
        X = r["primal"].X
        rec = max(rec, float(np.max(np.abs(recover_primal(r["dual"].measure, r["inst"].U) - X))))
        if d < X.shape[1]:
            nc = max(nc, float(np.max(np.abs(X[:, d:]))))
    ok = rec <= RECOVERY_TOL and nc <= NONCONSUMPTION_TOL
    criterion("C3 primal recovery", ok, f"sup-norm {rec:.2e} (tol {RECOVERY_TOL:g}), non-consumption holdings {nc:.2e} (tol {NONCONSUMPTION_TOL:g})")
    assert ok


def test_c4_supergradient(battery, criterion):
    worst = -np.inf
    for r in battery:
        pr = supergradient_probe(r["inst"].tree, r["inst"].U, r["x"], dual=r["dual"])
        worst = max(worst, pr.worst_excess)
    ok = worst <= SUPERGRADIENT_SLACK
    criterion("C4 supergradient inequality", ok, f"worst u(z) - u(x) - <z - x, m> = {worst:.2e} (slack {SUPERGRADIENT_SLACK:g})")
    assert ok


def test_c5_super_replication(criterion):
    rng = np.random.default_rng(SEED + 5)
    disagreements, attainable, total = 0, 0, 0
    for _ in range(N_PAIR_TREES):
        tree = random_instance(rng, n_endowments=1).tree
        L, D = len(tree.leaves), tree.D
        for _ in range(N_PAIRS):
            X = rng.uniform(0, 2, (L, D)) * (rng.random((L, D)) < 0.7)
            x = rng.uniform(-0.5, 2.5, D)
            rep = attainable_check(tree, x, X, strict=False)
            disagreements += not rep.routes_agree
            attainable += rep.attainable
            total += 1
    ok = disagreements == 0
    criterion("C5 super-replication routes agree", ok, f"{disagreements} disagreements over {total} pairs ({attainable} attainable)")
    assert ok


def test_c6_liquidation(criterion):
    rng = np.random.default_rng(SEED + 6)
    worst_v, worst_x = 0.0, 0.0
    for _ in range(N_LIQ):
        inst = random_instance(rng, n_endowments=1)
        U = random_utility(rng, 1)
        x = inst.endowments[0]
        P = solve_primal(inst.tree, U, x)
        res = solve_liquidation_formulation(inst.tree, U, x)
        worst_v = max(worst_v, abs(res.value - P.value))
        worst_x = max(worst_x, float(np.max(np.abs(composed_optimizer(res, inst.tree.D) - P.X))))
    ok = worst_v <= LIQ_VALUE_TOL and worst_x <= LIQ_OPT_TOL
    criterion("C6 liquidation equivalence", ok, f"value diff {worst_v:.2e} (tol {LIQ_VALUE_TOL:g}), optimizer diff {worst_x:.2e} (tol {LIQ_OPT_TOL:g})")
    assert ok


@pytest.fixture(scope="module")
def sweep():
    t0 = time.perf_counter()
    rows = singular_sweep(0.1, (10, 20, 40))
    return rows, time.perf_counter() - t0


S_HEAD = np.array([2.0] + [1.0 / n for n in range(1, 6)])


def test_c7a_stock_weight(sweep, criterion):
    rows, _ = sweep
    thetas = [r.theta for r in rows]
    ok = all(t > 1 for t in thetas)
    criterion("C7a stock weight above one", ok, "theta = " + ", ".join(f"{t:.6f}" for t in thetas))
    assert ok


def test_c7b_head_densities_at_40(sweep, criterion):
    rows, _ = sweep
    rel = np.abs(rows[2].densities[:6] * S_HEAD - 1)
    ok = bool(np.all(rel <= DENSITY_REL))
    criterion("C7b densities within 10% of 1/s_n at N=40", ok, "relative error n=0..5: " + ", ".join(f"{v:.3f}" for v in rel))
    assert ok


def test_c7c_head_density_drift(sweep, criterion):
    rows, _ = sweep
    a, b = rows[1].densities[:6], rows[2].densities[:6]
    drift = np.abs(b - a) / np.abs(b)
    ok = bool(np.all(drift < DENSITY_DRIFT))
    criterion("C7c density change N=20 to N=40 below 5%", ok, "change n=0..5: " + ", ".join(f"{v:.3f}" for v in drift))
    assert ok


def test_c7d_deficit(sweep, criterion):
    rows, _ = sweep
    lim = singular_limits(0.1)["deficit"]
    deficit = rows[2].deficit
    ok = abs(lim - DEFICIT_LIMIT) <= 1e-12 and abs(deficit - DEFICIT_LIMIT) <= DEFICIT_BAND
    criterion("C7d head-mass deficit at N=40", ok, f"{deficit:.4f} vs limit {lim:.4f} (band {DEFICIT_BAND:g})")
    assert ok


def test_c7e_mass_matches_derivative(sweep, criterion):
    rows, elapsed = sweep
    diffs = [abs(r.mass_total[0] - r.fd_derivative) for r in rows]
    ok = max(diffs) <= MASS_FD_TOL and elapsed <= SWEEP_SECONDS
    criterion("C7e total mass vs finite-difference derivative", ok, f"max diff {max(diffs):.2e} (tol {MASS_FD_TOL:g}), sweep {elapsed:.1f}s (limit {SWEEP_SECONDS:g}s)")
    assert ok


FAMILIES = {
    "additive-log": UtilitySpec.log(2, alpha=(1.0, 0.6), c0=0.5),
    "additive-power": UtilitySpec.power((0.5, -1.0), alpha=(1.0, 2.0)),
    "mixed-additive": UtilitySpec.mixed((0.0, 0.3, -0.5), alpha=(1.0, 0.5, 1.5)),
}


def test_c8_utility_properties(criterion):
    rng = np.random.default_rng(SEED + 8)
    growth_log = check_growth(UtilitySpec.log(2, c0=1.0)).verdict
    growth_mixed = check_growth(UtilitySpec.mixed((0.5, -1.0))).verdict
    mvra = {k: check_mvra(U).verdict for k, U in FAMILIES.items()}
    mvra_cd = check_mvra(UtilitySpec.cobb_douglas((0.3, 0.3))).verdict
    conj_err, fy_err = 0.0, 0.0
    for U in FAMILIES.values():
        for _ in range(50):
            y = np.exp(rng.uniform(-1.5, 1.5, U.d))
            conj_err = max(conj_err, abs(U.conjugate(y) - numeric_conjugate(U, y)[0]))
        for _ in range(20):
            y = np.exp(rng.uniform(-2, 2, U.d))
            xi = U.inverse_marginal(y)
            fy_err = max(fy_err, abs(U.value(xi) - U.conjugate(y) - xi @ y))
    ok = (
        growth_log == "pass"
        and growth_mixed == "fail"
        and all(v == "pass" for v in mvra.values())
        and mvra_cd == "fail"
        and conj_err <= CONJ_TOL
        and fy_err <= FENCHEL_TOL
    )
    criterion(
        "C8 utility property suite",
        ok,
        f"growth log {growth_log}, mixed {growth_mixed}; mvra additive {sorted(set(mvra.values()))}, Cobb-Douglas {mvra_cd}; "
        f"conjugate error {conj_err:.1e} (tol {CONJ_TOL:g}); Fenchel-Young {fy_err:.1e} (tol {FENCHEL_TOL:g})",
    )
    assert ok


def test_c9_lagrange_harness(criterion):
    rng = np.random.default_rng(SEED + 9)
    worst = 0.0
    for _ in range(30):
        D = int(rng.integers(2, 4))
        K = solvency_cone(BidAskMatrix(bid_ask_around(rng.lognormal(0, 0.4, D), rng))).generators
        U = random_utility(rng, D)
        rep = verify_gap(ConicProgram.from_utility(U, generators=-K, shift=rng.uniform(0.2, 2, D)), tol=HARNESS_GAP_TOL)
        worst = max(worst, abs(rep.gap) if rep.status == "ok" else np.inf)
    degenerate = verify_gap(ConicProgram.from_utility(UtilitySpec.log(1), generators=np.array([[-1.0]]), shift=[0.0]))
    both_inf = degenerate.status == "degenerate" and degenerate.primal_value == -np.inf and degenerate.dual_value == -np.inf
    ok = worst <= HARNESS_GAP_TOL and both_inf
    criterion("C9 Lagrange harness", ok, f"worst part-1 gap {worst:.2e} (tol {HARNESS_GAP_TOL:g}); degenerate instance primal {degenerate.primal_value}, dual {degenerate.dual_value}")
    assert ok
