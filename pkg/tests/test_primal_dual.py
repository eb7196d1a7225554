import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from solvency.cone_algebra import cone_contains
from solvency.market import attainable_check, interior_margin, nonstrict_example_tree, random_martingale_tree, singular_example_tree
from solvency.primal_dual import (
    DualMeasure,
    RecoveryError,
    nonstrict_closed_form,
    nonstrict_grid,
    random_instance,
    recover_primal,
    singular_limits,
    singular_sweep,
    solve_dual,
    solve_primal,
    supergradient_probe,
    value_conjugate,
    variational_check,
)
from solvency.utility import UtilitySpec

TREE = nonstrict_example_tree()
LOG2 = UtilitySpec.log(2)
LOG1 = UtilitySpec.log(1)


class TestPrimal:
    def test_no_trade_region(self):
        sol = solve_primal(TREE, LOG2, [1, 1])
        assert sol.value == pytest.approx(0.0, abs=1e-9)
        assert np.allclose(sol.X, [[1, 1]], atol=1e-9)

    def test_exchange_region(self):
        sol = solve_primal(TREE, LOG2, [0, 1])
        assert sol.value == pytest.approx(-3 * np.log(2), abs=1e-9)
        assert np.allclose(sol.X, [[0.25, 0.5]], atol=1e-8)

    def test_single_good(self):
        sol = solve_primal(TREE, LOG1, [1, 0])
        assert sol.value == pytest.approx(0.0, abs=1e-9)
        assert np.allclose(sol.X, [[1, 0]], atol=1e-8)

    def test_outside_support(self):
        sol = solve_primal(TREE, LOG2, [-1, 0.5])
        assert sol.value == -np.inf and sol.status != "optimal"

    def test_witness_process(self):
        sol = solve_primal(TREE, LOG2, [0, 1])
        assert sol.process.is_self_financing()
        assert np.allclose(sol.process.terminal_values(), sol.X, atol=1e-9)
        assert attainable_check(TREE, [0, 1], np.maximum(sol.X, 0) * (1 - 1e-9)).attainable

    def test_grid_matches_closed_form(self):
        for case, x in nonstrict_grid(30, seed=1):
            U = LOG2 if case == 1 else LOG1
            assert solve_primal(TREE, U, x).value == pytest.approx(nonstrict_closed_form(case, x), abs=1e-7)

    def test_monotone_along_support_cone(self, rng):
        tree, _ = random_martingale_tree(rng, 2, 1, 2)
        x = np.array([1.0, 1.0])
        u0 = solve_primal(tree, LOG2, x).value
        for _ in range(5):
            w = rng.uniform(0, 0.5, 2)
            assert solve_primal(tree, LOG2, x + w).value >= u0 - 1e-8


class TestDual:
    def test_no_trade_region(self):
        d = solve_dual(TREE, LOG2, [1, 1])
        assert d.value == pytest.approx(0.0, abs=1e-9)
        assert np.allclose(d.measure.density(), [[1, 1]], atol=1e-8)

    def test_single_good(self):
        d = solve_dual(TREE, LOG1, [1, 0])
        assert d.value == pytest.approx(0.0, abs=1e-9)
        assert d.measure.density()[0, 0] == pytest.approx(1.0, abs=1e-7)

    def test_truncated_singular_densities(self):
        N = 20
        tree = singular_example_tree(0.1, N)
        d = solve_dual(tree, LOG1, [1, 0])
        (row,) = singular_sweep(0.1, (N,))
        s = np.array([2.0] + [1.0 / n for n in range(1, N + 1)])
        th = row.theta
        dens = d.measure.density()[:, 0]
        # marginal utility of wealth 1 - theta + theta s_n (the tail wealth cancels, so compare the head)
        assert np.allclose(dens[:11], 1 / (1 - th + th * s[:11]), rtol=1e-6)
        assert np.all(np.abs(dens[:3] * s[:3] - 1) <= 0.1)
        assert d.value == pytest.approx(row.u, abs=1e-8)

    def test_outside_support_diverges(self):
        d = solve_dual(TREE, LOG2, [-1, 0.5])
        assert d.value == -np.inf
        seq = np.array(d.sequence)
        assert np.all(np.diff(seq[-5:]) < 0)

    def test_density_uniqueness_across_restarts(self):
        inst = random_instance(np.random.default_rng(4))
        x = inst.endowments[0]
        base = solve_dual(inst.tree, inst.U, x).measure.density()[:, : inst.U.d]
        for seed in range(5):
            other = solve_dual(inst.tree, inst.U, x, seed=seed).measure.density()[:, : inst.U.d]
            assert np.max(np.abs(other - base)) <= 1e-6
            assert np.all(other > 0)

    def test_dual_feasibility(self):
        inst = random_instance(np.random.default_rng(5))
        d = solve_dual(inst.tree, inst.U, inst.endowments[0])
        atoms = d.measure.atoms
        leaves = inst.tree.leaves
        idx = {l.id: k for k, l in enumerate(leaves)}
        for n in inst.tree.nodes:
            under = [idx[l.id] for l in leaves if n.id in inst.tree.path(l.id)]
            z = atoms[under].sum(axis=0)
            assert np.all(inst.tree.trading_generators(n.id) @ z >= -1e-8)


class TestRecovery:
    def test_no_trade(self):
        m = DualMeasure(np.array([[1.0, 1.0]]), np.array([1.0]))
        assert np.allclose(recover_primal(m, LOG2), [[1, 1]])

    def test_liquidated_coordinate(self):
        m = DualMeasure(np.array([[1.0, 0.7]]), np.array([1.0]))
        assert np.allclose(recover_primal(m, LOG1), [[1, 0]])

    def test_zero_density_rejected(self):
        m = DualMeasure(np.array([[0.0, 1.0]]), np.array([1.0]))
        with pytest.raises(RecoveryError):
            recover_primal(m, LOG1)

    @settings(max_examples=8, deadline=None)
    @given(st.integers(0, 10**6))
    def test_random_instances(self, seed):
        inst = random_instance(np.random.default_rng(seed), n_endowments=1)
        x = inst.endowments[0]
        P = solve_primal(inst.tree, inst.U, x)
        Q = solve_dual(inst.tree, inst.U, x)
        assert abs(P.value - Q.value) <= 1e-5 * (1 + abs(P.value))
        assert np.max(np.abs(recover_primal(Q.measure, inst.U) - P.X)) <= 1e-4
        if inst.U.d < inst.tree.D:
            assert np.max(P.X[:, inst.U.d :]) <= 1e-6


class TestProbe:
    def test_smooth_point(self):
        pr = supergradient_probe(TREE, LOG2, [1, 1])
        assert pr.holds()
        assert np.allclose(pr.supergradient, [1, 1], atol=1e-7)

    def test_kink(self):
        pr = supergradient_probe(TREE, LOG1, [1, 0])
        assert pr.holds()
        m = pr.supergradient
        # convex combination of (1, 1/2) and (1, 2)
        assert m[0] == pytest.approx(1.0, abs=1e-7)
        assert 0.5 - 1e-7 <= m[1] <= 2 + 1e-7

    def test_singular_mass_tends_to_one(self):
        rows = singular_sweep(0.1, (10, 20))
        for r in rows:
            assert np.allclose(r.mass_total, [1, 1], atol=1e-3)


class TestConjugateAndVariational:
    def test_value_conjugate(self):
        assert value_conjugate(TREE, LOG2, [1, 1]) == pytest.approx(-2.0, abs=1e-8)

    def test_value_conjugate_against_grid(self):
        # sup_x u(x) - <x, x*> over a grid of the closed form
        xs = np.linspace(0.05, 4, 400)
        g = max(nonstrict_closed_form(1, (a, b)) - a * 1.2 - b * 0.9 for a in xs for b in xs)
        assert value_conjugate(TREE, LOG2, [1.2, 0.9]) == pytest.approx(g, abs=1e-3)

    def test_value_conjugate_infinite(self):
        assert value_conjugate(TREE, LOG2, [-0.5, 1]) == np.inf
        assert value_conjugate(TREE, LOG2, [0, 0]) == np.inf

    def test_variational_equality(self):
        rep = variational_check(TREE, LOG2, [1, 1])
        assert rep.passed()

    def test_variational_random_tree(self):
        inst = random_instance(np.random.default_rng(9), n_endowments=1)
        assert variational_check(inst.tree, inst.U, inst.endowments[0]).passed()

    def test_zero_claim(self):
        m = solve_dual(TREE, LOG2, [1, 1]).measure
        assert m(np.zeros(2)) == 0.0 and m([0.5, 0.2]) >= 0


class TestSweep:
    def test_limits(self):
        lim = singular_limits(0.1)
        assert lim["countably_additive_mass"] == pytest.approx(0.65)
        assert lim["deficit"] == pytest.approx(0.35)
        n = np.arange(1, 2000)
        assert lim["value"] == pytest.approx(0.9 * np.log(2) - 0.1 * np.sum(2.0**-n * np.log(n)), abs=1e-14)

    def test_value_against_brute_force(self):
        # u_N(1, 0) = max over stock weight theta of E ln(1 - theta + theta s_n)
        from scipy.optimize import minimize_scalar

        from solvency.market import singular_example_probs, singular_stock_values

        for N in (10, 20):
            (r,) = singular_sweep(0.1, (N,), h=1e-5)
            s = singular_stock_values(N)
            p = singular_example_probs(0.1, N)
            f = lambda th: -np.sum(p * np.log(1 - th + th * s))
            best = minimize_scalar(f, bounds=(0, 1 / (1 - s.min()) - 1e-12), method="bounded", options={"xatol": 1e-12})
            assert r.u == pytest.approx(-best.fun, abs=1e-8)
            assert r.theta == pytest.approx(best.x, abs=1e-5)

    def test_record_columns(self):
        (r,) = singular_sweep(0.1, (10,))
        rec = r.as_record()
        for col in ("N", "theta", "u_N", "mass_total_1", "head_mass_M5", "deficit"):
            assert col in rec
