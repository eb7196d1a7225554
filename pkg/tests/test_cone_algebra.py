import numpy as np
import pytest
from hypothesis import given, strategies as st

from solvency.cone_algebra import (
    BidAskMatrix,
    InvalidBidAsk,
    StructuralError,
    check_bid_ask,
    cone_contains,
    interior_contains,
    polar_cone,
    solvency_cone,
    validate_bid_ask,
)
from solvency.market import bid_ask_around

SPREAD = [[1.0, 2.0], [2.0, 1.0]]


def random_pi(seed, D):
    rng = np.random.default_rng(seed)
    S = rng.lognormal(0.0, 0.5, D)
    return BidAskMatrix(bid_ask_around(S, rng))


def as_set(rows):
    return {tuple(np.round(r, 12)) for r in np.asarray(rows)}


class TestValidate:
    def test_unit_rates_valid(self):
        assert validate_bid_ask(np.ones((2, 2))).dim == 2

    def test_spread_valid(self):
        pi = validate_bid_ask(SPREAD)
        assert np.array_equal(pi.entries, np.array(SPREAD))

    def test_triangle_violation(self):
        with pytest.raises(InvalidBidAsk) as err:
            validate_bid_ask([[1, 5, 1], [1, 1, 1], [1, 1, 1]])
        found = {(v.condition, v.indices) for v in err.value.violations}
        assert ("iii", (1, 2, 3)) in found

    def test_profitable_round_trip(self):
        # 1 <= pi12 * pi21 fails
        with pytest.raises(InvalidBidAsk) as err:
            validate_bid_ask([[1, 2], [0.4, 1]])
        assert ("iii", (1, 1, 2)) in {(v.condition, v.indices) for v in err.value.violations}

    def test_bad_diagonal(self):
        viol = check_bid_ask([[1.1, 2], [2, 1]])
        assert any(v.condition == "ii" for v in viol)

    @pytest.mark.parametrize(
        "entries",
        [[[1, 2, 3]], [[1, -2], [2, 1]], [[1, 0], [2, 1]], [[1, np.nan], [2, 1]], [[1]]],
    )
    def test_structural_errors(self, entries):
        with pytest.raises(StructuralError):
            check_bid_ask(entries)

    @given(st.integers(0, 10**6), st.integers(2, 5))
    def test_generated_matrices_valid(self, seed, D):
        assert check_bid_ask(random_pi(seed, D).entries) == []

    def test_frictionless_valid(self):
        pi = BidAskMatrix.frictionless([1.0, 2.0, 0.5])
        assert check_bid_ask(pi.entries) == []


class TestCones:
    def test_spread_generators(self):
        K = solvency_cone(BidAskMatrix(np.array(SPREAD)))
        assert as_set(K.generators) == {(1, 0), (0, 1), (2, -1), (-1, 2)}

    def test_unit_rates_generators(self):
        K = solvency_cone(BidAskMatrix(np.ones((2, 2))))
        assert as_set(K.generators) == {(1, 0), (0, 1), (1, -1), (-1, 1)}

    @pytest.mark.parametrize("D", [2, 3])
    def test_unit_rates_cone_is_halfspace(self, D, rng):
        gens = solvency_cone(BidAskMatrix(np.ones((D, D)))).generators
        for _ in range(60):
            x = rng.normal(size=D)
            if abs(x.sum()) < 1e-3:
                continue
            assert cone_contains(gens, x).member == (x.sum() > 0)

    @given(st.integers(0, 10**6), st.integers(2, 5))
    def test_generator_count_and_orthant(self, seed, D):
        K = solvency_cone(random_pi(seed, D))
        assert len(K.generators) == D + D * (D - 1)
        for i in range(D):
            assert any(np.array_equal(g, np.eye(D)[i]) for g in K.generators)

    def test_polar_halfspaces(self):
        K = solvency_cone(BidAskMatrix(np.array(SPREAD)))
        P = polar_cone(K)
        assert as_set(P.halfspaces) == as_set(K.generators)
        assert P.contains([1, 2]) and P.contains([2, 1]) and P.contains([1, 1])
        assert not P.contains([1, 2.1]) and not P.contains([2.1, 1])

    def test_orthant_self_dual(self, rng):
        from solvency.cone_algebra import PolarCone

        P = PolarCone(np.eye(3))
        for _ in range(20):
            w = rng.normal(size=3)
            assert P.contains(w) == bool(np.all(w >= 0))

    def test_halfplane_polar_is_diagonal_ray(self):
        P = polar_cone(solvency_cone(BidAskMatrix(np.ones((2, 2)))))
        assert P.contains([3, 3])
        assert not P.contains([1, 1.01]) and not P.contains([1.01, 1])

    @given(st.integers(0, 10**6), st.integers(2, 4))
    def test_polar_inside_orthant(self, seed, D):
        rng = np.random.default_rng(seed)
        P = polar_cone(solvency_cone(random_pi(seed, D)))
        w = rng.normal(size=D)
        if P.contains(w, tol=0):
            assert np.all(w >= 0)


class TestMembership:
    K = solvency_cone(BidAskMatrix(np.array(SPREAD)))

    def test_exchange_with_surplus(self):
        m = cone_contains(self.K.generators, [-2, 4.01])
        assert m.member
        assert np.all(m.coefficients >= -1e-12)
        assert np.allclose(m.coefficients @ self.K.generators, [-2, 4.01], atol=1e-9)

    def test_short_of_exchange(self):
        m = cone_contains(self.K.generators, [-2, 3.99])
        assert not m.member
        w = m.separator
        assert np.all(self.K.generators @ w >= -1e-9)
        assert np.dot([-2, 3.99], w) < 0

    @given(st.integers(0, 10**6), st.integers(2, 4))
    def test_apex(self, seed, D):
        assert cone_contains(solvency_cone(random_pi(seed, D)).generators, np.zeros(D)).member

    @given(st.integers(0, 10**6), st.integers(2, 4))
    def test_generators_against_polar_samples(self, seed, D):
        rng = np.random.default_rng(seed)
        pi = random_pi(seed, D)
        K = solvency_cone(pi)
        # prices inside the bid-ask band are polar members
        for _ in range(5):
            w = _polar_sample(pi, rng)
            assert np.all(K.generators @ w >= -1e-9)
            x = rng.normal(size=D)
            if cone_contains(K.generators, x).member:
                assert np.dot(x, w) >= -1e-7

    def test_frictionless_polar_is_price_ray(self, rng):
        p = np.array([1.0, 2.0, 0.5])
        P = polar_cone(solvency_cone(BidAskMatrix.frictionless(p)))
        assert P.contains(p * 3.0, tol=1e-9)
        for _ in range(20):
            w = p * np.exp(rng.normal(0, 0.1, 3))
            assert not interior_contains(P, w, 1e-9)


def _polar_sample(pi, rng):
    """Random w in K* via a small LP-free construction: solve for w with all <g, w> >= 0."""
    from scipy.optimize import linprog

    G = solvency_cone(pi).generators
    c = rng.normal(size=pi.dim)
    res = linprog(c, A_ub=-G, b_ub=np.zeros(len(G)), A_eq=np.ones((1, pi.dim)), b_eq=[1], bounds=[(0, None)] * pi.dim, method="highs")
    return res.x


class TestInterior:
    P = polar_cone(solvency_cone(BidAskMatrix(np.array(SPREAD))))

    def test_interior_point(self):
        assert interior_contains(self.P, [1, 1], 0.1)

    def test_boundary_point(self):
        assert not interior_contains(self.P, [1, 2], 0.1)

    def test_zero(self):
        assert not interior_contains(self.P, [0, 0], 0.1)

    def test_scale_invariant(self):
        for s in (1e-3, 1.0, 1e3):
            assert interior_contains(self.P, [s, 1.5 * s], 0.1)
