"""Value function, dual problem over consistent price systems, and optimizer recovery.

The primal maximizes E[U(X)] over terminal holdings X reachable from x.  The
dual minimizes sum_l p_l U*(Z_l) + <x, Z_0> over consistent price systems;
it is parameterized by atoms a_l = p_l Z_l, so that node constraints read
<g, sum of atoms below the node> >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .duality_engine import NoStrictlyFeasiblePoint, barrier_minimize, phase_one
from .market import (
    PortfolioProcess,
    ScenarioTree,
    find_scps,
    interior_margin,
    random_martingale_tree,
    random_price_systems,
    singular_example_tree,
    singular_stock_values,
    terminal_cone_representation,
)
from .utility import ExtendedUtility, UtilitySpec, extend

INTERIOR_REL = 1e-6


class RecoveryError(RuntimeError):
    """Dual density vanishes in a consumption coordinate."""


def _extended(U, D) -> ExtendedUtility:
    if isinstance(U, ExtendedUtility):
        if U.D != D:
            raise ValueError(f"utility is extended to {U.D} assets, market has {D}")
        return U
    return extend(U, D)


@dataclass
class DualMeasure:
    """Leaf atoms p_l Z_l plus an explicit purely finitely additive part."""

    atoms: np.ndarray  # (leaves, D)
    probs: np.ndarray
    singular_mass: np.ndarray | None = None

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        if self.singular_mass is None:
            self.singular_mass = np.zeros(self.atoms.shape[1])

    def total(self) -> np.ndarray:
        """m(Omega)."""
        return self.atoms.sum(axis=0) + self.singular_mass

    def density(self) -> np.ndarray:
        """dm^c/dP at each leaf."""
        return self.atoms / self.probs[:, None]

    def __call__(self, x) -> float:
        """m(x) = <x, m(Omega)> for a constant claim x."""
        return float(np.asarray(x) @ self.total())


@dataclass
class PrimalSolution:
    X: np.ndarray | None  # (leaves, D)
    value: float
    process: PortfolioProcess | None
    status: str = "optimal"  # "optimal" | "boundary" | "infeasible"
    iterations: int = 0
    interior_margin: float = np.nan


@dataclass
class DualSolution:
    measure: DualMeasure | None
    value: float
    status: str = "optimal"  # "optimal" | "unbounded"
    sequence: list = field(default_factory=list)
    iterations: int = 0

    @property
    def root_price(self) -> np.ndarray:
        return self.measure.total()


@dataclass
class ValueFunctionProbe:
    x: np.ndarray
    value: float
    supergradient: np.ndarray
    probes: list  # (z, u(z), u(x) + <z - x, m>)
    bracket: np.ndarray  # (D, 2): forward and backward difference quotients
    worst_excess: float

    def holds(self, tol: float = 1e-6) -> bool:
        return self.worst_excess <= tol


def solve_primal(tree: ScenarioTree, U, x, gap_tol: float = 1e-11) -> PrimalSolution:
    """Maximize E[U~(X)] over terminal holdings reachable from x.

    Variables are trade coefficients lam >= 0 and leaf holdings X >= 0 tied
    by X = x + M lam; keeping X explicit preserves its relative precision
    when a leaf ends up very close to zero wealth.
    """
    Ue = _extended(U, tree.D)
    base, d, D = Ue.base, Ue.d, tree.D
    x = np.asarray(x, dtype=float)
    margin, _ = interior_margin(tree, x)
    if margin <= INTERIOR_REL * max(np.sum(np.abs(x)), 1.0):
        status = "infeasible" if margin < -1e-12 else "boundary"
        if status == "boundary" and np.isfinite(base.value(np.zeros(d))):
            raise NotImplementedError("boundary endowments of utilities bounded below are not solved")
        return PrimalSolution(None, -np.inf, None, status, 0, margin)

    tm = terminal_cone_representation(tree)
    p = tree.leaf_probabilities
    L = len(p)
    n = tm.n_vars
    nX = L * D
    x0 = np.tile(x, L)

    def objective(v):
        X = v[n:].reshape(L, D)
        vals = np.array([base.value(row[:d]) for row in X])
        total = float(p @ vals)
        if not np.isfinite(total):
            return np.inf, None, None
        g = np.zeros(n + nX)
        H = np.zeros((n + nX, n + nX))
        for l in range(L):
            lo = n + l * D
            g[lo : lo + d] = -p[l] * base.grad(X[l, :d])
            H[lo : lo + d, lo : lo + d] = -p[l] * base.hessian(X[l, :d])
        return -total, g, H

    G = np.eye(n + nX)
    h = np.zeros(n + nX)
    w = np.concatenate([tm.weights(), np.repeat(p, D)])
    E = np.hstack([-tm.M, np.eye(nX)])
    basis = np.vstack([np.eye(n), tm.M])
    res = barrier_minimize(objective, G, h, weights=w, E=E, e=x0, null_basis=basis, gap_tol=gap_tol)
    lam = res.v[:n]
    X = res.v[n:].reshape(L, D)
    proc = PortfolioProcess(tree, x, tm.transfers(lam))
    return PrimalSolution(X, -res.value, proc, "optimal", res.newton_iterations, margin)


def _dual_structure(tree: ScenarioTree):
    """Rows G (weights w) with G a >= 0 encoding node-wise consistency of stacked atoms."""
    D = tree.D
    leaves = tree.leaves
    L = len(leaves)
    leaf_pos = {l.id: k for k, l in enumerate(leaves)}
    below = {n.id: [] for n in tree.nodes}
    for l in leaves:
        for a in tree.path(l.id):
            below[a].append(leaf_pos[l.id])
    rows, w = [], []
    for n in tree.nodes:
        for g in tree.trading_generators(n.id):
            row = np.zeros(L * D)
            for k in below[n.id]:
                row[k * D : (k + 1) * D] = g
            rows.append(row)
            w.append(n.p)
    # consumption atoms must be positive even when no trading cone covers them
    return np.array(rows), np.array(w)


def _dual_objective(base: UtilitySpec, p, D, x):
    L = len(p)
    d = base.d

    def objective(v):
        a = v.reshape(L, D)
        if np.any(a[:, :d] < 0):
            return np.inf, None, None
        y = a[:, :d] / p[:, None]
        total = 0.0
        for l in range(L):
            c = base.conjugate(y[l])
            if not np.isfinite(c):
                return np.inf, None, None
            total += p[l] * c
        total += x @ a.sum(axis=0)
        g = np.tile(x, L).reshape(L, D).copy()
        H = np.zeros((L * D, L * D))
        for l in range(L):
            g[l, :d] += base.conjugate_grad(y[l])
            blk = base.conjugate_hessian(y[l]) / p[l]
            H[l * D : l * D + d, l * D : l * D + d] = blk
        return total, g.ravel(), H

    return objective


def _random_dual_start(G, rng):
    """A strictly feasible random start: rescaled, jittered phase-one point."""
    v, margin = phase_one(G, np.zeros(len(G)))
    if v is None or margin <= 0:
        raise NoStrictlyFeasiblePoint("no strictly consistent price system", margin, v)
    v = v * np.exp(rng.normal(0.0, 1.0))
    jitter = 0.5
    while jitter > 1e-6:
        cand = v * np.exp(rng.uniform(-jitter, jitter, v.shape))
        if np.all(G @ cand > 0):
            return cand
        jitter /= 2
    return v


def solve_dual(tree: ScenarioTree, U, x, gap_tol: float = 1e-11, seed: int | None = None) -> DualSolution:
    """Minimize sum_l p_l U~*(Z_l) + <x, Z_0> over consistent price systems.

    ``seed`` restarts the barrier from a random strictly feasible point
    instead of the phase-one point.
    """
    Ue = _extended(U, tree.D)
    base, D = Ue.base, tree.D
    x = np.asarray(x, dtype=float)
    p = tree.leaf_probabilities
    G, w = _dual_structure(tree)
    objective = _dual_objective(base, p, D, x)
    try:
        v0 = None if seed is None else _random_dual_start(G, np.random.default_rng(seed))
        res = barrier_minimize(objective, G, np.zeros(len(G)), weights=w, v0=v0, gap_tol=gap_tol)
    except NoStrictlyFeasiblePoint:
        # no strictly consistent price system: report the arbitrage diagnosis
        find_scps(tree, margin=0.0)
        raise
    m = DualMeasure(res.v.reshape(len(p), D), p)
    if res.status == "unbounded":
        return DualSolution(m, -np.inf, "unbounded", res.history, res.newton_iterations)
    return DualSolution(m, res.value, "optimal", res.history, res.newton_iterations)


def recover_primal(m: DualMeasure, U) -> np.ndarray:
    """X(leaf) = I~(density at leaf)."""
    D = m.atoms.shape[1]
    Ue = _extended(U, D)
    dens = m.density()
    if np.any(dens[:, : Ue.d] <= 0):
        bad = np.flatnonzero(np.any(dens[:, : Ue.d] <= 0, axis=1))
        raise RecoveryError(f"density vanishes in a consumption coordinate at leaves {bad.tolist()}")
    return np.array([Ue.inverse_marginal(z) for z in dens])


def value(tree, U, x) -> float:
    return solve_primal(tree, U, x).value


def supergradient_probe(tree: ScenarioTree, U, x, h: float = 1e-3, dual: DualSolution | None = None) -> ValueFunctionProbe:
    """Check u(z) <= u(x) + <z - x, m(Omega)> at z = x +- h e^i."""
    x = np.asarray(x, dtype=float)
    u0 = solve_primal(tree, U, x).value
    dual = solve_dual(tree, U, x) if dual is None else dual
    m = dual.measure.total()
    probes = []
    bracket = np.zeros((tree.D, 2))
    worst = -np.inf
    for i in range(tree.D):
        e = np.zeros(tree.D)
        e[i] = h
        vals = []
        for sgn in (1, -1):
            z = x + sgn * e
            uz = solve_primal(tree, U, z).value
            bound = u0 + (z - x) @ m
            probes.append((z, uz, bound))
            worst = max(worst, uz - bound)
            vals.append(uz)
        bracket[i] = [(vals[0] - u0) / h, (u0 - vals[1]) / h]
    return ValueFunctionProbe(x, u0, m, probes, bracket, worst)


def value_conjugate(tree: ScenarioTree, U, xstar, gap_tol: float = 1e-11) -> float:
    """u*(x*) = min sum_l p_l U~*(Z_l) over consistent Z with E[Z_T] = x*."""
    Ue = _extended(U, tree.D)
    base, D = Ue.base, tree.D
    xstar = np.asarray(xstar, dtype=float)
    if np.any(xstar < 0):
        return np.inf
    p = tree.leaf_probabilities
    L = len(p)
    G, w = _dual_structure(tree)
    objective = _dual_objective(base, p, D, np.zeros(D))
    E = np.tile(np.eye(D), L)
    try:
        res = barrier_minimize(objective, G, np.zeros(len(G)), weights=w, E=E, e=xstar, gap_tol=gap_tol)
    except NoStrictlyFeasiblePoint as exc:
        if exc.point is None or exc.margin < -1e-12 or not np.isfinite(objective(exc.point)[0]):
            return np.inf
        raise NotImplementedError("x* on the boundary of the dual domain with finite conjugate value")
    if res.status == "unbounded":
        return -np.inf
    return float(res.value)


@dataclass
class VariationalReport:
    equality_gap: float  # |E<X, Z_hat> - m_hat(x)|
    worst_excess: float  # max over the battery of E<X, Z> - m(x)
    n_checked: int

    def passed(self, eq_tol: float = 1e-6, ineq_tol: float = 1e-8) -> bool:
        return self.equality_gap <= eq_tol and self.worst_excess <= ineq_tol


def variational_check(tree: ScenarioTree, U, x, n_random: int = 20, seed: int = 0) -> VariationalReport:
    """E<X_hat, dm/dP> <= m(x) over feasible dual m, with equality at the dual optimizer."""
    x = np.asarray(x, dtype=float)
    prim = solve_primal(tree, U, x)
    dual = solve_dual(tree, U, x)
    X = prim.X
    m_hat = dual.measure
    eq = abs(float(np.sum(X * m_hat.atoms)) - m_hat(x))
    rng = np.random.default_rng(seed)
    worst = -np.inf
    p = tree.leaf_probabilities
    for ps in random_price_systems(tree, n_random, rng):
        atoms = ps.leaf_atoms()
        m = DualMeasure(atoms, p)
        worst = max(worst, float(np.sum(X * atoms)) - m(x))
    return VariationalReport(eq, worst, n_random)


# -- singular truncation sweep -----------------------------------------------------


@dataclass
class SweepRow:
    N: int
    theta: float
    u: float
    mass_total: np.ndarray
    densities: np.ndarray  # first-coordinate density per retained atom
    head_mass: float
    deficit: float
    fd_derivative: float
    transfer_norm: float

    def as_record(self) -> dict:
        return {
            "N": self.N,
            "theta": self.theta,
            "u_N": self.u,
            "mass_total_1": float(self.mass_total[0]),
            "mass_total_2": float(self.mass_total[1]),
            "head_mass_M5": self.head_mass,
            "deficit": self.deficit,
            "fd_du_dx1": self.fd_derivative,
            "transfer_norm": self.transfer_norm,
        }


def singular_sweep(alpha: float = 0.1, N_list=(10, 20, 40), M: int = 5, h: float = 1e-6, mode: str = "renormalize") -> list:
    """Solve the truncated singular example at x = (1, 0) for each N."""
    if not 0 < alpha < 1 / 3:
        raise ValueError("alpha must lie in (0, 1/3)")
    if list(N_list) != sorted(set(N_list)):
        raise ValueError("N list must be strictly increasing")
    U = UtilitySpec.log(1)
    x = np.array([1.0, 0.0])
    rows = []
    for N in N_list:
        tree = singular_example_tree(alpha, N, mode)
        prim = solve_primal(tree, U, x)
        dual = solve_dual(tree, U, x)
        theta = float(prim.process.holdings()[0][1])
        dens = dual.measure.density()[:, 0]
        total = dual.measure.total()
        head = float(dual.measure.atoms[: M + 1, 0].sum())
        up = solve_primal(tree, U, x + [h, 0]).value
        dn = solve_primal(tree, U, x - [h, 0]).value
        rows.append(
            SweepRow(
                N,
                theta,
                prim.value,
                total,
                dens,
                head,
                float(total[0]) - head,
                (up - dn) / (2 * h),
                float(np.max(np.abs(prim.process.transfers))),
            )
        )
    return rows


def singular_limits(alpha: float) -> dict:
    """Closed-form limits of the untruncated singular example at x = (1, 0)."""
    n = np.arange(1, 200)
    return {
        "countably_additive_mass": 0.5 + 1.5 * alpha,
        "deficit": 1 - (0.5 + 1.5 * alpha),
        "value": (1 - alpha) * np.log(2) - alpha * float(np.sum(2.0**-n * np.log(n))),
        "total_mass": np.array([1.0, 1.0]),
    }


def stock_values(N: int) -> np.ndarray:
    return singular_stock_values(N)


# -- worked example with a non-strictly concave value function --------------------


def nonstrict_closed_form(case: int, x) -> float:
    """Value function of the constant [[1,2],[2,1]] one-period market.

    Case 1: U = ln x1 + ln x2.  Case 2: U = ln x1 with the second asset
    liquidated.  Returns -inf outside the support cone.
    """
    x1, x2 = float(x[0]), float(x[1])
    if case == 1:
        if 2 * x1 + x2 <= 0 or x1 + 2 * x2 <= 0:
            return -np.inf
        if x2 > 2 * x1:
            return 2 * np.log(2 * x1 + x2) - 3 * np.log(2)
        if x1 > 2 * x2:
            return 2 * np.log(x1 + 2 * x2) - 3 * np.log(2)
        return np.log(x1) + np.log(x2)
    if case == 2:
        w = x1 + x2 / 2 if x2 >= 0 else x1 + 2 * x2
        return np.log(w) if w > 0 else -np.inf
    raise ValueError("case must be 1 or 2")


def nonstrict_grid(n_per_case: int = 50, seed: int = 0) -> list:
    """(case, x) pairs covering every region of both cases."""
    rng = np.random.default_rng(seed)
    out = []
    # case 1: sell asset 2, no trade, sell asset 1
    per = n_per_case // 3
    for _ in range(per):
        x1 = rng.uniform(-1, 1)
        out.append((1, (x1, 2 * abs(x1) + rng.uniform(0.05, 2))))
    for _ in range(per):
        x1 = rng.uniform(0.2, 2)
        out.append((1, (x1, rng.uniform(x1 / 2 + 0.02, 2 * x1 - 0.02))))
    for _ in range(n_per_case - 2 * per):
        x2 = rng.uniform(-1, 1)
        out.append((1, (2 * abs(x2) + rng.uniform(0.05, 2), x2)))
    half = n_per_case // 2
    for _ in range(half):
        x1 = rng.uniform(-1, 1)
        out.append((2, (x1, max(0.0, -2 * x1) + rng.uniform(0.05, 2))))
    for _ in range(n_per_case - half):
        x1 = rng.uniform(0.2, 2)
        out.append((2, (x1, -rng.uniform(0.02, 0.95) * x1 / 2)))
    return out


def nonstrict_utility(case: int) -> UtilitySpec:
    return UtilitySpec.log(2) if case == 1 else UtilitySpec.log(1)


# -- randomized instances -----------------------------------------------------


@dataclass
class Instance:
    tree: ScenarioTree
    U: UtilitySpec
    endowments: list


def random_utility(rng, d: int) -> UtilitySpec:
    """Additive log or power utility with random weights and exponents."""
    alpha = rng.uniform(0.5, 2.0, d)
    if rng.random() < 0.5:
        return UtilitySpec.log(d, alpha=alpha)
    return UtilitySpec.power(rng.choice([-1.0, -0.5, 0.3, 0.5], d), alpha=alpha)


def random_instance(rng, n_endowments: int = 3, max_periods: int = 2, branching: int = 3, min_margin: float = 0.05) -> Instance:
    """Random tree with D in {2, 3}, random additive utility, and interior endowments."""
    D = int(rng.integers(2, 4))
    periods = int(rng.integers(1, max_periods + 1))
    tree, _ = random_martingale_tree(rng, D, periods, branching)
    U = random_utility(rng, int(rng.integers(1, D + 1)))
    xs = []
    while len(xs) < n_endowments:
        x = rng.uniform(-0.3, 1.5, D)
        if interior_margin(tree, x)[0] > min_margin:
            xs.append(x)
    return Instance(tree, U, xs)
