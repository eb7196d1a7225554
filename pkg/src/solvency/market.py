"""Finite scenario-tree markets with proportional transaction costs.

Node probabilities are unconditional.  A trade at a node is a vector in
-K(Pi_node); holdings are the endowment plus all trades along the path from
the root.  Leaves trade through their own bid-ask matrix unless the tree is
built with ``terminal_trades=False``, in which case the leaf cone is the
nonnegative orthant (disposal only).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from ._lp import solve_lp
from .cone_algebra import (
    MEMBERSHIP_TOL,
    BidAskMatrix,
    InvalidBidAsk,
    LPError,
    StructuralError,
    check_bid_ask,
    cone_contains,
    solvency_cone,
)

PROB_TOL = 1e-12


class TreeConfigError(ValueError):
    def __init__(self, message, node_ids=()):
        super().__init__(message)
        self.node_ids = tuple(node_ids)


class NoPriceSystem(RuntimeError):
    """No (strictly) consistent price system exists for the requested margin."""

    def __init__(self, message, arbitrage=None, margin=0.0):
        super().__init__(message)
        self.arbitrage = arbitrage
        self.margin = margin


@dataclass(frozen=True)
class Node:
    id: str
    parent: str | None
    t: int
    p: float
    pi: BidAskMatrix


@dataclass(frozen=True, eq=False)
class ScenarioTree:
    nodes: tuple
    D: int
    terminal_trades: bool = True
    children: dict = field(init=False, repr=False)
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        index = {n.id: k for k, n in enumerate(self.nodes)}
        children = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            if n.parent is not None:
                children[n.parent].append(n.id)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "children", {k: tuple(v) for k, v in children.items()})

    @property
    def root(self) -> Node:
        return self.nodes[0]

    @property
    def T(self) -> int:
        return max(n.t for n in self.nodes)

    @property
    def leaves(self) -> list:
        return [n for n in self.nodes if not self.children[n.id]]

    @property
    def leaf_probabilities(self) -> np.ndarray:
        return np.array([n.p for n in self.leaves])

    def node(self, node_id) -> Node:
        return self.nodes[self.index[node_id]]

    def path(self, node_id) -> list:
        """Node ids from the root down to node_id."""
        out = []
        cur = node_id
        while cur is not None:
            out.append(cur)
            cur = self.node(cur).parent
        return out[::-1]

    def is_leaf(self, node_id) -> bool:
        return not self.children[node_id]

    def trading_generators(self, node_id) -> np.ndarray:
        """Generators of the cone whose negatives are the admissible trades at a node."""
        if self.is_leaf(node_id) and not self.terminal_trades:
            return np.eye(self.D)
        return solvency_cone(self.node(node_id).pi).generators

    def to_config(self) -> dict:
        return {
            "D": self.D,
            "terminal_trades": self.terminal_trades,
            "nodes": [
                {
                    "id": n.id,
                    "parent": n.parent,
                    "p": repr(n.p),
                    "pi": [[repr(float(v)) for v in row] for row in n.pi.entries],
                }
                for n in self.nodes
            ],
        }


def _num(v) -> float:
    """Accept numbers or decimal strings."""
    if isinstance(v, str):
        return float(Decimal(v))
    return float(v)


def build_tree(config: dict) -> ScenarioTree:
    """Validate a tree config of node records {id, parent, p, pi} and build the tree.

    ``pi`` may be nested rows or a flat row-major list; numbers may be
    decimal strings.  Nodes may be listed in any order.
    """
    try:
        raw = list(config["nodes"])
    except (KeyError, TypeError):
        raise TreeConfigError("config needs a 'nodes' list")
    if not raw:
        raise TreeConfigError("tree has no nodes")
    records = {}
    for rec in raw:
        nid = str(rec["id"])
        if nid in records:
            raise TreeConfigError(f"duplicate node id {nid}", [nid])
        records[nid] = rec
    roots = [nid for nid, r in records.items() if r.get("parent") is None]
    if len(roots) != 1:
        raise TreeConfigError(f"expected exactly one root, found {len(roots)}", roots)
    for nid, r in records.items():
        par = r.get("parent")
        if par is not None and str(par) not in records:
            raise TreeConfigError(f"node {nid} has dangling parent {par}", [nid])

    D = config.get("D")
    order = []
    depth = {}
    frontier = [roots[0]]
    depth[roots[0]] = 0
    kids = {nid: [] for nid in records}
    for nid, r in records.items():
        if r.get("parent") is not None:
            kids[str(r["parent"])].append(nid)
    while frontier:
        nxt = []
        for nid in frontier:
            order.append(nid)
            for c in kids[nid]:
                depth[c] = depth[nid] + 1
                nxt.append(c)
        frontier = nxt
    if len(order) != len(records):
        missing = sorted(set(records) - set(order))
        raise TreeConfigError("nodes unreachable from the root (cycle?)", missing)

    nodes = []
    for nid in order:
        r = records[nid]
        entries = np.array([[_num(v) for v in row] for row in r["pi"]] if isinstance(r["pi"][0], (list, tuple)) else [_num(v) for v in r["pi"]], dtype=float)
        if entries.ndim == 1:
            k = int(round(np.sqrt(entries.size)))
            if k * k != entries.size:
                raise TreeConfigError(f"node {nid}: flat pi has {entries.size} entries", [nid])
            entries = entries.reshape(k, k)
        if D is None:
            D = entries.shape[0]
        if entries.shape != (D, D):
            raise TreeConfigError(f"node {nid}: pi has shape {entries.shape}, expected {(D, D)}", [nid])
        try:
            violations = check_bid_ask(entries)
        except StructuralError as exc:
            raise TreeConfigError(f"node {nid}: {exc}", [nid]) from exc
        if violations:
            raise TreeConfigError(f"node {nid}: {InvalidBidAsk(violations)}", [nid])
        if "t" in r and int(r["t"]) != depth[nid]:
            raise TreeConfigError(f"node {nid}: time index {r['t']} disagrees with depth {depth[nid]}", [nid])
        p = _num(r["p"])
        if not p > 0:
            raise TreeConfigError(f"node {nid}: probability must be positive", [nid])
        par = None if r.get("parent") is None else str(r["parent"])
        nodes.append(Node(nid, par, depth[nid], p, BidAskMatrix(entries)))

    if abs(nodes[0].p - 1.0) > PROB_TOL:
        raise TreeConfigError("root probability must be 1", [nodes[0].id])
    byid = {n.id: n for n in nodes}
    T = max(n.t for n in nodes)
    for n in nodes:
        if kids[n.id]:
            total = sum(byid[c].p for c in kids[n.id])
            if abs(total - n.p) > PROB_TOL * max(1.0, n.p) + 1e-15:
                raise TreeConfigError(
                    f"children of node {n.id} have probability {total}, parent has {n.p}", [n.id, *kids[n.id]]
                )
        elif n.t != T:
            raise TreeConfigError(f"leaf {n.id} at time {n.t}, expected {T}", [n.id])
    return ScenarioTree(tuple(nodes), D, bool(config.get("terminal_trades", True)))


def tree_from_arrays(parents, probs, pis, terminal_trades=True) -> ScenarioTree:
    """Convenience builder: node k has parent parents[k] (None for the root)."""
    nodes = [
        {"id": str(k), "parent": None if par is None else str(par), "p": float(p), "pi": np.asarray(pi).tolist()}
        for k, (par, p, pi) in enumerate(zip(parents, probs, pis))
    ]
    return build_tree({"nodes": nodes, "terminal_trades": terminal_trades})


def one_period_tree(pi_root, leaf_pis, leaf_probs=None, terminal_trades=True) -> ScenarioTree:
    leaf_probs = np.full(len(leaf_pis), 1.0 / len(leaf_pis)) if leaf_probs is None else np.asarray(leaf_probs, dtype=float)
    parents = [None] + [0] * len(leaf_pis)
    return tree_from_arrays(parents, [1.0, *leaf_probs], [pi_root, *leaf_pis], terminal_trades)


# -- the terminal claim map ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class TerminalMap:
    """Linear map from nonnegative trade coefficients to leaf holdings.

    Leaf holdings are x + M @ lam (stacked leaf-major, D entries per leaf),
    where lam >= 0 collects generator coefficients node by node and each
    node's trade is -G_node^T lam_node.
    """

    tree: ScenarioTree
    M: np.ndarray
    blocks: tuple  # (node id, slice into lam, generators)
    holdings: np.ndarray  # node-major map lam -> holdings after each node's trade

    @property
    def n_vars(self) -> int:
        return self.M.shape[1]

    def leaf_holdings(self, x, lam) -> np.ndarray:
        return (np.tile(x, len(self.tree.leaves)) + self.M @ lam).reshape(-1, self.tree.D)

    def node_holdings(self, x, lam) -> np.ndarray:
        return (np.tile(x, len(self.tree.nodes)) + self.holdings @ lam).reshape(-1, self.tree.D)

    def transfers(self, lam) -> np.ndarray:
        out = np.zeros((len(self.tree.nodes), self.tree.D))
        for nid, sl, gens in self.blocks:
            out[self.tree.index[nid]] = -gens.T @ lam[sl]
        return out

    def weights(self) -> np.ndarray:
        """Node probability attached to every coefficient."""
        w = np.zeros(self.n_vars)
        for nid, sl, _ in self.blocks:
            w[sl] = self.tree.node(nid).p
        return w


def terminal_cone_representation(tree: ScenarioTree) -> TerminalMap:
    D = tree.D
    blocks = []
    offset = 0
    for n in tree.nodes:
        gens = tree.trading_generators(n.id)
        blocks.append((n.id, slice(offset, offset + len(gens)), gens))
        offset += len(gens)
    slot = {nid: (sl, gens) for nid, sl, gens in blocks}
    H = np.zeros((len(tree.nodes) * D, offset))
    for k, n in enumerate(tree.nodes):
        for anc in tree.path(n.id):
            sl, gens = slot[anc]
            H[k * D : (k + 1) * D, sl] -= gens.T
    leaf_rows = np.concatenate([np.arange(tree.index[l.id] * D, (tree.index[l.id] + 1) * D) for l in tree.leaves])
    return TerminalMap(tree, H[leaf_rows], tuple(blocks), H)


# -- price systems -------------------------------------------------------------


@dataclass(eq=False)
class PriceSystem:
    tree: ScenarioTree
    Z: np.ndarray  # one row per node, in tree order

    def at(self, node_id) -> np.ndarray:
        return self.Z[self.tree.index[node_id]]

    def martingale_residual(self) -> float:
        worst = 0.0
        for n in self.tree.nodes:
            kids = self.tree.children[n.id]
            if kids:
                avg = sum(self.tree.node(c).p * self.at(c) for c in kids) / n.p
                worst = max(worst, float(np.max(np.abs(avg - self.at(n.id)))))
        return worst

    def consistency_slack(self) -> float:
        """Smallest <g, Z(node)> / |Z(node)|_1 over nodes and generators."""
        worst = np.inf
        for n in self.tree.nodes:
            z = self.at(n.id)
            g = solvency_cone(n.pi).generators
            worst = min(worst, float(np.min(g @ z) / max(np.sum(np.abs(z)), 1e-300)))
        return worst

    def is_consistent(self, tol: float = 1e-9) -> bool:
        return self.martingale_residual() <= tol and self.consistency_slack() >= -tol

    def is_strict(self, margin: float) -> bool:
        return self.martingale_residual() <= 1e-9 and self.consistency_slack() >= margin * (1 - 1e-9)

    def leaf_atoms(self) -> np.ndarray:
        return np.array([l.p * self.at(l.id) for l in self.tree.leaves])


def _price_constraints(tree: ScenarioTree, margin: float):
    """Rows A with A z <= 0 encoding consistency, and equality rows for the martingale."""
    D = tree.D
    nv = len(tree.nodes) * D
    ub = []
    for k, n in enumerate(tree.nodes):
        gens = solvency_cone(n.pi).generators
        for g in gens:
            row = np.zeros(nv)
            row[k * D : (k + 1) * D] = -(g - margin * np.ones(D))
            ub.append(row)
    eq = []
    for k, n in enumerate(tree.nodes):
        kids = tree.children[n.id]
        for i in range(D):
            if not kids:
                continue
            row = np.zeros(nv)
            row[k * D + i] = -n.p
            for c in kids:
                row[tree.index[c] * D + i] += tree.node(c).p
            eq.append(row)
    return np.array(ub), np.array(eq).reshape(-1, nv)


def find_arbitrage(tree: ScenarioTree):
    """Zero-cost portfolio process with nonnegative, nonzero terminal value, or None."""
    tm = terminal_cone_representation(tree)
    p = np.repeat(tree.leaf_probabilities, tree.D)
    n = tm.n_vars
    # maximize sum p * X subject to X = M lam >= 0 and sum p * X <= 1
    c = -(p @ tm.M)
    A_ub = np.vstack([-tm.M, (p @ tm.M)[None, :]])
    b_ub = np.concatenate([np.zeros(len(p)), [1.0]])
    res = solve_lp(c, A_ub=A_ub, b_ub=b_ub, bounds=[(0, None)] * n)
    if res.status != 0:
        raise LPError(f"arbitrage LP failed: {res.message}")
    if -res.fun <= 1e-9:
        return None
    return PortfolioProcess(tree, np.zeros(tree.D), tm.transfers(res.x))


def find_scps(tree: ScenarioTree, margin: float = 1e-6) -> PriceSystem:
    """Consistent price system with <g, Z(node)> >= margin |Z(node)|_1 and <1, Z(root)> = 1.

    The LP maximizes the smallest slack above the margin.  Raises
    NoPriceSystem (with an arbitrage process when one exists) if infeasible.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    D = tree.D
    A, E = _price_constraints(tree, margin)
    nv = len(tree.nodes) * D
    norm = np.zeros(nv)
    norm[:D] = 1.0
    # variables (z, s): maximize s with A z + s <= 0
    c = np.zeros(nv + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, np.ones((len(A), 1))])
    A_eq = np.vstack([np.hstack([E, np.zeros((len(E), 1))]), np.append(norm, 0.0)])
    b_eq = np.append(np.zeros(len(E)), 1.0)
    bounds = [(0, None)] * nv + [(None, 1.0)]
    res = solve_lp(c, A_ub=A_ub, b_ub=np.zeros(len(A)), A_eq=A_eq, b_eq=b_eq, bounds=bounds)
    if res.status == 2 or (res.status == 0 and res.x[-1] < -1e-10):
        arb = find_arbitrage(tree)
        what = "strictly consistent" if margin > 0 else "consistent"
        msg = f"no {what} price system with margin {margin:g}"
        if arb is not None:
            msg += "; an arbitrage process exists"
        raise NoPriceSystem(msg, arbitrage=arb, margin=margin)
    if res.status != 0:
        raise LPError(f"price-system LP failed: {res.message}", residuals={"status": res.status})
    return PriceSystem(tree, res.x[:nv].reshape(-1, D))


# -- portfolio processes and super-replication -------------------------------


@dataclass(eq=False)
class PortfolioProcess:
    tree: ScenarioTree
    x: np.ndarray
    transfers: np.ndarray  # one row per node

    def holdings(self) -> np.ndarray:
        out = np.zeros_like(self.transfers)
        for k, n in enumerate(self.tree.nodes):
            out[k] = self.x + sum(self.transfers[self.tree.index[a]] for a in self.tree.path(n.id))
        return out

    def terminal_values(self) -> np.ndarray:
        V = self.holdings()
        return np.array([V[self.tree.index[l.id]] for l in self.tree.leaves])

    def is_self_financing(self, tol: float = MEMBERSHIP_TOL) -> bool:
        for k, n in enumerate(self.tree.nodes):
            gens = self.tree.trading_generators(n.id)
            if not cone_contains(gens, -self.transfers[k], tol * max(1.0, np.max(np.abs(self.transfers[k])))).member:
                return False
        return True


@dataclass
class AttainabilityReport:
    attainable: bool
    primal_residual: float
    dual_value: float
    process: PortfolioProcess | None
    price_system: PriceSystem | None
    primal_verdict: bool = False
    dual_verdict: bool = False

    @property
    def routes_agree(self) -> bool:
        return self.primal_verdict == self.dual_verdict


class ConsistencyError(RuntimeError):
    """Two routes that must agree did not."""


def attainable_check(tree: ScenarioTree, x, X, tol: float = 1e-8, strict: bool = True) -> AttainabilityReport:
    """Decide whether the leaf claim X can be reached from x at zero cost.

    Primal route: LP minimizing the sup-norm residual of x + M lam - X.
    Dual route: maximize E<X, Z_T> - <x, Z_0> over consistent Z with
    <1, Z_0> = 1; X is attainable iff this is <= 0.
    """
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float).reshape(len(tree.leaves), tree.D)
    if np.any(X < 0):
        raise ValueError("claims must be nonnegative")
    tm = terminal_cone_representation(tree)
    n = tm.n_vars
    target = X.ravel() - np.tile(x, len(tree.leaves))
    L = len(target)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.vstack([np.hstack([tm.M, -np.ones((L, 1))]), np.hstack([-tm.M, -np.ones((L, 1))])])
    b_ub = np.concatenate([target, -target])
    res = solve_lp(c, A_ub=A_ub, b_ub=b_ub, bounds=[(0, None)] * (n + 1))
    if res.status != 0:
        raise LPError(f"replication LP failed: {res.message}")
    r = float(res.x[-1])
    process = PortfolioProcess(tree, x, tm.transfers(res.x[:n]))

    D = tree.D
    A, E = _price_constraints(tree, 0.0)
    nv = len(tree.nodes) * D
    obj = np.zeros(nv)
    for k, leaf in enumerate(tree.leaves):
        j = tree.index[leaf.id]
        obj[j * D : (j + 1) * D] += leaf.p * X[k]
    obj[:D] -= x
    norm = np.zeros(nv)
    norm[:D] = 1.0
    dres = solve_lp(-obj, A_ub=A, b_ub=np.zeros(len(A)), A_eq=np.vstack([E, norm]), b_eq=np.append(np.zeros(len(E)), 1.0), bounds=[(0, None)] * nv)
    if dres.status == 2:
        raise NoPriceSystem("no consistent price system; the dual route is undefined", arbitrage=find_arbitrage(tree))
    if dres.status != 0:
        raise LPError(f"pricing LP failed: {dres.message}")
    v = float(-dres.fun)
    prices = PriceSystem(tree, dres.x.reshape(-1, D))
    pv, dv = r <= tol, v <= tol
    report = AttainabilityReport(pv, r, v, process, prices, pv, dv)
    if strict and pv != dv:
        raise ConsistencyError(f"replication residual {r:.3e} and pricing value {v:.3e} disagree")
    return report


def interior_margin(tree: ScenarioTree, x) -> tuple[float, np.ndarray]:
    """Largest s with x + M lam >= s at every leaf coordinate (s capped at 1)."""
    tm = terminal_cone_representation(tree)
    n = tm.n_vars
    L = tm.M.shape[0]
    x = np.asarray(x, dtype=float)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-tm.M, np.ones((L, 1))])
    b_ub = np.tile(x, len(tree.leaves))
    res = solve_lp(c, A_ub=A_ub, b_ub=b_ub, bounds=[(0, None)] * n + [(None, 1.0)])
    if res.status != 0:
        raise LPError(f"interior LP failed: {res.message}")
    return float(res.x[-1]), res.x[:n]


def is_interior(tree: ScenarioTree, x, rel: float = 1e-6) -> bool:
    """x lies in the interior of the support cone of the value function."""
    s, _ = interior_margin(tree, x)
    return s > rel * max(np.sum(np.abs(x)), 1.0)


# -- random markets ------------------------------------------------------------


def random_martingale_tree(rng, D, periods, branching, cost_range=(0.01, 0.3), vol=0.3, terminal_trades=True):
    """Random tree whose bid-ask spreads bracket a positive martingale.

    The martingale is a strictly consistent price system by construction.
    Returns (tree, Z) with Z in tree order.
    """
    parents, probs, Z = [None], [1.0], [rng.uniform(0.5, 2.0, D)]
    frontier = [0]
    for _ in range(periods):
        nxt = []
        for k in frontier:
            b = int(rng.integers(1, branching + 1))
            q = rng.dirichlet(np.ones(b) * 2.0)
            r = np.exp(vol * rng.standard_normal((b, D)))
            r /= q @ r
            for j in range(b):
                parents.append(k)
                probs.append(probs[k] * q[j])
                Z.append(Z[k] * r[j])
                nxt.append(len(parents) - 1)
        frontier = nxt
    pis = [bid_ask_around(S, rng, cost_range) for S in Z]
    tree = tree_from_arrays(parents, probs, pis, terminal_trades)
    return tree, np.array(Z)


def bid_ask_around(S, rng, cost_range=(0.01, 0.3)) -> np.ndarray:
    """pi_ij = (S_j / S_i)(1 + c_ij), closed under composition in log space."""
    D = len(S)
    c = rng.uniform(*cost_range, (D, D))
    L = np.log(S[None, :] / S[:, None]) + np.log1p(c)
    np.fill_diagonal(L, 0.0)
    for k in range(D):
        L = np.minimum(L, L[:, [k]] + L[[k], :])
    pi = np.exp(L)
    np.fill_diagonal(pi, 1.0)
    return pi


def random_price_systems(tree: ScenarioTree, n: int, rng) -> list:
    """Consistent price systems (normalized at the root) from random LP vertices and their mixtures."""
    D = tree.D
    A, E = _price_constraints(tree, 0.0)
    nv = len(tree.nodes) * D
    norm = np.zeros(nv)
    norm[:D] = 1.0
    A_eq = np.vstack([E, norm])
    b_eq = np.append(np.zeros(len(E)), 1.0)
    vertices = []
    for _ in range(n):
        res = solve_lp(rng.standard_normal(nv), A_ub=A, b_ub=np.zeros(len(A)), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * nv)
        if res.status != 0:
            raise LPError(f"price-system sampling LP failed: {res.message}")
        vertices.append(res.x)
    out = []
    for k in range(n):
        wts = rng.dirichlet(np.ones(len(vertices))) if k % 2 else np.eye(len(vertices))[k]
        out.append(PriceSystem(tree, (wts @ np.array(vertices)).reshape(-1, D)))
    return out


# -- worked-example markets ----------------------------------------------------

CONSTANT_SPREAD = [[1.0, 2.0], [2.0, 1.0]]


def nonstrict_example_tree(terminal_trades=True) -> ScenarioTree:
    """One period, one state, constant bid-ask matrix [[1,2],[2,1]]."""
    return one_period_tree(CONSTANT_SPREAD, [CONSTANT_SPREAD], terminal_trades=terminal_trades)


def singular_stock_values(N: int) -> np.ndarray:
    """s_0 = 2 and s_n = 1/n for n = 1..N."""
    return np.array([2.0] + [1.0 / n for n in range(1, N + 1)])


def singular_example_probs(alpha: float, N: int, mode: str = "renormalize") -> np.ndarray:
    """p_0 = 1 - alpha, p_n = alpha 2^-n, truncated at N.

    ``renormalize`` rescales the retained atoms; ``lumped`` adds the dropped
    tail mass alpha 2^-N to atom N.
    """
    p = np.array([1 - alpha] + [alpha * 2.0**-n for n in range(1, N + 1)])
    if mode == "renormalize":
        return p / p.sum()
    if mode == "lumped":
        p[-1] += alpha * 2.0**-N
        return p
    raise ValueError(f"unknown truncation mode {mode!r}")


def singular_example_tree(alpha: float, N: int, mode: str = "renormalize") -> ScenarioTree:
    """Two-asset model whose dual optimizer loses mass in the limit N -> infinity.

    Root matrix [[1,1],[2,1]]; leaf n has matrix [[1, 2 s_n], [1/s_n, 1]].
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    s = singular_stock_values(N)
    p = singular_example_probs(alpha, N, mode)
    leaf_pis = [[[1.0, 2 * v], [1 / v, 1.0]] for v in s]
    nodes = [{"id": "root", "parent": None, "p": 1.0, "pi": [[1.0, 1.0], [2.0, 1.0]]}]
    for n, (pn, pi) in enumerate(zip(p, leaf_pis)):
        nodes.append({"id": f"s{n}", "parent": "root", "p": float(pn), "pi": pi})
    return build_tree({"nodes": nodes})
