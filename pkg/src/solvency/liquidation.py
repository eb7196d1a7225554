"""Terminal liquidation: the best utility reachable by converting a portfolio at T."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._lp import solve_lp
from .cone_algebra import LPError, BidAskMatrix, cone_contains, solvency_cone
from .duality_engine import barrier_minimize
from .market import ScenarioTree, interior_margin, tree_from_arrays
from .primal_dual import _extended, solve_primal


@dataclass
class LiquidationResult:
    xi: np.ndarray | None  # post-liquidation consumption bundle per leaf
    leaf_values: np.ndarray
    value: float  # expected utility
    W: np.ndarray | None = None  # pre-liquidation holdings per leaf
    in_cone: bool = True


def _pi(pi) -> BidAskMatrix:
    return pi if isinstance(pi, BidAskMatrix) else BidAskMatrix(np.asarray(pi, dtype=float))


def liquidation_utility(U, pi, W):
    """max U(xi) over xi >= 0 with (xi, 0) - W in -K(pi).

    Returns (value, xi).  Outside K(pi) the value is -inf and xi is None.
    """
    pi = _pi(pi)
    W = np.asarray(W, dtype=float)
    Ue = _extended(U, pi.dim)
    if not cone_contains(solvency_cone(pi).generators, W, 1e-12).member:
        return -np.inf, None
    tree = tree_from_arrays([None], [1.0], [pi.entries])
    sol = solve_primal(tree, Ue, W)
    if sol.X is None:
        return sol.value, np.zeros(Ue.d)
    return sol.value, sol.X[0, : Ue.d]


def liquidation_value_d1(pi, W) -> float:
    """l(W) = sup{xi >= 0 : (xi, 0) - W in -K(pi)}, in units of the first asset."""
    pi = _pi(pi)
    W = np.asarray(W, dtype=float)
    gens = solvency_cone(pi).generators
    m, D = gens.shape
    # variables (xi, mu): W - xi e1 = G^T mu
    c = np.zeros(1 + m)
    c[0] = -1.0
    A_eq = np.hstack([np.eye(D)[:, [0]], gens.T])
    res = solve_lp(c, A_eq=A_eq, b_eq=W, bounds=[(0, None)] * (1 + m))
    if res.status == 2:
        return -np.inf
    if res.status != 0:
        raise LPError(f"liquidation LP failed: {res.message}")
    return float(res.x[0]) + 0.0  # normalize -0.0


def solve_liquidation_formulation(tree: ScenarioTree, U, x, gap_tol: float = 1e-11) -> LiquidationResult:
    """Maximize E[U-bar(W)] over holdings W just before the terminal trade.

    Solved jointly in (pre-terminal trades, terminal liquidation trades, xi)
    so that U-bar is never differentiated.
    """
    Ue = _extended(U, tree.D)
    base, d, D = Ue.base, Ue.d, tree.D
    x = np.asarray(x, dtype=float)
    leaves = tree.leaves
    p = tree.leaf_probabilities
    L = len(leaves)

    # pre-terminal trades at internal nodes
    blocks = []
    off = 0
    for n in tree.nodes:
        if tree.is_leaf(n.id):
            continue
        g = solvency_cone(n.pi).generators
        blocks.append((n.id, slice(off, off + len(g)), g))
        off += len(g)
    n_lam = off
    leaf_gens = [solvency_cone(l.pi).generators for l in leaves]
    mu_off = []
    for g in leaf_gens:
        mu_off.append(slice(off, off + len(g)))
        off += len(g)
    xi0 = off
    nv = off + L * d

    # W_l = x - sum over internal ancestors of G^T lam;  W_l - (xi_l, 0) - G_l^T mu_l = 0
    slot = {nid: (sl, g) for nid, sl, g in blocks}
    E = np.zeros((L * D, nv))
    for k, leaf in enumerate(leaves):
        rows = slice(k * D, (k + 1) * D)
        for a in tree.path(leaf.id)[:-1]:
            sl, g = slot[a]
            E[rows, sl] -= g.T
        E[rows, mu_off[k]] -= leaf_gens[k].T
        E[k * D : k * D + d, xi0 + k * d : xi0 + (k + 1) * d] -= np.eye(d)
    e = -np.tile(x, L)

    w = np.zeros(nv)
    for nid, sl, _ in blocks:
        w[sl] = tree.node(nid).p
    for k in range(L):
        w[mu_off[k]] = p[k]
        w[xi0 + k * d : xi0 + (k + 1) * d] = p[k]

    def objective(v):
        xi = v[xi0:].reshape(L, d)
        vals = np.array([base.value(r) for r in xi])
        total = float(p @ vals)
        if not np.isfinite(total):
            return np.inf, None, None
        g = np.zeros(nv)
        H = np.zeros((nv, nv))
        for k in range(L):
            lo = xi0 + k * d
            g[lo : lo + d] = -p[k] * base.grad(xi[k])
            H[lo : lo + d, lo : lo + d] = -p[k] * base.hessian(xi[k])
        return -total, g, H

    if interior_margin(tree, x)[0] <= 0:
        return LiquidationResult(None, np.full(L, -np.inf), -np.inf)
    res = barrier_minimize(objective, np.eye(nv), np.zeros(nv), weights=w, E=E, e=e, gap_tol=gap_tol)
    v = res.v
    xi = v[xi0:].reshape(L, d)
    W = np.zeros((L, D))
    for k, leaf in enumerate(leaves):
        W[k] = x + sum(-slot[a][1].T @ v[slot[a][0]] for a in tree.path(leaf.id)[:-1]) if n_lam else x
    leaf_vals = np.array([base.value(r) for r in xi])
    return LiquidationResult(xi, leaf_vals, float(p @ leaf_vals), W)


def composed_optimizer(result: LiquidationResult, D: int) -> np.ndarray:
    """(xi, 0) per leaf."""
    out = np.zeros((len(result.xi), D))
    out[:, : result.xi.shape[1]] = result.xi
    return out
