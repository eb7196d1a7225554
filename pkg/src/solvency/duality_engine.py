"""Concave maximization over polyhedral cones and its conjugate dual.

The numerical core is a weighted log-barrier Newton method for

    minimize f(v)  subject to  G v + h >= 0,  E v = e

with a per-row barrier weight.  Weighting rows by scenario probabilities
keeps the central path scale free when some probabilities are tiny.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve, null_space

from ._lp import solve_lp


class NonConvergence(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NoStrictlyFeasiblePoint(RuntimeError):
    def __init__(self, message, margin=None, point=None):
        super().__init__(message)
        self.margin = margin
        self.point = point


@dataclass
class BarrierResult:
    v: np.ndarray
    value: float
    status: str  # "optimal" | "unbounded"
    multipliers: np.ndarray
    slacks: np.ndarray
    t: float
    newton_iterations: int
    outer_iterations: int
    history: list = field(default_factory=list)


def phase_one(G, h, E=None, e=None, box=1e6):
    """Maximize the smallest normalized slack. Returns (v, margin)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float)
    m, n = G.shape
    norms = np.linalg.norm(G, axis=1)
    norms[norms == 0] = 1.0
    # variables (v, s): maximize s with G v + h >= s * |g|, s <= 1
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-G, norms[:, None]])
    b_ub = h
    A_eq = b_eq = None
    if E is not None and len(E):
        E = np.atleast_2d(E)
        A_eq = np.hstack([E, np.zeros((E.shape[0], 1))])
        b_eq = np.asarray(e, dtype=float)
    bounds = [(-box, box)] * n + [(None, 1.0)]
    res = solve_lp(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds)
    if res.status == 2:
        return None, -np.inf
    if res.status != 0:
        raise NonConvergence(f"phase-one LP failed: {res.message}")
    return res.x[:n], float(res.x[-1])


def _newton_direction(H, g):
    """Newton step with symmetric diagonal scaling; Cholesky, else least squares."""
    d = np.sqrt(np.abs(np.diag(H)))
    d[d < 1e-300] = 1.0
    Hs = H / np.outer(d, d)
    gs = g / d
    Hs[np.diag_indices_from(Hs)] += 1e-14
    try:
        step = -cho_solve(cho_factor(Hs), gs)
    except np.linalg.LinAlgError:
        step = -np.linalg.lstsq(Hs, gs, rcond=None)[0]
    return step / d


def barrier_minimize(
    objective: Callable,
    G,
    h,
    weights=None,
    E=None,
    e=None,
    v0=None,
    null_basis=None,
    gap_tol: float = 1e-10,
    mu: float = 10.0,
    max_newton: int = 6000,
    unbounded_at: float = 1e12,
):
    """Minimize a convex objective over an open polyhedron.

    ``objective(v)`` returns ``(f, grad, hess)``, with ``f = +inf`` outside
    its domain.  Rows of ``G v + h >= 0`` carry barrier ``weights`` (default
    ones).  Equalities ``E v = e`` are handled by stepping along a basis of
    their null space (``null_basis`` if given) while storing the full vector
    v, so that a coordinate close to its bound keeps full relative precision.
    Stops when ``sum(weights) / t <= gap_tol``.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float)
    m, n = G.shape
    w = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
    if E is not None and len(E):
        E = np.atleast_2d(np.asarray(E, dtype=float))
        e = np.asarray(e, dtype=float)
        N = null_space(E) if null_basis is None else np.asarray(null_basis, dtype=float)
    else:
        E = None
        N = None

    def feasible_start(vv):
        if E is None:
            return vv
        # remove the LP's equality residual before any coordinate gets small
        return vv - np.linalg.lstsq(E, E @ vv - e, rcond=None)[0]

    start_ok = (
        v0 is not None
        and np.all(G @ v0 + h > 0)
        and (E is None or np.max(np.abs(E @ v0 - e)) <= 1e-12 * (1 + np.max(np.abs(e))))
        and np.isfinite(objective(v0)[0])
    )
    if start_ok:
        v = np.asarray(v0, dtype=float).copy()
    else:
        v, margin = phase_one(G, h, E, e)
        if v is None or margin <= 1e-12:
            raise NoStrictlyFeasiblePoint("constraint set has no strictly feasible point", margin, v)
        v = feasible_start(v)
        if np.any(G @ v + h <= 0):
            raise NoStrictlyFeasiblePoint("equality repair left the strict interior", margin, v)

    f0, g0, _ = objective(v)
    if not np.isfinite(f0):
        raise NoStrictlyFeasiblePoint("objective is infinite at the strictly feasible start", point=v)

    def reduce(vec):
        return vec if N is None else N.T @ vec

    def expand(vec):
        return vec if N is None else N @ vec

    # initial t balances objective and barrier gradients
    s = G @ v + h
    t = max(1.0, float(np.linalg.norm(reduce(G.T @ (w / s))) / max(np.linalg.norm(reduce(g0)), 1e-12)))
    wsum = w.sum()
    history = []
    newton = 0
    outer = 0
    v_start_norm = np.linalg.norm(v)

    def phi(vv, tt):
        ss = G @ vv + h
        if np.any(ss <= 0):
            return np.inf
        f = objective(vv)[0]
        if not np.isfinite(f):
            return np.inf
        return tt * f - np.sum(w * np.log(ss))

    while True:
        outer += 1
        # centering
        for _ in range(200):
            f, g, H = objective(v)
            s = G @ v + h
            history.append(f)
            if f < -unbounded_at * (1 + abs(f0)) or np.linalg.norm(v) > unbounded_at * (1 + v_start_norm):
                return BarrierResult(v, -np.inf, "unbounded", w / (t * s), s, t, newton, outer, history)
            grad = t * g - G.T @ (w / s)
            Hb = t * H + (G.T * (w / s**2)) @ G
            if N is not None:
                Hb = N.T @ Hb @ N
            gy = reduce(grad)
            dy = _newton_direction(Hb, gy)
            dec2 = -gy @ dy
            if dec2 / 2 <= 1e-10:
                break
            step = expand(dy)
            # fraction to boundary, then Armijo
            ds = G @ step
            neg = ds < 0
            alpha = min(1.0, 0.99 * np.min(-s[neg] / ds[neg])) if np.any(neg) else 1.0
            cur = phi(v, t)
            val = np.inf
            while alpha > 1e-16:
                val = phi(v + alpha * step, t)
                if val <= cur - 0.25 * alpha * dec2 or (np.isfinite(val) and abs(val - cur) <= 1e-15 * abs(cur) and alpha == 1.0):
                    break
                alpha *= 0.5
            newton += 1
            if newton > max_newton:
                raise NonConvergence("Newton budget exhausted", best=v)
            if alpha <= 1e-16:
                break  # no further progress possible at this precision
            v = v + alpha * step
            if cur - val <= 1e-15 * (1 + abs(cur)):
                break  # stagnation at rounding level
        if wsum / t <= gap_tol:
            break
        t *= mu
    f = objective(v)[0]
    s = G @ v + h
    return BarrierResult(v, f, "optimal", w / (t * s), s, t, newton, outer, history)


# -- conic programs ----------------------------------------------------------


@dataclass(frozen=True)
class SmoothFunction:
    """Value, gradient and Hessian handles of a function on R^n."""

    value: Callable
    grad: Callable
    hess: Callable


def utility_handles(U) -> tuple[SmoothFunction, SmoothFunction]:
    """Objective and conjugate handles for a UtilitySpec (or ExtendedUtility-like object)."""
    return (
        SmoothFunction(U.value, U.grad, U.hessian),
        SmoothFunction(U.conjugate, U.conjugate_grad, U.conjugate_hessian),
    )


@dataclass
class ConicProgram:
    """maximize U(shift + x) over x in C, paired with min over (-C)* of U*(y) + <shift, y>.

    C is given either by generators (C = cone of the rows) or by halfspaces
    (C = {x : A x >= 0}).  ``domain`` rows a state <a, z> >= 0 on the open
    domain of U at z = shift + x, and ``dual_domain`` rows do the same for U*.
    """

    dim: int
    objective: SmoothFunction
    conjugate: SmoothFunction
    generators: np.ndarray | None = None
    halfspaces: np.ndarray | None = None
    shift: np.ndarray | None = None
    domain: np.ndarray | None = None
    dual_domain: np.ndarray | None = None

    def __post_init__(self):
        if (self.generators is None) == (self.halfspaces is None):
            raise ValueError("give exactly one of generators or halfspaces")
        self.shift = np.zeros(self.dim) if self.shift is None else np.asarray(self.shift, dtype=float)

    @classmethod
    def from_utility(cls, U, generators=None, halfspaces=None, shift=None):
        obj, conj = utility_handles(U)
        n = U.d
        return cls(n, obj, conj, generators, halfspaces, shift, np.eye(n), np.eye(n))

    def is_full_dimensional(self) -> bool:
        if self.generators is not None:
            return np.linalg.matrix_rank(np.atleast_2d(self.generators)) == self.dim
        _, margin = phase_one(np.atleast_2d(self.halfspaces), np.zeros(len(self.halfspaces)), box=1.0)
        return margin > 1e-9


@dataclass
class SolveReport:
    primal_value: float
    dual_value: float
    gap: float
    primal_point: np.ndarray | None
    dual_point: np.ndarray | None
    kkt_residuals: dict
    iterations: dict
    status: str = "ok"  # "ok" | "degenerate" | "gap-violation"

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else [float(v) for v in a]

        return {
            "status": self.status,
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "primal_point": arr(self.primal_point),
            "dual_point": arr(self.dual_point),
            "kkt_residuals": {k: float(v) for k, v in self.kkt_residuals.items()},
            "iterations": dict(self.iterations),
        }


@dataclass
class ConeSolution:
    point: np.ndarray | None
    value: float
    iterations: int
    residuals: dict


def _empty_rows(n):
    return np.zeros((0, n))


def maximize_over_cone(prog: ConicProgram, start=None, tol: float = 1e-10) -> ConeSolution:
    """Maximize U(shift + x) over x in C.

    Returns value -inf when C + shift misses the open domain of U.  Raises
    NonConvergence when the objective is unbounded above on C.
    """
    n = prog.dim
    obj = prog.objective
    dom = _empty_rows(n) if prog.domain is None else np.atleast_2d(prog.domain)
    if prog.generators is not None:
        gens = np.atleast_2d(np.asarray(prog.generators, dtype=float))
        k = gens.shape[0]

        def point(lam):
            return prog.shift + gens.T @ lam

        def fn(lam):
            z = point(lam)
            val = obj.value(z)
            if not np.isfinite(val):
                return np.inf, None, None
            return -val, -gens @ obj.grad(z), -gens @ obj.hess(z) @ gens.T

        G = np.vstack([np.eye(k), dom @ gens.T])
        h = np.concatenate([np.zeros(k), dom @ prog.shift])
        v0 = None if start is None else np.linalg.lstsq(gens.T, np.asarray(start) - prog.shift, rcond=None)[0]
    else:
        A = np.atleast_2d(np.asarray(prog.halfspaces, dtype=float))

        def point(x):
            return prog.shift + x

        def fn(x):
            z = point(x)
            val = obj.value(z)
            if not np.isfinite(val):
                return np.inf, None, None
            return -val, -obj.grad(z), -obj.hess(z)

        G = np.vstack([A, dom])
        h = np.concatenate([np.zeros(len(A)), dom @ prog.shift])
        v0 = None if start is None else np.asarray(start, dtype=float)
    try:
        res = barrier_minimize(fn, G, h, v0=v0, gap_tol=tol)
    except NoStrictlyFeasiblePoint as exc:
        if exc.point is not None and not np.isfinite(obj.value(point(exc.point))):
            return ConeSolution(None, -np.inf, 0, {"phase_one_margin": exc.margin})
        if exc.point is None:
            return ConeSolution(None, -np.inf, 0, {"phase_one_margin": -np.inf})
        raise
    if res.status == "unbounded":
        raise NonConvergence("objective is unbounded above over the cone", best=point(res.v))
    z = point(res.v)
    return ConeSolution(z - prog.shift, -res.value, res.newton_iterations, {"duality_measure": float(np.sum(res.multipliers * res.slacks))})


@dataclass
class DualSolution:
    point: np.ndarray | None
    value: float
    iterations: int
    sequence: list
    degenerate: bool = False


def minimize_dual(prog: ConicProgram, tol: float = 1e-10) -> DualSolution:
    """Minimize U*(y) + <shift, y> over y in (-C)*.

    A degenerate report (value -inf, with the decreasing sequence of dual
    values) is returned when the dual is unbounded below.
    """
    n = prog.dim
    conj = prog.conjugate
    dom = _empty_rows(n) if prog.dual_domain is None else np.atleast_2d(prog.dual_domain)
    if prog.generators is not None:
        # (-C)* = {y : <c, y> <= 0 for every generator c}
        gens = np.atleast_2d(np.asarray(prog.generators, dtype=float))
        G = np.vstack([-gens, dom])
        h = np.zeros(len(G))

        def to_y(v):
            return v
    else:
        # (-C)* = -cone(rows of A)
        A = np.atleast_2d(np.asarray(prog.halfspaces, dtype=float))
        k = A.shape[0]
        G = np.vstack([np.eye(k), -dom @ A.T])
        h = np.zeros(len(G))

        def to_y(mu):
            return -A.T @ mu

    J = np.eye(n) if prog.generators is not None else -np.atleast_2d(prog.halfspaces).T

    def fn(v):
        y = to_y(v)
        val = conj.value(y)
        if not np.isfinite(val):
            return np.inf, None, None
        g = conj.grad(y) + prog.shift
        return val + prog.shift @ y, J.T @ g, J.T @ conj.hess(y) @ J

    try:
        res = barrier_minimize(fn, G, h, gap_tol=tol)
    except NoStrictlyFeasiblePoint:
        return DualSolution(None, np.inf, 0, [])
    if res.status == "unbounded":
        return DualSolution(to_y(res.v), -np.inf, res.newton_iterations, res.history, degenerate=True)
    return DualSolution(to_y(res.v), res.value, res.newton_iterations, res.history)


def verify_gap(prog: ConicProgram, tol: float = 1e-5) -> SolveReport:
    """Solve both sides and compare. Part-2 instances must show -inf on both."""
    if not prog.is_full_dimensional():
        raise ValueError("the harness requires a cone with nonempty interior")
    dual = minimize_dual(prog)
    try:
        primal = maximize_over_cone(prog)
    except NonConvergence as exc:
        primal = ConeSolution(exc.best, np.inf, 0, {})
    iters = {"primal": primal.iterations, "dual": dual.iterations}
    if dual.degenerate or primal.value == -np.inf:
        status = "degenerate" if (dual.degenerate and primal.value == -np.inf) else "gap-violation"
        return SolveReport(primal.value, dual.value, np.nan, primal.point, dual.point, {}, iters, status)
    gap = dual.value - primal.value
    residuals = {"gap": gap}
    if dual.point is not None:
        if prog.generators is not None:
            residuals["dual_feasibility"] = max(0.0, float(np.max(np.atleast_2d(prog.generators) @ dual.point)))
        else:
            residuals["dual_feasibility"] = 0.0
    status = "ok" if abs(gap) <= tol * (1 + abs(primal.value)) else "gap-violation"
    return SolveReport(primal.value, dual.value, gap, primal.point, dual.point, residuals, iters, status)
