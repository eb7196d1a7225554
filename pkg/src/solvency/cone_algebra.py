"""Bid-ask matrices, solvency cones and their polars."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ._lp import solve_lp

MEMBERSHIP_TOL = 1e-9


class StructuralError(ValueError):
    """Input cannot be interpreted as a bid-ask matrix at all."""


class LPError(RuntimeError):
    """The LP solver failed for reasons other than infeasibility."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class Violation:
    condition: str  # "ii" or "iii"
    indices: tuple  # 1-based
    detail: str


class InvalidBidAsk(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        msgs = "; ".join(v.detail for v in self.violations)
        super().__init__(f"not a bid-ask matrix: {msgs}")


@dataclass(frozen=True, eq=False)
class BidAskMatrix:
    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __eq__(self, other):
        return isinstance(other, BidAskMatrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    @classmethod
    def frictionless(cls, prices) -> "BidAskMatrix":
        """pi[i][j] = p_j / p_i."""
        p = np.asarray(prices, dtype=float)
        return cls(p[None, :] / p[:, None])


def check_bid_ask(entries, rtol: float = 1e-12) -> list[Violation]:
    """List every violated bid-ask condition; empty means valid.

    Raises StructuralError for non-square, non-finite or non-positive input.
    """
    arr = np.asarray(entries, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 2:
        raise StructuralError(f"bid-ask matrix must be square with D >= 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise StructuralError("bid-ask matrix has non-finite entries")
    if np.any(arr <= 0):
        i, j = np.argwhere(arr <= 0)[0]
        raise StructuralError(f"entry ({i + 1},{j + 1}) = {arr[i, j]} is not strictly positive")

    D = arr.shape[0]
    out = []
    for i in range(D):
        if abs(arr[i, i] - 1.0) > rtol:
            out.append(Violation("ii", (i + 1,), f"pi[{i + 1}][{i + 1}] = {arr[i, i]} != 1"))
    for i, j, k in product(range(D), repeat=3):
        if k == i or k == j:
            continue  # holds with equality once the diagonal is 1
        bound = arr[i, k] * arr[k, j]
        if arr[i, j] > bound * (1 + rtol):
            out.append(
                Violation(
                    "iii",
                    (i + 1, j + 1, k + 1),
                    f"pi[{i + 1}][{j + 1}] = {arr[i, j]} > pi[{i + 1}][{k + 1}]*pi[{k + 1}][{j + 1}] = {bound}",
                )
            )
    return out


def validate_bid_ask(entries) -> BidAskMatrix:
    violations = check_bid_ask(entries)
    if violations:
        raise InvalidBidAsk(violations)
    return BidAskMatrix(np.asarray(entries, dtype=float))


@dataclass(frozen=True, eq=False)
class SolvencyCone:
    """Polyhedral cone given by its generators (rows)."""

    generators: np.ndarray

    def __post_init__(self):
        g = np.array(self.generators, dtype=float)
        g.setflags(write=False)
        object.__setattr__(self, "generators", g)

    @property
    def dim(self) -> int:
        return self.generators.shape[1]

    def normalized(self) -> np.ndarray:
        return _dedup(self.generators)

    def contains(self, x, tol: float = MEMBERSHIP_TOL):
        return cone_contains(self.generators, x, tol)


@dataclass(frozen=True, eq=False)
class PolarCone:
    """{w : <g, w> >= 0 for every row g of halfspaces}."""

    halfspaces: np.ndarray

    def __post_init__(self):
        h = np.array(self.halfspaces, dtype=float)
        h.setflags(write=False)
        object.__setattr__(self, "halfspaces", h)

    @property
    def dim(self) -> int:
        return self.halfspaces.shape[1]

    def contains(self, w, tol: float = MEMBERSHIP_TOL) -> bool:
        return bool(np.all(self.halfspaces @ np.asarray(w, dtype=float) >= -tol))


def _dedup(gens: np.ndarray) -> np.ndarray:
    scaled = gens / np.max(np.abs(gens), axis=1, keepdims=True)
    _, idx = np.unique(np.round(scaled, 12), axis=0, return_index=True)
    return scaled[np.sort(idx)]


def solvency_cone(pi: BidAskMatrix) -> SolvencyCone:
    """Generators e^i followed by pi[i][j] e^i - e^j for i != j."""
    D = pi.dim
    eye = np.eye(D)
    gens = [eye[i] for i in range(D)]
    for i in range(D):
        for j in range(D):
            if i != j:
                gens.append(pi.entries[i, j] * eye[i] - eye[j])
    # distinct (i, j) pairs have distinct supports, so no two generators are parallel
    return SolvencyCone(np.array(gens))


def polar_cone(K: SolvencyCone) -> PolarCone:
    return PolarCone(K.generators.copy())


@dataclass
class Membership:
    member: bool
    residual: float
    coefficients: np.ndarray | None = None  # x ~= coefficients @ generators
    separator: np.ndarray | None = None  # <g, w> >= 0 for all g and <x, w> < 0

    def __bool__(self):
        return self.member


def cone_contains(generators, x, tol: float = MEMBERSHIP_TOL) -> Membership:
    """Test whether x lies within sup-norm distance tol of cone(generators)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    G_raw = np.asarray(generators, dtype=float)
    scale = np.max(np.abs(G_raw), axis=1)
    G = G_raw / scale[:, None]
    x = np.asarray(x, dtype=float)
    m, D = G.shape
    # variables: coefficients (m), residual r; minimize r with |G^T c - x| <= r
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A = np.block([[G.T, -np.ones((D, 1))], [-G.T, -np.ones((D, 1))]])
    b = np.concatenate([x, -x])
    res = solve_lp(c, A_ub=A, b_ub=b, bounds=[(0, None)] * (m + 1))
    if res.status != 0:
        raise LPError(f"membership LP failed: {res.message}", residuals={"status": res.status})
    r = float(res.x[-1])
    coeffs = res.x[:m] / scale
    if r <= tol:
        return Membership(True, r, coefficients=coeffs)
    # separating direction: minimize <x, w> over the polar with |w|_inf <= 1
    sep = solve_lp(x, A_ub=-G, b_ub=np.zeros(m), bounds=[(-1, 1)] * D)
    if sep.status != 0:
        raise LPError(f"separation LP failed: {sep.message}", residuals={"membership": r})
    return Membership(False, r, coefficients=coeffs, separator=sep.x)


def interior_contains(polar: PolarCone, w, margin: float) -> bool:
    """Strict membership: <g, w> >= margin * |w|_1 for every halfspace g."""
    if margin <= 0:
        raise ValueError("margin must be positive")
    w = np.asarray(w, dtype=float)
    scale = np.sum(np.abs(w))
    if scale == 0:
        return False
    return bool(np.all(polar.halfspaces @ w >= margin * scale))
