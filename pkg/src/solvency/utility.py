"""Multivariate utility functions supported on the nonnegative orthant.

Additive families use the CRRA building block ``alpha * x**gamma / gamma``
with ``gamma < 1``; ``gamma == 0`` stands for ``alpha * log(x)``.  Their dual
functions ``U*(y) = sup_x U(x) - <x, y>`` are available in closed form.
Cobb-Douglas conjugates are always computed numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("additive-power", "additive-log", "mixed-additive", "cobb-douglas", "linear")


class DomainError(ValueError):
    """Point lies outside the open set where the requested quantity exists."""


class ConjugateNotConverged(RuntimeError):
    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


@dataclass(frozen=True)
class UtilitySpec:
    family: str
    d: int
    alpha: tuple
    gamma: tuple = ()
    c0: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown utility family {self.family!r}")
        alpha = tuple(float(a) for a in self.alpha)
        gamma = tuple(float(g) for g in self.gamma)
        if self.family == "additive-log" and not gamma:
            gamma = (0.0,) * len(alpha)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "c0", float(self.c0))
        if self.d < 1 or len(alpha) != self.d:
            raise ValueError("alpha must have one entry per coordinate")
        if self.family == "cobb-douglas":
            if any(a < 0 for a in alpha) or sum(alpha) >= 1:
                raise ValueError("Cobb-Douglas exponents must be >= 0 with sum < 1")
            return
        if self.family == "linear":
            return
        if len(gamma) != self.d:
            raise ValueError("gamma must have one entry per coordinate")
        if any(a <= 0 for a in alpha):
            raise ValueError("additive weights must be positive")
        if any(g >= 1 for g in gamma):
            raise ValueError("CRRA exponents must be < 1")
        if self.family == "additive-log" and any(g != 0 for g in gamma):
            raise ValueError("additive-log requires gamma == 0")
        if self.family == "additive-power" and any(g == 0 for g in gamma):
            raise ValueError("additive-power requires nonzero gamma")

    # -- constructors -----------------------------------------------------

    @classmethod
    def log(cls, d=1, alpha=None, c0=0.0):
        alpha = (1.0,) * d if alpha is None else tuple(alpha)
        return cls("additive-log", d, alpha, (0.0,) * d, c0)

    @classmethod
    def power(cls, gamma, alpha=None, c0=0.0):
        gamma = tuple(np.atleast_1d(gamma))
        alpha = (1.0,) * len(gamma) if alpha is None else tuple(alpha)
        return cls("additive-power", len(gamma), alpha, gamma, c0)

    @classmethod
    def mixed(cls, gamma, alpha=None, c0=0.0):
        gamma = tuple(gamma)
        alpha = (1.0,) * len(gamma) if alpha is None else tuple(alpha)
        return cls("mixed-additive", len(gamma), alpha, gamma, c0)

    @classmethod
    def cobb_douglas(cls, alpha):
        return cls("cobb-douglas", len(alpha), tuple(alpha))

    @classmethod
    def linear(cls, d=1):
        """Test-only: U(x) = sum(x) on the orthant. Never asymptotically satiable."""
        return cls("linear", d, (1.0,) * d)

    @property
    def additive(self) -> bool:
        return self.family in ("additive-power", "additive-log", "mixed-additive")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "d": self.d,
            "alpha": list(self.alpha),
            "gamma": list(self.gamma),
            "c0": self.c0,
        }

    @classmethod
    def from_dict(cls, data) -> "UtilitySpec":
        return cls(
            data["family"],
            int(data["d"]),
            tuple(float(a) for a in data["alpha"]),
            tuple(float(g) for g in data.get("gamma", ())),
            float(data.get("c0", 0.0)),
        )

    # -- primal side --------------------------------------------------------

    def value(self, x):
        """U(x); -inf outside the orthant and on the boundary when unbounded below."""
        x = np.asarray(x, dtype=float)
        outside = np.any(x < 0, axis=-1)
        xs = np.where(x < 0, 1.0, x)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.additive:
                a, g = np.array(self.alpha), np.array(self.gamma)
                is_log = g == 0
                safe_g = np.where(is_log, 1.0, g)
                terms = np.where(is_log, a * np.log(xs), a * xs**safe_g / safe_g)
                val = terms.sum(axis=-1) + self.c0
            elif self.family == "cobb-douglas":
                val = np.prod(xs ** np.array(self.alpha), axis=-1)
            else:
                val = xs.sum(axis=-1)
        val = np.where(outside, -np.inf, val)
        return float(val) if np.ndim(val) == 0 else val

    def _require_interior(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d or np.any(~(x > 0)) or np.any(~np.isfinite(x)):
            raise DomainError(f"point {x} is not in the open orthant")
        return x

    def grad(self, x):
        x = self._require_interior(x)
        if self.additive:
            a, g = np.array(self.alpha), np.array(self.gamma)
            return np.where(g == 0, a / x, a * x ** (g - 1))
        if self.family == "cobb-douglas":
            return self.value(x)[..., None] * np.array(self.alpha) / x if x.ndim > 1 else self.value(x) * np.array(self.alpha) / x
        return np.ones_like(x)

    def hessian(self, x):
        x = self._require_interior(x)
        if self.additive:
            a, g = np.array(self.alpha), np.array(self.gamma)
            return np.diag(np.where(g == 0, -a / x**2, a * (g - 1) * x ** (g - 2)))
        if self.family == "cobb-douglas":
            a = np.array(self.alpha)
            u = self.value(x)
            return u * (np.outer(a, a) - np.diag(a)) / np.outer(x, x)
        return np.zeros((self.d, self.d))

    # -- dual side ------------------------------------------------------------

    def conjugate(self, y):
        """U*(y) = sup_x {U(x) - <x, y>}, +inf where the supremum diverges."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.d,):
            raise ValueError(f"expected a {self.d}-vector")
        if np.any(y < 0):
            return np.inf
        if self.family == "linear":
            return 0.0 if np.all(y >= 1) else np.inf
        if self.family == "cobb-douglas":
            if np.any(y[np.array(self.alpha) > 0] == 0):
                return np.inf
            return numeric_conjugate(self, y)[0]
        total = self.c0
        for a, g, yi in zip(self.alpha, self.gamma, y):
            if g == 0:
                if yi == 0:
                    return np.inf
                total += a * np.log(a / yi) - a
            else:
                gs = g / (g - 1)
                if yi == 0 and g > 0:
                    return np.inf
                total += -a * (yi / a) ** gs / gs
        return float(total)

    def inverse_marginal(self, y):
        """(grad U)^{-1}(y), equal to -grad U*(y) on the open orthant."""
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.d or np.any(~(y > 0)):
            raise DomainError(f"point {y} is not in the open orthant")
        if self.additive:
            a, g = np.array(self.alpha), np.array(self.gamma)
            safe = np.where(g == 0, 0.5, g)
            return np.where(g == 0, a / y, (y / a) ** (1.0 / (safe - 1)))
        if self.family == "cobb-douglas":
            a = np.array(self.alpha)
            if np.any(a == 0):
                raise DomainError("Cobb-Douglas with a zero exponent has no inverse marginal")
            # at the stationary point x_i = a_i U / y_i, so U^(1-s) = prod (a_i / y_i)^a_i
            level = np.prod((a / y) ** a) ** (1.0 / (1.0 - a.sum()))
            return a * level / y
        raise DomainError("linear utility has no inverse marginal")

    def conjugate_grad(self, y):
        return -self.inverse_marginal(y)

    def conjugate_hessian(self, y):
        """Hessian of U* on the open orthant (additive families)."""
        y = np.asarray(y, dtype=float)
        if not self.additive:
            # (grad U*)' = -(grad U)^{-1}' = -(Hess U)^{-1} at I(y)
            return -np.linalg.inv(self.hessian(self.inverse_marginal(y)))
        if np.any(~(y > 0)):
            raise DomainError(f"point {y} is not in the open orthant")
        a, g = np.array(self.alpha), np.array(self.gamma)
        safe = np.where(g == 0, 0.5, g)
        p = 1.0 / (safe - 1)
        diag = np.where(g == 0, a / y**2, -p / a * (y / a) ** (p - 1))
        return np.diag(diag)


def _golden_max(f, lo, hi, tol=1e-12, max_iter=300):
    invphi = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    s = (a + b) / 2
    return s, f(s)


def numeric_conjugate(U: UtilitySpec, y, box=(1e-8, 1e8), sweeps=2000, rtol=1e-15):
    """Coordinate-wise golden-section sup of U(x) - <x, y> over a log-spaced box.

    Returns (value, maximizer).  Raises ConjugateNotConverged when the
    maximizer sits on the edge of the box.
    """
    y = np.asarray(y, dtype=float)
    lo, hi = np.log(box[0]), np.log(box[1])
    s = np.zeros(U.d)

    def objective(svec):
        x = np.exp(svec)
        return U.value(x) - x @ y

    best = objective(s)
    for _ in range(sweeps):
        prev = best
        for i in range(U.d):
            def line(si, i=i):
                trial = s.copy()
                trial[i] = si
                return objective(trial)

            s[i], best = _golden_max(line, lo, hi)
        if abs(best - prev) <= rtol * (1 + abs(best)):
            break
    edge = (s - lo < 1e-6) | (hi - s < 1e-6)
    if np.any(edge):
        raise ConjugateNotConverged(f"maximizer escaped the search box at coordinates {np.flatnonzero(edge)}", np.exp(s))
    return float(best), np.exp(s)


@dataclass(frozen=True)
class ExtendedUtility:
    """U on the first d of D coordinates, -inf off the nonnegative orthant of R^D."""

    base: UtilitySpec
    total_dim: int

    def __post_init__(self):
        if self.total_dim < self.base.d:
            raise ValueError("total dimension must be at least the consumption dimension")

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def D(self) -> int:
        return self.total_dim

    def value(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.all(x >= 0, axis=-1)
        val = self.base.value(x[..., : self.d])
        val = np.where(inside, val, -np.inf)
        return float(val) if np.ndim(val) == 0 else val

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(self.D)
        out[: self.d] = self.base.grad(x[: self.d])
        return out

    def conjugate(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < 0):
            return np.inf
        return self.base.conjugate(y[: self.d])

    def inverse_marginal(self, y):
        """(I(P y), 0) for y with strictly positive first d coordinates."""
        y = np.asarray(y, dtype=float)
        out = np.zeros(self.D)
        out[: self.d] = self.base.inverse_marginal(y[: self.d])
        return out


def extend(U: UtilitySpec, D: int) -> ExtendedUtility:
    return ExtendedUtility(U, D)


# -- property checkers -------------------------------------------------------


@dataclass
class PropertyReport:
    name: str
    verdict: str  # "pass" | "fail" | "inconclusive"
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "witnesses": _jsonable(self.witnesses),
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def check_asymptotic_satiability(U: UtilitySpec, eps: float, max_doublings: int = 80) -> PropertyReport:
    """Search the diagonal ray r*1, r = 1, 2, 4, ... for a marginal inside [0, eps)^d."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    r = 1.0
    last = None
    for _ in range(max_doublings):
        x = np.full(U.d, r)
        g = U.grad(x)
        last = (x, g)
        if np.all((g >= 0) & (g < eps)):
            return PropertyReport("asymptotic_satiability", "pass", [{"x": x, "grad": g}], {"eps": eps})
        r *= 2
    return PropertyReport(
        "asymptotic_satiability",
        "inconclusive",
        [{"x": last[0], "grad": last[1]}],
        {"eps": eps, "reason": f"no marginal below eps on the ray up to r = {r / 2:g}"},
    )


def check_mvra(U: UtilitySpec, n_samples: int = 1000, seed: int = 0, rtol: float = 1e-10) -> PropertyReport:
    """Sample U(x) + U(x+z+z') <= U(x+z) + U(x+z') over the orthant."""
    rng = np.random.default_rng(seed)
    d = U.d
    for k in range(n_samples):
        x = 10 ** rng.uniform(-2, 2, d)
        if k % 2 == 0 and d > 1:
            i, j = rng.choice(d, 2, replace=False)
            z = np.zeros(d)
            zp = np.zeros(d)
            z[i] = 10 ** rng.uniform(-2, 2)
            zp[j] = 10 ** rng.uniform(-2, 2)
        else:
            z = 10 ** rng.uniform(-2, 2, d)
            zp = 10 ** rng.uniform(-2, 2, d)
        lhs = U.value(x) + U.value(x + z + zp)
        rhs = U.value(x + z) + U.value(x + zp)
        if lhs > rhs + rtol * (1 + abs(lhs) + abs(rhs)):
            return PropertyReport(
                "multivariate_risk_aversion",
                "fail",
                [{"x": x, "z": z, "z_prime": zp, "lhs": lhs, "rhs": rhs}],
                {"samples_checked": k + 1},
            )
    return PropertyReport("multivariate_risk_aversion", "pass", [], {"samples_checked": n_samples, "seed": seed})


def _growth_estimate(U, eps, span, points):
    axis = np.logspace(-span, span, points)
    grids = np.meshgrid(*([axis] * U.d), indexing="ij")
    ys = np.stack([g.ravel() for g in grids], axis=1)
    best, arg = 0.0, None
    for y in ys:
        num = U.conjugate(eps * y)
        den = max(U.conjugate(y), 0.0) + 1.0
        if not np.isfinite(num):
            return np.inf, y
        ratio = num / den
        if ratio > best:
            best, arg = ratio, y
    return best, arg


def check_growth(U: UtilitySpec, eps_grid=(0.5, 0.1, 0.01), span: float = 4.0, points: int = 41, rtol: float = 0.25) -> PropertyReport:
    """Estimate zeta(eps) = sup_y U*(eps y) / (U*(y)^+ + 1) on a log grid, then on a doubled grid.

    Passes when every estimate is finite and stable under doubling of the
    grid's span and resolution.
    """
    if any(not (0 < e <= 1) for e in eps_grid):
        raise ValueError("eps grid must lie in (0, 1]")
    zeta = {}
    for eps in eps_grid:
        try:
            small, _ = _growth_estimate(U, eps, span, points)
            large, arg = _growth_estimate(U, eps, 2 * span, 2 * points - 1)
        except ConjugateNotConverged as exc:
            return PropertyReport("growth_condition", "inconclusive", [{"x": exc.x}], {"eps": eps, "reason": str(exc)})
        zeta[eps] = (small, large)
        if not np.isfinite(large) or large > small * (1 + rtol) + 1e-9:
            ray = [
                {"t": t, "y": arg * t, "ratio": U.conjugate(eps * arg * t) / (max(U.conjugate(arg * t), 0.0) + 1.0)}
                for t in (1.0,)
            ]
            return PropertyReport(
                "growth_condition",
                "fail",
                ray,
                {"eps": eps, "zeta_span": small, "zeta_doubled_span": large, "zeta": zeta},
            )
    return PropertyReport("growth_condition", "pass", [], {"zeta": {e: v[1] for e, v in zeta.items()}})


def _bounded_below(U: UtilitySpec) -> bool:
    """Heuristic: U stays bounded along x_i -> 0 on each coordinate and on the diagonal."""
    dirs = [np.eye(U.d)[i] for i in range(U.d)] + [np.ones(U.d)]
    for e in dirs:
        vals = []
        for k in range(2, 32, 2):
            x = np.where(e > 0, 10.0**-k, 1.0)
            vals.append(U.value(x))
        vals = np.array(vals)
        if not np.all(np.isfinite(vals)):
            return False
        steps = np.abs(np.diff(vals))
        if steps[-1] > 1e-6 * (1 + abs(vals[-1])):
            return False
    return True


def estimate_rae(U: UtilitySpec, c_grid=(0.0, 1.0, 10.0, 100.0, 1000.0), radii=(1e2, 1e4, 1e6, 1e8), delta: float = 0.05, shell_points: int = 25) -> PropertyReport:
    """Heuristic estimate of sup_c liminf_{|x|->inf} (U(x)+c)/<x, grad U(x)>.

    The liminf over an unbounded region cannot be decided from samples; the
    verdict records the radius schedule it was computed on.
    """
    details = {"heuristic": True, "radii": list(radii), "c_grid": list(c_grid)}
    if U.d > 1 and not _bounded_below(U):
        details["reason"] = "utility unbounded below on the open orthant"
        return PropertyReport("reasonable_asymptotic_elasticity", "inconclusive", [], details)

    def shell(R):
        pts = []
        others = np.logspace(-6, 0, shell_points) * R
        for i in range(U.d):
            if U.d == 1:
                pts.append(np.array([R]))
                continue
            for v in others:
                x = np.full(U.d, v)
                x[i] = R
                pts.append(x)
        return pts

    estimates = {}
    witness = None
    for c in c_grid:
        per_radius = []
        for R in radii:
            ratios = [(U.value(x) + c) / (x @ U.grad(x)) for x in shell(R)]
            per_radius.append(min(ratios))
        estimates[c] = per_radius
    # liminf proxy: the smaller of the two largest radii
    by_c = {c: min(v[-2:]) for c, v in estimates.items()}
    best_c = max(by_c, key=by_c.get)
    est = by_c[best_c]
    details.update({"estimate": est, "best_c": best_c, "per_radius": estimates})
    witness = [{"c": best_c, "estimate": est}]
    if est > 1 + delta:
        return PropertyReport("reasonable_asymptotic_elasticity", "pass", witness, details)
    if est <= 1:
        return PropertyReport("reasonable_asymptotic_elasticity", "fail", witness, details)
    return PropertyReport("reasonable_asymptotic_elasticity", "inconclusive", witness, details)
