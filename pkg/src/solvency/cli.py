"""Command-line entry point.

Exit codes: 0 success, 1 infeasible or degenerate model, 2 invalid
configuration, 3 internal consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from . import __version__
from .cone_algebra import InvalidBidAsk, StructuralError, interior_contains, polar_cone, solvency_cone, validate_bid_ask, cone_contains
from .liquidation import composed_optimizer, solve_liquidation_formulation
from .market import NoPriceSystem, TreeConfigError, build_tree, find_scps, is_interior, nonstrict_example_tree
from .primal_dual import (
    nonstrict_closed_form,
    nonstrict_grid,
    nonstrict_utility,
    recover_primal,
    singular_limits,
    singular_sweep,
    solve_dual,
    solve_primal,
    supergradient_probe,
)
from .utility import UtilitySpec, check_asymptotic_satiability, check_growth, check_mvra, estimate_rae

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG, EXIT_CONSISTENCY = 0, 1, 2, 3
DEFAULT_OPTIONS = {"tol": "1e-5", "margin": "1e-6", "h": "1e-3"}


class ConfigError(ValueError):
    pass


def _dec(v) -> float:
    try:
        return float(Decimal(str(v)))
    except InvalidOperation:
        raise ConfigError(f"not a number: {v!r}")


def _dec_str(v: float) -> str:
    return repr(float(v))


def _vector(text) -> list:
    if isinstance(text, str):
        text = [t for t in text.split(",") if t.strip()]
    return [_dec(t) for t in text]


@dataclass
class RunConfig:
    tree: dict | None = None
    utility: dict | None = None
    x: list | None = None
    options: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def parse(cls, data: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
        tree = data.get("tree")
        if "tree_file" in data:
            path = Path(data["tree_file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ConfigError(f"tree file {path} does not exist")
            tree = json.loads(path.read_text())
        options = {k: str(v) for k, v in {**DEFAULT_OPTIONS, **data.get("options", {})}.items()}
        for key in ("tol", "margin", "h"):
            if _dec(options[key]) <= 0 and not (key == "margin" and _dec(options[key]) == 0):
                raise ConfigError(f"option {key} must be positive")
        x = None if data.get("x") is None else _vector(data["x"])
        seed = int(data.get("seed", 0))
        return cls(tree, data.get("utility"), x, options, seed)

    def emit(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION, "seed": self.seed, "options": dict(self.options)}
        if self.tree is not None:
            out["tree"] = build_tree(self.tree).to_config()
        if self.utility is not None:
            out["utility"] = _utility_dict(self.utility_spec())
        if self.x is not None:
            out["x"] = [_dec_str(v) for v in self.x]
        return out

    def option(self, key) -> float:
        return _dec(self.options[key])

    def utility_spec(self) -> UtilitySpec:
        if self.utility is None:
            raise ConfigError("config has no utility")
        u = self.utility
        try:
            return UtilitySpec.from_dict(
                {
                    **u,
                    "alpha": [_dec(a) for a in u["alpha"]],
                    "gamma": [_dec(g) for g in u.get("gamma", ())],
                    "c0": _dec(u.get("c0", 0)),
                }
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid utility spec: {exc}")

    def market(self):
        if self.tree is None:
            raise ConfigError("config has no tree")
        return build_tree(self.tree)


def _utility_dict(U: UtilitySpec) -> dict:
    out = U.to_dict()
    for key in ("alpha", "gamma"):
        out[key] = [_dec_str(v) for v in out[key]]
    out["c0"] = _dec_str(out["c0"])
    return out


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}")
    return RunConfig.parse(data, path.parent)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _report(obj, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(_jsonable(obj), indent=2) + "\n")


def write_csv_atomic(path, rows: list, meta: dict):
    """Write a '#' metadata line, a header row, then data rows, via rename."""
    path = Path(path)
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=".tmp-", suffix=".csv")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def csv_metadata(cfg_seed, **tols) -> dict:
    return {"seed": cfg_seed, **{k: v for k, v in tols.items()}, "version": __version__}


def _parse_matrix(text) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip()]
    return np.array([_vector(r) for r in rows])


def _x(args, cfg: RunConfig) -> np.ndarray:
    if getattr(args, "x", None):
        return np.array(_vector(args.x))
    if cfg.x is None:
        raise ConfigError("no endowment given (use --x or the config's x)")
    return np.array(cfg.x)


# -- commands --------------------------------------------------------------------


def cmd_validate(args) -> int:
    if args.matrix:
        try:
            pi = validate_bid_ask(_parse_matrix(args.matrix))
        except InvalidBidAsk as exc:
            _report({"valid": False, "violations": [{"condition": v.condition, "indices": v.indices, "detail": v.detail} for v in exc.violations]})
            return EXIT_CONFIG
        _report({"valid": True, "D": pi.dim})
        return EXIT_OK
    cfg = load_config(args.config)
    tree = cfg.market()
    _report({"valid": True, "nodes": len(tree.nodes), "leaves": len(tree.leaves), "D": tree.D, "T": tree.T})
    return EXIT_OK


def cmd_cone(args) -> int:
    pi = validate_bid_ask(_parse_matrix(args.matrix))
    K = solvency_cone(pi)
    out = {"generators": K.generators, "polar_halfspaces": polar_cone(K).halfspaces}
    if args.x:
        mem = cone_contains(K.generators, _vector(args.x), args.tol)
        out["membership"] = {"member": mem.member, "residual": mem.residual, "separator": mem.separator}
    if args.w:
        out["strict_polar_member"] = interior_contains(polar_cone(K), _vector(args.w), args.margin)
    _report(out)
    return EXIT_OK


def cmd_scps(args) -> int:
    cfg = load_config(args.config)
    tree = cfg.market()
    margin = cfg.option("margin") if args.margin is None else args.margin
    try:
        ps = find_scps(tree, margin)
    except NoPriceSystem as exc:
        cert = None
        if exc.arbitrage is not None:
            cert = {"transfers": exc.arbitrage.transfers, "terminal_values": exc.arbitrage.terminal_values()}
        _report({"feasible": False, "margin": margin, "message": str(exc), "arbitrage": cert})
        return EXIT_INFEASIBLE
    _report({"feasible": True, "margin": margin, "Z": {n.id: ps.at(n.id) for n in tree.nodes}, "slack": ps.consistency_slack()})
    return EXIT_OK


def _primal_report(tree, sol):
    return {
        "status": sol.status,
        "u": sol.value,
        "X": None if sol.X is None else {l.id: sol.X[k] for k, l in enumerate(tree.leaves)},
        "newton_iterations": sol.iterations,
    }


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    tree, U, x = cfg.market(), cfg.utility_spec(), _x(args, cfg)
    sol = solve_primal(tree, U, x)
    _report({"command": "solve", "x": x, "seed": cfg.seed, **_primal_report(tree, sol)})
    return EXIT_OK if sol.status == "optimal" else EXIT_INFEASIBLE


def cmd_dual(args) -> int:
    cfg = load_config(args.config)
    tree, U, x = cfg.market(), cfg.utility_spec(), _x(args, cfg)
    tol = cfg.option("tol")
    try:
        dual = solve_dual(tree, U, x)
    except NoPriceSystem as exc:
        _report({"command": "dual", "status": "no-price-system", "message": str(exc)})
        return EXIT_INFEASIBLE
    if dual.status != "optimal":
        _report({"command": "dual", "status": dual.status, "value": dual.value, "sequence_tail": dual.sequence[-5:]})
        return EXIT_INFEASIBLE
    prim = solve_primal(tree, U, x)
    gap = dual.value - prim.value
    recovered = recover_primal(dual.measure, U)
    out = {
        "command": "dual",
        "x": x,
        "seed": cfg.seed,
        "dual_value": dual.value,
        "primal_value": prim.value,
        "gap": gap,
        "mass": dual.measure.total(),
        "density": {l.id: dual.measure.density()[k] for k, l in enumerate(tree.leaves)},
        "recovered_X": {l.id: recovered[k] for k, l in enumerate(tree.leaves)},
    }
    _report(out)
    return EXIT_OK if abs(gap) <= tol * (1 + abs(prim.value)) else EXIT_CONSISTENCY


def cmd_probe(args) -> int:
    cfg = load_config(args.config)
    tree, U, x = cfg.market(), cfg.utility_spec(), _x(args, cfg)
    if not is_interior(tree, x):
        _report({"command": "probe", "status": "not-interior"})
        return EXIT_INFEASIBLE
    pr = supergradient_probe(tree, U, x, h=cfg.option("h"))
    _report(
        {
            "command": "probe",
            "x": x,
            "u": pr.value,
            "supergradient": pr.supergradient,
            "bracket": pr.bracket,
            "worst_excess": pr.worst_excess,
            "holds": pr.holds(),
        }
    )
    return EXIT_OK if pr.holds() else EXIT_CONSISTENCY


def cmd_liquidate(args) -> int:
    cfg = load_config(args.config)
    tree, U, x = cfg.market(), cfg.utility_spec(), _x(args, cfg)
    tol = cfg.option("tol")
    prim = solve_primal(tree, U, x)
    if prim.status != "optimal":
        _report({"command": "liquidate", "status": prim.status})
        return EXIT_INFEASIBLE
    liq = solve_liquidation_formulation(tree, U, x)
    diff = abs(liq.value - prim.value)
    opt = float(np.max(np.abs(composed_optimizer(liq, tree.D) - prim.X)))
    _report({"command": "liquidate", "u": prim.value, "liquidation_value": liq.value, "value_diff": diff, "optimizer_diff": opt, "W": liq.W, "xi": liq.xi})
    return EXIT_OK if diff <= tol and opt <= 10 * tol else EXIT_CONSISTENCY


def cmd_sweep(args) -> int:
    N_list = [int(v) for v in args.N.split(",")]
    rows = singular_sweep(args.alpha, N_list, mode=args.mode)
    records = [
        {k: v for k, v in r.as_record().items() if k in ("N", "theta", "u_N", "mass_total_1", "head_mass_M5", "deficit", "fd_du_dx1", "transfer_norm")}
        for r in rows
    ]
    if args.out:
        write_csv_atomic(args.out, records, csv_metadata(args.seed, alpha=args.alpha, mode=args.mode, gap_tol=1e-11))
    _report({"command": "sweep-singular", "seed": args.seed, "alpha": args.alpha, "rows": records, "limits": singular_limits(args.alpha)})
    return EXIT_OK


def reproduce_example(name: str, tol: float = 1e-5) -> dict:
    """Run a built-in worked example and compare against its closed forms."""
    checks = []
    if name == "nonstrict":
        tree = nonstrict_example_tree()
        worst = {1: 0.0, 2: 0.0}
        for case, x in nonstrict_grid(50):
            u = solve_primal(tree, nonstrict_utility(case), x).value
            worst[case] = max(worst[case], abs(u - nonstrict_closed_form(case, x)))
        for case in (1, 2):
            checks.append({"check": f"case {case} grid vs closed form", "max_error": worst[case], "pass": worst[case] <= tol})
    elif name == "singular":
        alpha = 0.1
        rows = singular_sweep(alpha, (10, 20, 40))
        lim = singular_limits(alpha)
        s = np.array([2.0] + [1.0 / n for n in range(1, 6)])
        head_limit = (1 - alpha) / 2 + alpha * sum(2.0**-n * n for n in range(1, 6))
        dens_err = [np.max(np.abs(r.densities[:6] * s - 1)) for r in rows]
        head_err = [abs(r.head_mass - head_limit) for r in rows]
        checks.append({"check": "stock weight above one", "values": [r.theta for r in rows], "pass": all(r.theta > 1 for r in rows)})
        checks.append({"check": "densities approach 1/s_n", "errors": dens_err, "pass": bool(np.all(np.diff(dens_err) < 0))})
        checks.append({"check": "head mass approaches its limit", "errors": head_err, "pass": bool(np.all(np.diff(head_err) < 0))})
        checks.append(
            {
                "check": "total mass matches the value derivative",
                "diffs": [abs(r.mass_total[0] - r.fd_derivative) for r in rows],
                "pass": all(abs(r.mass_total[0] - r.fd_derivative) <= 0.02 for r in rows),
            }
        )
        checks.append({"check": "deficit near its limit", "value": rows[-1].deficit, "limit": lim["deficit"], "pass": abs(rows[-1].deficit - lim["deficit"]) <= 0.05})
    else:
        raise ConfigError(f"unknown example {name!r}")
    return {"example": name, "checks": checks, "pass": all(c["pass"] for c in checks)}


def cmd_reproduce(args) -> int:
    rep = reproduce_example(args.name)
    _report(rep)
    return EXIT_OK if rep["pass"] else EXIT_CONSISTENCY


def check_utility(U: UtilitySpec, eps: float = 0.01, seed: int = 0) -> list:
    return [
        check_asymptotic_satiability(U, eps),
        check_mvra(U, seed=seed),
        check_growth(U),
        estimate_rae(U),
        _essential_smoothness(U),
    ]


def _essential_smoothness(U: UtilitySpec):
    """Gradient norm blows up approaching each boundary face."""
    from .utility import PropertyReport

    if U.family == "linear":
        return PropertyReport("essential_smoothness", "fail", [{"x": np.full(U.d, 1e-12), "grad": np.ones(U.d)}])
    norms = []
    for k in (2, 6, 10, 14):
        x = np.ones(U.d)
        x[0] = 10.0**-k
        norms.append(float(np.linalg.norm(U.grad(x))))
    ok = all(b > a for a, b in zip(norms, norms[1:])) and norms[-1] > 1e3
    return PropertyReport("essential_smoothness", "pass" if ok else "inconclusive", [{"grad_norms": norms}])


def cmd_check_utility(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        U = cfg.utility_spec()
        seed = cfg.seed
    else:
        try:
            U = RunConfig(utility=json.loads(args.utility)).utility_spec()
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse utility: {exc}")
        seed = args.seed
    reports = check_utility(U, seed=seed)
    _report({"utility": _utility_dict(U), "reports": [r.to_dict() for r in reports]})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="solvency", description="Transaction-cost utility maximization on finite trees")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a tree config or a bid-ask matrix")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--config")
    g.add_argument("--matrix", help="rows separated by ';', entries by ','")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("cone", help="solvency cone, polar, membership")
    p.add_argument("--matrix", required=True)
    p.add_argument("--x")
    p.add_argument("--w")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--margin", type=float, default=1e-6)
    p.set_defaults(func=cmd_cone)

    p = sub.add_parser("scps", help="find a (strictly) consistent price system")
    p.add_argument("--config", required=True)
    p.add_argument("--margin", type=float)
    p.set_defaults(func=cmd_scps)

    for name, fn, text in (
        ("solve", cmd_solve, "primal value function"),
        ("dual", cmd_dual, "dual problem and gap"),
        ("probe", cmd_probe, "supergradient probe"),
        ("liquidate", cmd_liquidate, "liquidation formulation"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--x", help="comma-separated endowment")
        p.set_defaults(func=fn)

    p = sub.add_parser("sweep-singular", help="truncation sweep of the singular example")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--N", default="10,20,40")
    p.add_argument("--mode", choices=["renormalize", "lumped"], default="renormalize")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="run a built-in worked example")
    p.add_argument("name")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("check-utility", help="run every utility property checker")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--config")
    g.add_argument("--utility", help="inline JSON utility spec")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check_utility)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, TreeConfigError, InvalidBidAsk, StructuralError, ValueError) as exc:
        sys.stderr.write(f"invalid configuration: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
