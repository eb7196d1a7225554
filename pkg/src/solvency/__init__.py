"""Utility maximization and conjugate duality on finite markets with proportional transaction costs."""

__version__ = "0.1.0"

from .cone_algebra import (
    BidAskMatrix,
    InvalidBidAsk,
    PolarCone,
    SolvencyCone,
    cone_contains,
    interior_contains,
    polar_cone,
    solvency_cone,
    validate_bid_ask,
)
from .market import ScenarioTree, attainable_check, build_tree, find_scps
from .primal_dual import DualMeasure, recover_primal, singular_sweep, solve_dual, solve_primal
from .utility import UtilitySpec, extend

__all__ = [
    "BidAskMatrix",
    "DualMeasure",
    "InvalidBidAsk",
    "PolarCone",
    "ScenarioTree",
    "SolvencyCone",
    "UtilitySpec",
    "attainable_check",
    "build_tree",
    "cone_contains",
    "extend",
    "find_scps",
    "interior_contains",
    "polar_cone",
    "recover_primal",
    "singular_sweep",
    "solve_dual",
    "solve_primal",
    "solvency_cone",
    "validate_bid_ask",
]
