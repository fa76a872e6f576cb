"""Exponential-utility portfolio allocation and GMV leverage with independent oracles."""

from .allocators import (
    AllocationResult,
    RegimeSpec,
    SolverConfig,
    minimax_allocate,
    risk_budget,
    risk_parity,
    solve_closed,
    solve_numeric,
    two_state_allocate,
)
from .errors import DomainError, GmvError, LogDomainError, NotConvergedError, NumericalError, QuadratureError
from .gmv_objectives import Gamble, GmvParams, MomentPair, UtilitySpec, calibrate_risk_aversion
from .kelly import BinaryBet, BayesBinaryBet, LeverageInputs, LeverageResult, binary_gmv, kelly_gmv
from .market_model import Family, HorizonSpec, PosteriorBelief, ReturnModel

__version__ = "0.1.0"

__all__ = [
    "AllocationResult",
    "BayesBinaryBet",
    "BinaryBet",
    "DomainError",
    "Family",
    "Gamble",
    "GmvError",
    "GmvParams",
    "HorizonSpec",
    "LeverageInputs",
    "LeverageResult",
    "LogDomainError",
    "MomentPair",
    "NotConvergedError",
    "NumericalError",
    "PosteriorBelief",
    "QuadratureError",
    "RegimeSpec",
    "ReturnModel",
    "SolverConfig",
    "UtilitySpec",
    "binary_gmv",
    "calibrate_risk_aversion",
    "kelly_gmv",
    "minimax_allocate",
    "risk_budget",
    "risk_parity",
    "solve_closed",
    "solve_numeric",
    "two_state_allocate",
]
