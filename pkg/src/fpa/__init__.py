"""Equilibrium computation for sealed-bid first-price auctions with finite
discrete value distributions: an exact ODE-free solver, a best-response
verifier, a continuous-approximation baseline, and experiment harnesses."""

from .kernels import BACKEND
from .model import (
    AuctionInstance,
    Equilibrium,
    NumericalError,
    Segment,
    TimeoutExceeded,
    ValidationError,
    ValueDistribution,
    parse_equilibrium,
    parse_instance,
    serialize_equilibrium,
    serialize_instance,
)
from .descent import DescentTrace, run_descent
from .solver import SolveReport, apply_reserve, smallest_winning_bid, solve
from .evaluate import cdf, revenue, utility, verify_bne, welfare

__all__ = [
    "BACKEND",
    "AuctionInstance",
    "DescentTrace",
    "Equilibrium",
    "NumericalError",
    "Segment",
    "SolveReport",
    "TimeoutExceeded",
    "ValidationError",
    "ValueDistribution",
    "apply_reserve",
    "cdf",
    "parse_equilibrium",
    "parse_instance",
    "revenue",
    "run_descent",
    "serialize_equilibrium",
    "serialize_instance",
    "smallest_winning_bid",
    "solve",
    "utility",
    "verify_bne",
    "welfare",
]

__version__ = "0.1.0"
