"""Lazy lambda calculus compiled through an object calculus to a stack VM."""

from .env import EMPTY, Bind, Empty, Environment, Pair, lookup
from .fuel import DEFAULT_FUEL, Fuel, FuelExhausted
from .lam import ebg_eval, parse

__version__ = "0.1.0"

__all__ = [
    "EMPTY", "Bind", "Empty", "Environment", "Pair", "lookup",
    "DEFAULT_FUEL", "Fuel", "FuelExhausted", "ebg_eval", "parse",
]
