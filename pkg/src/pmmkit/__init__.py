"""Coded-storage private matrix multiplication over prime fields."""

from .errors import *  # noqa: F401,F403
from .ff import MERSENNE61, PrimeField, Polynomial, interpolate, interpolate_with_errors
from .strategy import DegreeParams, Family, Kind, StrategyPlan, make_baseline_plan, make_fpmm_plan, make_psmm_plan

__version__ = "0.1.0"
