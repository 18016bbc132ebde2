"""Solver and simulator for two-player zero-sum stochastic differential games with impulse controls."""

__version__ = "0.1.0"

from .bundle import Bundle, load_bundle, save_bundle
from .expr import parse_expr, to_source, eval_expr, free_variables
from .grids import ActionGrid, GridFunction, Lattice
from .intervention import (
    CONTINUE,
    IMPULSE_I,
    IMPULSE_II,
    PolicySlice,
    h_inf_chi,
    h_sup_c,
    qvi_fixed_point,
)
from .problem import (
    CANONICAL_1D,
    ActionSpace,
    CostSpec,
    GameSpec,
    ProblemError,
    build_spec,
    canonical_1d,
    load_problem,
    load_problem_file,
    validate_costs,
)
from .report import CheckResult, VerificationReport
from .sim import McEstimate, SimPath, estimate_value, gain_functional, simulate_path
from .solver import SpaceTimeGrid, ValueField, solve
from .strategy import PLAYER_I, PLAYER_II, FeedbackStrategy, RestrictionWindow, concat, from_policy, restrict, silent
from .verify import ALL_CHECKS, run_checks

__all__ = [name for name in dir() if not name.startswith("_")]
