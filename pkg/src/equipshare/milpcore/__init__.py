"""Mixed-integer linear programming: model container, LP files, simplex and branch-and-bound."""

from .bnb import solve
from .external import AdapterError, ExternalSolver, cross_check, parse_solution_text, solve_with_fallback
from .lpformat import LPFormatError, read_lp, save_lp, write_lp
from .model import (
    BINARY,
    CONTINUOUS,
    EQ,
    GE,
    INF,
    INFEASIBLE,
    INTEGER,
    LE,
    NODE_LIMIT,
    OPTIMAL,
    TIME_LIMIT,
    UNBOUNDED,
    MILPModel,
    ModelError,
    Solution,
    SolveLimits,
    ToleranceConfig,
)

__all__ = [
    "BINARY", "CONTINUOUS", "EQ", "GE", "INF", "INFEASIBLE", "INTEGER", "LE", "NODE_LIMIT", "OPTIMAL",
    "TIME_LIMIT", "UNBOUNDED", "AdapterError", "ExternalSolver", "LPFormatError", "MILPModel", "ModelError",
    "Solution", "SolveLimits", "ToleranceConfig", "cross_check", "parse_solution_text", "read_lp", "save_lp",
    "solve", "solve_with_fallback", "write_lp",
]
