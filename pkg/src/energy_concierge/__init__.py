"""Energy Concierge: conversational energy-optimization assistant.

A pipeline that turns natural-language energy questions into convex
optimization instances through a small declarative formulation language,
solves them with a built-in simplex / scalar solver, survives malformed
model output through a capped sample-and-debug loop, explains solutions,
and measures itself with gap and success-rate metrics.  Six household
energy problems (EV charging, HVAC setpoint, battery dispatch, PV sizing,
heat pump, battery sizing) ship with exact oracles.
"""

__version__ = "0.1.0"

from .ir import (
    Constraint,
    ConvexTerm,
    LinExpr,
    LpProblem,
    OptInstance,
    ScalarProblem,
    ValidationIssue,
    VarDecl,
    VarRef,
    lower_to_lp,
    validate,
)
from .solver import Solution, solve_instance, solve_lp, solve_scalar

__all__ = [
    "Constraint",
    "ConvexTerm",
    "LinExpr",
    "LpProblem",
    "OptInstance",
    "ScalarProblem",
    "Solution",
    "ValidationIssue",
    "VarDecl",
    "VarRef",
    "lower_to_lp",
    "solve_instance",
    "solve_lp",
    "solve_scalar",
    "validate",
]
