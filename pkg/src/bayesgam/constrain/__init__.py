"""Shape-constrained MAP estimation."""

from .qp import (
    ConstrainedSolution,
    KktReport,
    QpProblem,
    check_feasible,
    kkt_report,
    solve_constrained,
    solve_problem,
)
from .shapes import convex_constraint, monotone_constraint, term_constraint

__all__ = [
    "ConstrainedSolution",
    "KktReport",
    "QpProblem",
    "check_feasible",
    "convex_constraint",
    "kkt_report",
    "monotone_constraint",
    "solve_constrained",
    "solve_problem",
    "term_constraint",
]
