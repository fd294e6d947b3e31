"""MAP estimate under linear constraints via a dual active-set QP.

The unconstrained MAP minimizes ``0.5 t' G t - a' t`` with ``G`` the
posterior precision and ``a`` the information vector; constraints
``C t >= c`` are handed to quadprog's Goldfarb-Idnani solver.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from quadprog import solve_qp
from scipy.optimize import linprog

from ..errors import Infeasible, InvalidSystem, NotPositiveDefinite
from ..inference.linsys import information_vector, precision_matrix
from ..models import ConstraintSet, FloatArray, LinearGaussianSystem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KktReport:
    """Optimality residuals of a constrained solution."""

    primal: float  # largest constraint violation
    stationarity: float  # |G t - a - C' lambda| relative to the gradient scale
    dual: float  # largest negative inequality multiplier
    complementarity: float  # largest |lambda_i (C t - c)_i|

    def ok(self, tolerance: float = 1e-8) -> bool:
        return max(self.primal, self.stationarity, self.dual, self.complementarity) <= tolerance


@dataclass(frozen=True, eq=False)
class ConstrainedSolution:
    """Constrained MAP with the active set and multipliers as diagnostics."""

    theta: FloatArray
    multipliers: FloatArray  # one per constraint row, original order
    active_set: np.ndarray
    objective: float
    kkt: KktReport
    iterations: int


@dataclass(frozen=True, eq=False)
class QpProblem:
    """``min 0.5 t' G t - a' t  s.t.  C t >= c`` (flagged rows as equalities)."""

    hessian: FloatArray
    linear: FloatArray
    constraints: ConstraintSet

    @classmethod
    def from_system(cls, system: LinearGaussianSystem, constraints: ConstraintSet) -> QpProblem:
        if constraints.n_columns != system.n_par:
            raise InvalidSystem(
                f"constraints span {constraints.n_columns} columns, system has {system.n_par}"
            )
        G = precision_matrix(system).toarray()
        return cls(
            hessian=0.5 * (G + G.T), linear=information_vector(system), constraints=constraints
        )


def check_feasible(constraints: ConstraintSet) -> None:
    """Phase-1 linear program: raise ``Infeasible`` if no point satisfies the set."""
    if constraints.n_rows == 0:
        return
    eq = np.flatnonzero(constraints.equality)
    ineq = np.flatnonzero(~constraints.equality)
    C, c = constraints.matrix, constraints.bound
    n = constraints.n_columns
    result = linprog(
        np.zeros(n),
        A_ub=-C[ineq] if ineq.size else None,
        b_ub=-c[ineq] if ineq.size else None,
        A_eq=C[eq] if eq.size else None,
        b_eq=c[eq] if eq.size else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    if result.status == 2:
        raise Infeasible("constraint set is infeasible")


def kkt_report(problem: QpProblem, theta: FloatArray, multipliers: FloatArray) -> KktReport:
    C = problem.constraints.matrix
    gradient = problem.hessian @ theta - problem.linear
    residual = gradient - np.asarray(C.T @ multipliers)
    scale = max(1.0, float(np.linalg.norm(problem.linear)), float(np.linalg.norm(gradient)))
    slack = problem.constraints.residual(theta)
    eq = problem.constraints.equality
    violation = np.concatenate([np.abs(slack[eq]), np.clip(-slack[~eq], 0.0, None), [0.0]])
    dual = np.concatenate([np.clip(-multipliers[~eq], 0.0, None), [0.0]])
    comp = np.concatenate([np.abs(multipliers[~eq] * slack[~eq]), [0.0]])
    return KktReport(
        primal=float(np.max(violation)),
        stationarity=float(np.linalg.norm(residual) / scale),
        dual=float(np.max(dual)),
        complementarity=float(np.max(comp) / scale),
    )


def solve_problem(problem: QpProblem) -> ConstrainedSolution:
    """Solve a QP with quadprog, equality rows first."""
    constraints = problem.constraints
    check_feasible(constraints)
    eq_rows = np.flatnonzero(constraints.equality)
    order = np.concatenate([eq_rows, np.flatnonzero(~constraints.equality)]).astype(np.intp)
    G = np.ascontiguousarray(problem.hessian, dtype=np.float64)
    a = np.ascontiguousarray(problem.linear, dtype=np.float64)
    if constraints.n_rows:
        C = np.ascontiguousarray(constraints.matrix.toarray()[order].T)
        b = np.ascontiguousarray(constraints.bound[order])
    else:
        C, b = None, None
    try:
        theta, objective, _, iterations, lagrangian, iact = solve_qp(G, a, C, b, eq_rows.size)
    except ValueError as exc:
        message = str(exc)
        if "positive definite" in message:
            raise NotPositiveDefinite(f"QP Hessian: {message}") from exc
        if "inconsistent" in message:
            raise Infeasible(message) from exc
        raise

    multipliers = np.zeros(constraints.n_rows)
    if constraints.n_rows:
        multipliers[order] = lagrangian
    active = np.asarray(iact, dtype=np.intp)
    active = np.sort(order[active[active > 0] - 1]) if active.size else active
    report = kkt_report(problem, theta, multipliers)
    logger.debug(
        "QP solved: %d constraints, %d active, kkt %s", constraints.n_rows, active.size, report
    )
    return ConstrainedSolution(
        theta=np.asarray(theta),
        multipliers=multipliers,
        active_set=active,
        objective=float(objective),
        kkt=report,
        iterations=int(np.atleast_1d(iterations)[0]),
    )


def solve_constrained(
    system: LinearGaussianSystem, constraints: ConstraintSet
) -> ConstrainedSolution:
    """Constrained MAP estimate of ``system``."""
    return solve_problem(QpProblem.from_system(system, constraints))
