"""Search drivers: exhaustive grid scan and log-space Nelder-Mead."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable, Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from ..errors import (
    BayesGamError,
    BudgetExhausted,
    ImproperPrior,
    InvalidTuning,
    SpecError,
    TuningFailed,
)
from ..gam.terms import GamModel
from ..models import Objective
from ..tracing import get_tracing
from .hyperspec import HyperSpec, apply_values
from .objectives import ObjectiveFn, objective_function

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TracePoint:
    """One objective evaluation."""

    values: dict[str, float]
    score: float
    status: str  # "ok" or "failed"
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True, eq=False)
class TuneResult:
    """Best hyperparameters and the full evaluation trace."""

    best: dict[str, float]
    objective_value: float
    trace: tuple[TracePoint, ...]
    objective: Objective
    method: str

    def to_frame(self) -> pd.DataFrame:
        """Trace as a table: one column per hyperparameter, then objective and status."""
        records = [
            {**p.values, "objective": p.score, "status": p.status, "message": p.message}
            for p in self.trace
        ]
        return pd.DataFrame.from_records(records)

    def tuned_model(self, model: GamModel, spec: HyperSpec) -> GamModel:
        return apply_values(model, spec, self.best)


@contextmanager
def _traced(name: str, metadata: dict[str, Any]) -> Iterator[Callable[[TracePoint], None]]:
    tracing = get_tracing()
    if tracing is None or not tracing.enabled:
        yield lambda point: None
        return
    with tracing.trace(name, metadata) as trace:
        trace_id = trace.id if trace else None

        def record(point: TracePoint) -> None:
            tracing.evaluation(trace_id, point.values, point.score, point.status)

        yield record


def _evaluate(fn: ObjectiveFn, values: dict[str, float]) -> TracePoint:
    try:
        score = float(fn(values))
    except (ImproperPrior, InvalidTuning, SpecError):
        # Fails at every point, not just this one.
        raise
    except (BayesGamError, np.linalg.LinAlgError) as exc:
        logger.warning("objective failed at %s: %s", values, exc)
        return TracePoint(values, float("nan"), "failed", str(exc))
    if not np.isfinite(score):
        return TracePoint(values, score, "failed", "non-finite objective")
    logger.debug("objective %s -> %.10g", values, score)
    return TracePoint(values, score, "ok")


def _best(
    trace: Sequence[TracePoint], spec: HyperSpec
) -> tuple[dict[str, float], float] | None:
    ok = [p for p in trace if p.ok]
    if not ok:
        return None
    # Ties go to the lexicographically smallest value vector.
    winner = min(ok, key=lambda p: (p.score, spec.vector(p.values)))
    return dict(winner.values), winner.score


def scan(
    fn: ObjectiveFn,
    spec: HyperSpec,
    grids: Mapping[str, Sequence[float]],
    *,
    objective: Objective = Objective.MAP,
    threads: int = 1,
) -> TuneResult:
    """Evaluate ``fn`` on the Cartesian product of ``grids`` (spec order)."""
    axes = []
    for name in spec.names:
        if name not in grids:
            raise SpecError(f"no grid given for hyperparameter '{name}'")
        axes.append([float(v) for v in grids[name]])
    points = [dict(zip(spec.names, combo, strict=True)) for combo in itertools.product(*axes)]
    for values in points:
        spec.check(values)
    logger.info("grid scan over %d points with %d threads", len(points), threads)

    with _traced("tune.grid_scan", {"points": len(points), "objective": objective.value}) as rec:

        def run(values: dict[str, float]) -> TracePoint:
            point = _evaluate(fn, values)
            rec(point)
            return point

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                trace = tuple(pool.map(run, points))
        else:
            trace = tuple(run(values) for values in points)

    best = _best(trace, spec)
    if best is None:
        raise TuningFailed("every grid point failed")
    return TuneResult(best[0], best[1], trace, objective, "grid")


def grid_scan(
    model: GamModel,
    data: pd.DataFrame,
    spec: HyperSpec,
    objective: Objective,
    grids: Mapping[str, Sequence[float]] | None = None,
    *,
    folds: Sequence[np.ndarray] | None = None,
    threads: int = 1,
    grid_points: int = 20,
    cv_holdout: int = 10,
    pivot_tolerance: float = 1e-13,
    backend: str = "auto",
) -> TuneResult:
    """Exhaustive search; missing grids default to log-spaced points within bounds."""
    chosen = {e.name: e.default_grid(grid_points) for e in spec.entries}
    chosen.update(grids or {})
    fn = objective_function(
        model,
        data,
        spec,
        objective,
        folds=folds,
        cv_holdout=cv_holdout,
        pivot_tolerance=pivot_tolerance,
        backend=backend,
    )
    return scan(fn, spec, chosen, objective=objective, threads=threads)


class _OutOfBudget(Exception):
    pass


def _initial_simplex(
    x0: np.ndarray, lower: np.ndarray, upper: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """``x0`` plus one jittered step per axis, each kept inside the bounds."""
    vertices = [x0]
    for i in range(x0.shape[0]):
        step = 0.25 * (upper[i] - lower[i]) * (1.0 + 0.1 * rng.random())
        if x0[i] + step > upper[i]:
            step = -step
        vertex = x0.copy()
        vertex[i] = np.clip(x0[i] + step, lower[i], upper[i])
        vertices.append(vertex)
    return np.array(vertices)


def minimize_log(
    fn: ObjectiveFn,
    spec: HyperSpec,
    *,
    objective: Objective = Objective.MAP,
    budget: int = 200,
    seed: int = 0,
    start: Mapping[str, float] | None = None,
    xatol: float = 1e-3,
    fatol: float = 1e-6,
) -> TuneResult:
    """Bounded Nelder-Mead on log hyperparameters with a hard evaluation budget."""
    n = len(spec.entries)
    if budget < n + 1:
        raise InvalidTuning(f"budget {budget} cannot cover an initial simplex of {n + 1} points")
    lo = np.log([e.lower for e in spec.entries])
    hi = np.log([e.upper for e in spec.entries])
    if start is None:
        x0 = 0.5 * (lo + hi)
    else:
        spec.check(start)
        x0 = np.log(np.array(spec.vector(start)))
    simplex = _initial_simplex(x0, lo, hi, np.random.default_rng(seed))
    lower_values = np.array([e.lower for e in spec.entries])
    upper_values = np.array([e.upper for e in spec.entries])
    trace: list[TracePoint] = []

    with _traced("tune.optimize", {"budget": budget, "objective": objective.value}) as rec:

        def f(z: np.ndarray) -> float:
            if len(trace) >= budget:
                raise _OutOfBudget
            raw = np.clip(np.exp(z), lower_values, upper_values)
            point = _evaluate(fn, dict(zip(spec.names, map(float, raw), strict=True)))
            trace.append(point)
            rec(point)
            return point.score if point.ok else np.inf

        exhausted = False
        try:
            res = minimize(
                f,
                x0,
                method="Nelder-Mead",
                bounds=list(zip(lo, hi, strict=True)),
                options={
                    "maxfev": budget,
                    "xatol": xatol,
                    "fatol": fatol,
                    "initial_simplex": simplex,
                },
            )
            exhausted = not res.success and len(trace) >= budget
        except _OutOfBudget:
            exhausted = True

    best = _best(trace, spec)
    if best is None:
        raise TuningFailed("every optimizer evaluation failed")
    result = TuneResult(best[0], best[1], tuple(trace), objective, "optimize")
    logger.info("optimizer used %d evaluations, best %s", len(trace), result.best)
    if exhausted:
        raise BudgetExhausted(result)
    return result


def optimize(
    model: GamModel,
    data: pd.DataFrame,
    spec: HyperSpec,
    objective: Objective,
    *,
    budget: int = 200,
    seed: int = 0,
    start: Mapping[str, float] | None = None,
    folds: Sequence[np.ndarray] | None = None,
    cv_holdout: int = 10,
    xatol: float = 1e-3,
    fatol: float = 1e-6,
    pivot_tolerance: float = 1e-13,
    backend: str = "auto",
) -> TuneResult:
    """Derivative-free minimization of ``objective`` in log hyperparameter space."""
    fn = objective_function(
        model,
        data,
        spec,
        objective,
        folds=folds,
        cv_holdout=cv_holdout,
        pivot_tolerance=pivot_tolerance,
        backend=backend,
    )
    return minimize_log(
        fn,
        spec,
        objective=objective,
        budget=budget,
        seed=seed,
        start=start,
        xatol=xatol,
        fatol=fatol,
    )
