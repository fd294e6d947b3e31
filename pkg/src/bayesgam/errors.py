"""Error types raised by Bayes GAM.

Every user or data error derives from ``BayesGamError`` so the CLI can map
it to exit code 1. Argument mistakes also derive from the matching builtin
(``ValueError`` / ``LookupError``).
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from .tuning.drivers import TuneResult


class BayesGamError(Exception):
    """Base class for user-facing errors."""


class InvalidSystem(BayesGamError, ValueError):
    """Shapes or variances of a linear-Gaussian system are inconsistent."""


class SpecError(BayesGamError, ValueError):
    """A model specification document cannot be turned into a model."""


class ArchiveError(BayesGamError):
    """A model archive is unreadable or inconsistent."""


class SingularPosterior(BayesGamError):
    """The posterior precision is not positive definite."""

    def __init__(self, pivot: int, fold: int | None = None, detail: str = "") -> None:
        self.pivot = pivot
        self.fold = fold
        where = f" (cross-validation fold {fold})" if fold is not None else ""
        message = (
            f"posterior precision is singular at parameter {pivot}{where}; "
            "add a prior on the unidentified directions"
        )
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class NotPositiveDefinite(BayesGamError):
    """A covariance or QP Hessian failed its Cholesky factorization."""


class IndefiniteCovariance(BayesGamError):
    """A kernel matrix has an eigenvalue well below zero."""

    def __init__(self, min_eigenvalue: float, tolerance: float) -> None:
        self.min_eigenvalue = min_eigenvalue
        super().__init__(
            f"covariance has eigenvalue {min_eigenvalue:.3e} below -{tolerance:.3e}"
        )


class DimensionMismatch(BayesGamError, ValueError):
    """Point dimensions do not match a kernel or grid."""


class OutOfGrid(BayesGamError, ValueError):
    """An input point lies outside its grid bounding box."""

    def __init__(self, index: int, point: Any = None, term: str | None = None) -> None:
        self.index = index
        self.point = point
        self.term = term
        owner = f" for term '{term}'" if term else ""
        super().__init__(f"input row {index} ({point}) lies outside the grid{owner}")


class OrderTooHigh(BayesGamError, ValueError):
    """A difference order is not smaller than the number of knots."""


class NonPositiveStd(BayesGamError, ValueError):
    """A prior standard deviation is zero, negative or not finite."""


class NoMirrorPairs(BayesGamError, ValueError):
    """No knots mirror each other about the requested symmetry axis."""


class UnsupportedPeriod(BayesGamError, ValueError):
    """A custom period does not map knots onto knots."""


class MissingColumn(BayesGamError, LookupError):
    """A required data column is absent."""

    def __init__(self, column: str, term: str | None = None) -> None:
        self.column = column
        self.term = term
        owner = f" (needed by term '{term}')" if term else ""
        super().__init__(f"data has no column '{column}'{owner}")

    def __str__(self) -> str:
        return str(self.args[0])


class EmptyData(BayesGamError, ValueError):
    """A data table has no rows."""


class UnknownTerm(BayesGamError, LookupError):
    """A term name is not part of the model."""

    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"model has no term named '{name}'")

    def __str__(self) -> str:
        return str(self.args[0])


class Infeasible(BayesGamError):
    """The constraint set admits no parameter vector."""


class ImproperPrior(BayesGamError):
    """The prior alone does not define a proper distribution."""


class OutOfBounds(BayesGamError, ValueError):
    """A hyperparameter value lies outside its bounds."""

    def __init__(self, name: str, value: float, bounds: tuple[float, float]) -> None:
        self.name = name
        self.value = value
        self.bounds = bounds
        super().__init__(f"hyperparameter '{name}'={value!r} outside bounds {bounds}")


class BudgetExhausted(BayesGamError):
    """The optimizer ran out of objective evaluations before converging."""

    def __init__(self, best: TuneResult) -> None:
        self.best = best
        super().__init__(
            f"evaluation budget exhausted; best so far {best.best} "
            f"with objective {best.objective_value:.6g}"
        )


class TuningFailed(BayesGamError):
    """Every evaluated hyperparameter point failed."""


class ConstrainedSampling(BayesGamError):
    """Posterior sampling was requested for a constrained fit."""


class InvalidTable(BayesGamError, ValueError):
    """A data table is not a headed CSV of numbers."""


class InvalidTuning(BayesGamError, ValueError):
    """Folds, holdout size or evaluation budget do not fit the problem."""


class ConfigError(BayesGamError, ValueError):
    """A configuration file is not a YAML mapping."""
