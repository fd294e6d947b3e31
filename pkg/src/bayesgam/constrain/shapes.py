"""Shape constraints on grid values."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from scipy import sparse

from ..basis.local import difference_operator
from ..errors import SpecError
from ..models import ConstraintSet, Direction, Grid

if TYPE_CHECKING:
    from ..gam.terms import GamModel


def monotone_constraint(grid: Grid, axis: int, direction: Direction) -> ConstraintSet:
    """First differences along ``axis`` are >= 0 (increasing) or <= 0 (decreasing)."""
    rows = difference_operator(grid, axis, 1, 1.0).rows
    if direction is Direction.DECREASING:
        rows = -rows
    return ConstraintSet(rows, np.zeros(rows.shape[0]), np.zeros(rows.shape[0], dtype=bool))


def convex_constraint(grid: Grid, axis: int) -> ConstraintSet:
    """Second differences ``f[i] - 2 f[i+1] + f[i+2]`` along ``axis`` are >= 0."""
    rows = -difference_operator(grid, axis, 2, 1.0).rows
    return ConstraintSet(rows, np.zeros(rows.shape[0]), np.zeros(rows.shape[0], dtype=bool))


def term_constraint(constraints: ConstraintSet, model: GamModel, name: str) -> ConstraintSet:
    """Map constraints on one term's knot values into model parameter space."""
    term = model.term(name)
    mapping = term.value_map()
    if mapping is None:
        raise SpecError(f"term '{name}' has no grid to constrain")
    M, shift = mapping
    if constraints.n_columns != M.shape[0]:
        raise SpecError(
            f"constraints span {constraints.n_columns} knots, term '{name}' has {M.shape[0]}"
        )
    local = np.asarray(constraints.matrix @ M)
    start, _ = model.offsets()[name]
    block = sparse.csr_array(local)
    coo = block.tocoo()
    matrix = sparse.csr_array(
        (coo.data, (coo.row, coo.col + start)), shape=(constraints.n_rows, model.n_par)
    )
    bound = constraints.bound - np.asarray(constraints.matrix @ shift)
    return ConstraintSet(matrix, bound, constraints.equality)
