"""Tests for shape constraints and the constrained MAP solver."""

import numpy as np
import pandas as pd
import pytest
from scipy import sparse

from bayesgam.basis import SquaredExponential, difference_operator
from bayesgam.constrain import (
    QpProblem,
    convex_constraint,
    monotone_constraint,
    solve_constrained,
    solve_problem,
    term_constraint,
)
from bayesgam.errors import (
    ConstrainedSampling,
    Infeasible,
    InvalidSystem,
    NotPositiveDefinite,
)
from bayesgam.gam import GamModel, GpTerm, LocalTerm, assemble, draw, fit
from bayesgam.inference import neg_log_posterior, solve
from bayesgam.models import ConstraintSet, Direction, Grid


def _line_model(order=2, std=1.0):
    grid = Grid((np.linspace(-1, 1, 21),))
    prior = difference_operator(grid, 0, order, std).to_prior()
    return GamModel((LocalTerm("f", ("x",), grid, (prior,)),)), grid


def _random_qp(rng, n, m):
    M = rng.standard_normal((n, n))
    C = rng.standard_normal((m, n))
    x0 = rng.standard_normal(n)
    constraints = ConstraintSet(C, C @ x0 - rng.uniform(0, 1, m), np.zeros(m, dtype=bool))
    return QpProblem(M.T @ M + np.eye(n), 5.0 * rng.standard_normal(n), constraints)


class TestShapes:
    """Constraint rows built from difference stencils."""

    def test_monotone_increasing(self):
        """Four knots give three first-difference rows with zero bound."""
        c = monotone_constraint(Grid((np.arange(4.0),)), 0, Direction.INCREASING)
        expected = [[-1, 1, 0, 0], [0, -1, 1, 0], [0, 0, -1, 1]]
        np.testing.assert_array_equal(c.matrix.toarray(), expected)
        np.testing.assert_array_equal(c.bound, 0.0)
        assert not c.equality.any()

    def test_monotone_decreasing(self):
        """Decreasing negates the rows."""
        grid = Grid((np.arange(4.0),))
        up = monotone_constraint(grid, 0, Direction.INCREASING).matrix.toarray()
        down = monotone_constraint(grid, 0, Direction.DECREASING).matrix.toarray()
        np.testing.assert_array_equal(down, -up)

    def test_monotone_2d_row_count(self):
        """A 3 x 3 grid has six segments along axis 0."""
        grid = Grid((np.arange(3.0), np.arange(3.0)))
        assert monotone_constraint(grid, 0, Direction.INCREASING).n_rows == 6

    def test_convex(self):
        """Convex values satisfy the rows; concave values do not."""
        knots = np.linspace(-1, 1, 5)
        c = convex_constraint(Grid((knots,)), 0)
        assert c.n_rows == 3
        np.testing.assert_array_equal(c.matrix.toarray()[0], [1, -2, 1, 0, 0])
        assert np.all(c.residual(knots**2) >= 0)
        assert np.any(c.residual(-(knots**2)) < 0)

    def test_term_constraint_offsets(self):
        """Local-term rows are shifted to the term's parameter slice."""
        grid = Grid((np.arange(3.0),))
        model = GamModel((LocalTerm("a", ("x",), grid), LocalTerm("b", ("w",), grid)))
        c = term_constraint(monotone_constraint(grid, 0, Direction.INCREASING), model, "b")
        assert c.matrix.shape == (2, 6)
        np.testing.assert_array_equal(c.matrix.toarray()[:, :3], 0.0)

    def test_term_constraint_gp_shift(self):
        """GP constraints act on mu + P theta, so the bound absorbs mu."""
        grid = Grid((np.linspace(0, 1, 5),))
        term = GpTerm.build(
            "g", SquaredExponential(1.0, 0.5), grid, ["x"], mean_fn=lambda p: 3.0 * p[:, 0]
        )
        model = GamModel((term,))
        c = term_constraint(monotone_constraint(grid, 0, Direction.INCREASING), model, "g")
        np.testing.assert_allclose(c.bound, -0.75 * np.ones(4), atol=1e-12)
        np.testing.assert_allclose(c.residual(np.zeros(term.size)), 0.75, atol=1e-12)


class TestSolveConstrained:
    """Quadratic program for the constrained MAP."""

    def test_equality_scalar(self):
        """min (t - 2)^2 s.t. t = 1."""
        problem = QpProblem(
            np.array([[2.0]]), np.array([4.0]), ConstraintSet([[1.0]], [1.0], [True])
        )
        solution = solve_problem(problem)
        assert solution.theta[0] == pytest.approx(1.0)
        assert solution.kkt.ok()

    def test_inactive_constraints(self, rng):
        """A strictly increasing unconstrained fit is left unchanged."""
        model, grid = _line_model()
        x = rng.uniform(-1, 1, 50)
        data = pd.DataFrame({"x": x, "y": (1 + x) / 2 + 1e-3 * rng.standard_normal(50)})
        model = model.with_obs_var(1e-6)
        system = assemble(model, data)
        constraints = term_constraint(
            monotone_constraint(grid, 0, Direction.INCREASING), model, "f"
        )
        solution = solve_constrained(system, constraints)
        np.testing.assert_allclose(solution.theta, solve(system).mean, atol=1e-8)
        assert solution.active_set.size == 0

    def test_active_monotone(self, rng):
        """A bump in the data is flattened and the objective grows."""
        model, grid = _line_model(order=1, std=1.0)
        x = rng.uniform(-1, 1, 50)
        y = (1 + x) / 2 - 0.4 * np.exp(-((x / 0.15) ** 2)) + 0.1 * rng.standard_normal(50)
        model = model.with_obs_var(0.01)
        system = assemble(model, pd.DataFrame({"x": x, "y": y}))
        constraints = term_constraint(
            monotone_constraint(grid, 0, Direction.INCREASING), model, "f"
        )
        free = solve(system).mean
        assert np.diff(free).min() < 0
        solution = solve_constrained(system, constraints)
        assert np.diff(solution.theta).min() >= -1e-10
        assert solution.active_set.size > 0
        assert neg_log_posterior(system, solution.theta) > neg_log_posterior(system, free)
        assert solution.kkt.ok()

    @pytest.mark.parametrize("n,m", [(5, 3), (20, 30), (50, 40)])
    def test_kkt_on_random_problems(self, rng, n, m):
        """Random strictly feasible problems meet every KKT tolerance."""
        solution = solve_problem(_random_qp(rng, n, m))
        assert solution.kkt.primal <= 1e-8
        assert solution.kkt.stationarity <= 1e-8
        assert solution.kkt.dual <= 1e-10
        assert solution.kkt.complementarity <= 1e-8

    def test_matches_brute_force(self):
        """A two-parameter problem agrees with a refined grid search."""
        G = np.array([[2.0, 0.5], [0.5, 1.0]])
        a = np.array([-1.0, 0.5])
        constraints = ConstraintSet([[1.0, 1.0], [1.0, 0.0]], [1.0, 0.2], [False, False])
        solution = solve_problem(QpProblem(G, a, constraints))

        def objective(t1, t2):
            value = 0.5 * (G[0, 0] * t1**2 + 2 * G[0, 1] * t1 * t2 + G[1, 1] * t2**2)
            value = value - a[0] * t1 - a[1] * t2
            feasible = (t1 + t2 >= 1.0) & (t1 >= 0.2)
            return np.where(feasible, value, np.inf)

        centre, width = np.zeros(2), 3.0
        for _ in range(4):
            axis1 = np.linspace(centre[0] - width, centre[0] + width, 301)
            axis2 = np.linspace(centre[1] - width, centre[1] + width, 301)
            t1, t2 = np.meshgrid(axis1, axis2, indexing="ij")
            values = objective(t1, t2)
            i, j = np.unravel_index(np.argmin(values), values.shape)
            centre = np.array([axis1[i], axis2[j]])
            width /= 20.0
        np.testing.assert_allclose(solution.theta, centre, atol=1e-3)

    def test_infeasible(self):
        """t >= 1 and -t >= 0 cannot both hold."""
        problem = QpProblem(
            np.eye(1), np.zeros(1), ConstraintSet([[1.0], [-1.0]], [1.0, 0.0], [False, False])
        )
        with pytest.raises(Infeasible):
            solve_problem(problem)

    def test_not_positive_definite(self):
        """A singular Hessian is rejected."""
        problem = QpProblem(
            np.zeros((2, 2)), np.ones(2), ConstraintSet([[1.0, 0.0]], [0.0], [False])
        )
        with pytest.raises(NotPositiveDefinite):
            solve_problem(problem)

    def test_width_mismatch(self):
        """Constraints must span the system's parameters."""
        model, _ = _line_model()
        data = pd.DataFrame({"x": [0.0, 0.5], "y": [0.0, 1.0]})
        with pytest.raises(InvalidSystem):
            solve_constrained(assemble(model, data), ConstraintSet(sparse.eye_array(3), 0.0, False))


class TestConstrainedFit:
    """Constraints through the model fitting entry point."""

    def test_fit_reports_solution(self, rng):
        """fit stores the QP solution and refuses to sample."""
        model, grid = _line_model(order=1)
        x = rng.uniform(-1, 1, 40)
        data = pd.DataFrame({"x": x, "y": -x + 0.3 * rng.standard_normal(40)})
        constraints = term_constraint(
            monotone_constraint(grid, 0, Direction.DECREASING), model, "f"
        )
        result = fit(model.with_obs_var(0.09), data, constraints)
        assert result.constrained is not None
        assert np.diff(result.mean).max() <= 1e-10
        with pytest.raises(ConstrainedSampling):
            draw(result, 5, 0)
