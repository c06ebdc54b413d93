import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.bargaining.geometry import (
    AffineMap,
    apply_map,
    comprehensive_hull,
    ideal_point,
    make_problem,
    pareto_frontier,
    transform_problem,
)
from src.bargaining.solutions import (
    closed_form_solver,
    egalitarian,
    equal_loss,
    kalai_smorodinsky,
    nash,
    parse_yu_order,
    yu_lp,
)
from src.utils.errors import InvalidP, UnknownSolver

unit = st.floats(min_value=0.05, max_value=1.0, allow_nan=False)
comprehensive_problems = st.lists(st.tuples(unit, unit), min_size=1, max_size=10).map(
    lambda points: make_problem(comprehensive_hull(points), (0.0, 0.0))
)
maps = st.builds(
    AffineMap,
    st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0),
)


class TestPresetValues:
    @pytest.mark.parametrize("solver_id", ["nash", "ks", "egalitarian", "equal-loss", "yu-l2", "yu-linf"])
    def test_triangle_is_split_evenly(self, triangle, solver_id):
        payoff = closed_form_solver(solver_id)(triangle).payoff
        np.testing.assert_allclose(payoff, (0.5, 0.5), atol=1e-9)

    def test_trapezoid(self, trapezoid):
        np.testing.assert_allclose(nash(trapezoid).payoff, (1.0, 0.5), atol=1e-9)
        np.testing.assert_allclose(kalai_smorodinsky(trapezoid).payoff, (2 / 3, 2 / 3), atol=1e-9)
        np.testing.assert_allclose(egalitarian(trapezoid).payoff, (2 / 3, 2 / 3), atol=1e-9)
        np.testing.assert_allclose(yu_lp(trapezoid, 2.0).payoff, (0.8, 0.6), atol=1e-9)

    def test_trapezoid_off_origin(self, trapezoid_corner):
        np.testing.assert_allclose(nash(trapezoid_corner).payoff, (1.0, 0.5), atol=1e-9)
        np.testing.assert_allclose(kalai_smorodinsky(trapezoid_corner).payoff, (22 / 30, 19 / 30), atol=1e-9)

    def test_parabola(self, parabola):
        np.testing.assert_allclose(nash(parabola).payoff, (1 / math.sqrt(3), 2 / 3), atol=1e-3)
        golden = (math.sqrt(5.0) - 1.0) / 2.0
        np.testing.assert_allclose(kalai_smorodinsky(parabola).payoff, (golden, golden), atol=1e-3)

    def test_nash_moves_right_when_the_set_grows(self, fig3_left, fig3_right):
        np.testing.assert_allclose(nash(fig3_left).payoff, (0.7, 0.7), atol=1e-9)
        np.testing.assert_allclose(nash(fig3_right).payoff, (0.8, 0.65), atol=1e-9)

    def test_ks_keeps_both_players_on_the_diagonal(self, fig3_left, fig3_right):
        np.testing.assert_allclose(kalai_smorodinsky(fig3_left).payoff, (0.7, 0.7), atol=1e-9)
        np.testing.assert_allclose(kalai_smorodinsky(fig3_right).payoff, (0.7, 0.7), atol=1e-9)

    @pytest.mark.parametrize("name", ["trapezoid", "fig3-right"])
    def test_yu_linf_is_equal_loss(self, name, request):
        problem = request.getfixturevalue(name.replace("-", "_"))
        solution = yu_lp(problem, math.inf)
        assert solution.payoff == equal_loss(problem).payoff
        assert solution.method == "yu-lp"
        assert solution.diagnostics["iterations"] == 0.0
        ideal = ideal_point(problem)
        losses = (ideal.u1 - solution.payoff.u1, ideal.u2 - solution.payoff.u2)
        assert solution.diagnostics["distance"] == pytest.approx(max(losses))


class TestSolverIds:
    def test_yu_orders(self):
        assert parse_yu_order("yu-l2") == 2.0
        assert parse_yu_order("yu-lp") == 2.0
        assert parse_yu_order("yu-l1.5") == 1.5
        assert math.isinf(parse_yu_order("yu-linf"))

    def test_unknown_solver(self):
        with pytest.raises(UnknownSolver):
            closed_form_solver("rawls")
        with pytest.raises(UnknownSolver):
            closed_form_solver("yu-lq")

    def test_p_below_one(self, triangle):
        with pytest.raises(InvalidP):
            yu_lp(triangle, 0.5)

    def test_nash_reports_the_product(self, triangle):
        assert nash(triangle).diagnostics["product"] == pytest.approx(0.25)


class TestProperties:
    @given(comprehensive_problems)
    @settings(max_examples=60, deadline=None)
    def test_answers_lie_on_the_frontier(self, problem):
        chain = pareto_frontier(problem)
        for solver_id in ("nash", "ks", "equal-loss", "yu-l2"):
            payoff = closed_form_solver(solver_id)(problem).payoff
            assert chain.distance(payoff) <= 1e-9, solver_id

    @given(comprehensive_problems, maps)
    @settings(max_examples=60, deadline=None)
    def test_nash_and_ks_commute_with_affine_maps(self, problem, transform):
        moved = transform_problem(problem, transform)
        tol = 1e-8 * max(transform.a1, transform.a2, 1.0)
        for solver_id in ("nash", "ks"):
            solve = closed_form_solver(solver_id)
            direct = solve(moved).payoff
            mapped = apply_map(transform, solve(problem).payoff)
            np.testing.assert_allclose(direct, mapped, atol=tol, err_msg=solver_id)

    @given(st.floats(0.1, 0.9), st.floats(0.1, 0.9))
    @settings(max_examples=40, deadline=None)
    def test_symmetric_sets_give_equal_payoffs(self, a, b):
        # symmetric under swapping the players whatever a and b are
        problem = make_problem(comprehensive_hull([(1.0, a * b), (a, a), (a * b, 1.0)]), (0.0, 0.0))
        for solver_id in ("nash", "ks", "egalitarian", "equal-loss", "yu-l2"):
            payoff = closed_form_solver(solver_id)(problem).payoff
            assert abs(payoff.u1 - payoff.u2) <= 1e-9, solver_id
