import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.analysis.domination import random_problem
from src.bargaining.geometry import (
    AffineMap,
    Payoff,
    apply_map,
    comprehensive_hull,
    hull_contains,
    ideal_point,
    make_problem,
    mixed_domain,
    normalize,
    pareto_frontier,
    payoff_hull_points,
    preset_problem,
    rational_part,
    solver_domain,
    symmetrize,
    invert_map,
)
from src.utils.errors import (
    DegenerateSet,
    DisagreementOutside,
    InvalidConfig,
    NonConvexInput,
    NotNormalized,
    UnknownPreset,
)

unit = st.floats(min_value=0.05, max_value=1.0, allow_nan=False)
point_lists = st.lists(st.tuples(unit, unit), min_size=1, max_size=10)


class TestMakeProblem:
    def test_canonical_order_starts_at_smallest_vertex(self):
        problem = make_problem([(0, 1), (1, 0), (0, 0)], (0, 0))
        assert problem.feasible.vertices == (Payoff(0, 0), Payoff(1, 0), Payoff(0, 1))

    def test_points_on_an_edge_are_accepted(self):
        problem = make_problem([(0, 0), (0.5, 0), (1, 0), (0, 1)], (0, 0))
        assert len(problem.feasible) == 3

    def test_interior_point_is_rejected(self):
        with pytest.raises(NonConvexInput):
            make_problem([(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)], (0, 0))

    def test_collinear_input_is_degenerate(self):
        with pytest.raises(DegenerateSet):
            make_problem([(0, 0), (0.5, 0.5), (1, 1)], (0, 0))

    def test_disagreement_outside(self):
        with pytest.raises(DisagreementOutside):
            make_problem([(0, 0), (1, 0), (0, 1)], (2, 2))

    def test_with_disagreement_validates(self, triangle):
        assert triangle.with_disagreement((0.2, 0.2)).disagreement == Payoff(0.2, 0.2)
        with pytest.raises(DisagreementOutside):
            triangle.with_disagreement((0.8, 0.8))

    def test_unknown_preset(self):
        with pytest.raises(UnknownPreset):
            preset_problem("hexagon")

    def test_parabola_samples_are_vertices(self):
        problem = preset_problem("parabola", n=4)
        assert len(problem.feasible) == 6
        assert problem.feasible.contains((0.5, 0.75))

    def test_parabola_needs_two_segments(self):
        with pytest.raises(InvalidConfig):
            preset_problem("parabola", n=1)


class TestFrontier:
    def test_trapezoid_frontier(self, trapezoid):
        chain = pareto_frontier(trapezoid)
        np.testing.assert_allclose(chain.points, [[1.0, 0.5], [0.0, 1.0]])
        assert ideal_point(trapezoid) == Payoff(1.0, 1.0)

    def test_frontier_is_clipped_at_the_disagreement_point(self, trapezoid_corner):
        chain = pareto_frontier(trapezoid_corner)
        np.testing.assert_allclose(chain.points, [[1.0, 0.5], [0.2, 0.9]], atol=1e-12)
        np.testing.assert_allclose(ideal_point(trapezoid_corner), (1.0, 0.9), atol=1e-12)

    def test_chain_project_and_distance(self, triangle):
        chain = pareto_frontier(triangle)
        np.testing.assert_allclose(chain.project((0.0, 0.0)), (0.5, 0.5))
        assert chain.distance((0.0, 0.0)) == pytest.approx(np.sqrt(0.5))
        assert chain.length == pytest.approx(np.sqrt(2.0))

    def test_rational_part_stays_above_c(self, trapezoid_corner):
        ring = rational_part(trapezoid_corner)
        assert np.all(ring >= np.array([0.2, 0.1]) - 1e-12)
        assert len(ring) == 4

    def test_payoff_hull_contains_chain_points(self, trapezoid):
        hull = payoff_hull_points(trapezoid)
        assert hull_contains(hull, (0.6, 0.63), 1e-12)
        assert not hull_contains(hull, (0.2, 0.2), 1e-12)

    @given(point_lists)
    @settings(max_examples=60, deadline=None)
    def test_frontier_is_strictly_monotone(self, points):
        problem = make_problem(comprehensive_hull(points), (0.0, 0.0))
        chain = pareto_frontier(problem).points
        if len(chain) > 1:
            assert np.all(np.diff(chain[:, 0]) < 0)
            assert np.all(np.diff(chain[:, 1]) > 0)

    @given(point_lists)
    @settings(max_examples=60, deadline=None)
    def test_comprehensive_hull_is_counterclockwise(self, points):
        hull = comprehensive_hull(points)
        edges = np.roll(hull, -1, axis=0) - hull
        turns = edges[:, 0] * np.roll(edges[:, 1], -1) - edges[:, 1] * np.roll(edges[:, 0], -1)
        assert np.all(turns > 0)
        assert hull[0].tolist() == [0.0, 0.0]


class TestAffine:
    @given(
        st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0),
        st.tuples(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0)),
    )
    def test_inverse_undoes_the_map(self, a1, a2, b1, b2, p):
        transform = AffineMap(a1, a2, b1, b2)
        back = apply_map(invert_map(transform), apply_map(transform, p))
        np.testing.assert_allclose(back, p, atol=1e-9)

    def test_non_positive_scale_is_rejected(self):
        with pytest.raises(InvalidConfig):
            AffineMap(0.0, 1.0, 0.0, 0.0)

    def test_normalize_trapezoid_corner(self, trapezoid_corner):
        normalized, transform = normalize(trapezoid_corner)
        assert normalized.disagreement == Payoff(0.0, 0.0)
        np.testing.assert_allclose(ideal_point(normalized), (1.0, 1.0), atol=1e-12)
        np.testing.assert_allclose(transform.scale, (0.8, 0.8), atol=1e-12)
        np.testing.assert_allclose(transform.offset, (0.2, 0.1), atol=1e-12)


class TestSolverDomains:
    def test_triangle_reflects_to_a_diamond(self, triangle):
        domain = symmetrize(triangle)
        np.testing.assert_allclose(domain.points, [[1, 0], [0, 1], [-1, 0], [0, -1]])
        assert domain.absorbing.all()
        assert domain.folded

    def test_trapezoid_reflects_to_an_octagon(self, trapezoid):
        domain = symmetrize(trapezoid)
        assert len(domain.points) == 8
        assert domain.contains((-0.9, -0.5))
        assert not domain.contains((0.9, 0.9))
        assert domain.payoff((-0.3, -0.4)) == Payoff(0.3, 0.4)

    def test_symmetrize_needs_origin(self, trapezoid_corner):
        with pytest.raises(NotNormalized):
            symmetrize(trapezoid_corner)

    def test_mixed_domain_flags(self, trapezoid):
        assert mixed_domain(trapezoid).absorbing.tolist() == [False, False, True, False]
        assert mixed_domain(trapezoid, weak_pareto_absorbs=True).absorbing.tolist() == [False, True, True, False]
        assert not mixed_domain(trapezoid).folded

    def test_boundary_distance_absorbing_only(self, trapezoid):
        domain = mixed_domain(trapezoid)
        assert domain.boundary_distance((0.5, 0.0)) == pytest.approx(0.0)
        assert domain.boundary_distance((0.5, 0.0), absorbing_only=True) > 0.2

    def test_unknown_mode(self, triangle):
        with pytest.raises(InvalidConfig):
            solver_domain(triangle, "periodic")


def left_turns(points):
    edges = np.roll(points, -1, axis=0) - points
    return edges[:, 0] * np.roll(edges[:, 1], -1) - edges[:, 1] * np.roll(edges[:, 0], -1)


class TestRandomProblems:
    @pytest.mark.parametrize("index", range(100))
    def test_seeded_problem_is_a_normalized_convex_set(self, index):
        problem = random_problem(17, index)
        assert np.all(left_turns(problem.feasible.points) >= -1e-12)
        assert problem.disagreement == Payoff(0.0, 0.0)
        np.testing.assert_allclose(ideal_point(problem), (1.0, 1.0), atol=1e-12)
        assert hull_contains(problem.feasible.points, (0.0, 0.0), 1e-12)

        domain = symmetrize(problem)
        assert np.all(left_turns(domain.points) >= -1e-12)
        assert domain.contains((0.0, 0.0))
        assert domain.boundary_distance((0.0, 0.0)) > 0.0

    def test_seed_and_index_pick_the_problem(self):
        first = random_problem(17, 3).feasible.points
        assert np.array_equal(first, random_problem(17, 3).feasible.points)
        assert not np.array_equal(first, random_problem(17, 4).feasible.points)
        assert not np.array_equal(first, random_problem(18, 3).feasible.points)
