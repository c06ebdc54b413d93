import math

import numpy as np
import pytest

from src.analysis.axioms import (
    AXIOM_NAMES,
    affine_instances,
    axiom_suite,
    check_axiom,
    constructed_iia_pairs,
    pareto_instances,
    symmetric_instances,
)
from src.analysis.domination import (
    DominationConfig,
    domination_sweep,
    evaluate_domination,
    random_problem,
)
from src.analysis.perturbation import (
    HarmonicPayoffMap,
    SolverPayoffMap,
    build_payoff_map,
    curve_resolution,
    isc_residual,
    perturbation_fit,
    perturbed_expectation,
)
from src.analysis.regions import (
    GAIN,
    LOSE,
    NEUTRAL,
    OUT_OF_RANGE,
    incentive_regions,
    label_laplacian,
    nash_parabola_closed_form,
    nash_parabola_laplacian,
    region_boundary_height,
)
from src.bargaining.geometry import Payoff, ideal_point, preset_problem
from src.bargaining.solutions import nash
from src.solvers.harmonic import s_delta
from src.utils.config import DEFAULT_FD_ARM, REGION_BAND_TARGET
from src.utils.errors import DiskOutsideFeasible, InvalidConfig, MalformedInstance

FAST_H = 1.0 / 64
NASH_SLOPE = math.sqrt(5.0) / (2.0 * math.pi)
KS_CURVATURE = 0.46296 / 4.0


@pytest.fixture(scope="module")
def fine_parabola():
    return preset_problem("parabola", n=2 ** 20)


class TestPayoffMaps:
    def test_polygon_precision(self, trapezoid, parabola):
        assert curve_resolution(trapezoid.feasible) == 1e-9
        assert 1e-4 < curve_resolution(parabola.feasible) < 5e-3

    def test_map_kinds(self, trapezoid):
        assert isinstance(build_payoff_map("ks", trapezoid), SolverPayoffMap)
        assert isinstance(build_payoff_map("s-delta", trapezoid, FAST_H), HarmonicPayoffMap)

    def test_harmonic_map_reproduces_s_delta_at_the_base_point(self, trapezoid_corner):
        payoff_map = build_payoff_map("s-delta", trapezoid_corner, FAST_H)
        np.testing.assert_allclose(
            payoff_map(trapezoid_corner.disagreement), s_delta(trapezoid_corner, FAST_H).payoff, atol=1e-3
        )


class TestPerturbation:
    def test_nash_shifts_at_first_order(self, trapezoid_corner):
        e = perturbed_expectation("nash", trapezoid_corner, 0.01)
        assert e.u1 == pytest.approx(1.0 - 0.01 * NASH_SLOPE, abs=2e-6)
        assert e.u2 == pytest.approx(0.5 + 0.005 * NASH_SLOPE, abs=2e-6)

    def test_ks_shifts_at_second_order(self, trapezoid_corner):
        e = perturbed_expectation("ks", trapezoid_corner, 0.05)
        assert e.u1 == pytest.approx(22 / 30 - KS_CURVATURE * 0.05 ** 2, abs=2e-5)
        assert e.u2 == pytest.approx(19 / 30 + 0.5 * KS_CURVATURE * 0.05 ** 2, abs=2e-5)

    def test_fitted_coefficients(self, trapezoid_corner):
        ladder = (0.02, 0.01, 0.005)
        nash_base = np.array([1.0, 0.5])
        deltas = np.array([perturbed_expectation("nash", trapezoid_corner, e) for e in ladder]) - nash_base
        k1 = perturbation_fit(ladder, deltas, 1)
        assert k1[0] == pytest.approx(-0.356, abs=0.02)
        assert k1[1] == pytest.approx(0.17, abs=0.02)

        ladder = (0.04, 0.02, 0.01)
        ks_base = np.array([22 / 30, 19 / 30])
        deltas = np.array([perturbed_expectation("ks", trapezoid_corner, e) for e in ladder]) - ks_base
        k2 = perturbation_fit(ladder, deltas, 2)
        assert k2[0] == pytest.approx(-0.115, abs=0.010)
        assert k2[1] == pytest.approx(0.057, abs=0.006)

    @pytest.mark.parametrize("solver_id", ["nash", "ks", "egalitarian"])
    def test_doubling_the_angles_changes_little(self, solver_id, trapezoid_corner):
        coarse = perturbed_expectation(solver_id, trapezoid_corner, 0.02, n_angles=256)
        fine = perturbed_expectation(solver_id, trapezoid_corner, 0.02, n_angles=512)
        np.testing.assert_allclose(coarse, fine, atol=1e-5)

    def test_classification(self, trapezoid_corner):
        nash_report = isc_residual("nash", trapezoid_corner)
        assert nash_report.classification == "first-order"
        assert not nash_report.passed
        ks_report = isc_residual("ks", trapezoid_corner)
        assert ks_report.classification == "second-order"
        assert np.all(np.abs(ks_report.first_order) <= ks_report.tolerance)
        assert list(ks_report.frame().columns) == ["eps", "Eu1", "Eu2"]

    def test_linear_map_is_stable(self, triangle):
        # KS is affine in c on the triangle
        report = isc_residual("ks", triangle.with_disagreement((0.2, 0.2)))
        assert report.classification == "stable"

    def test_input_checks(self, trapezoid_corner):
        with pytest.raises(DiskOutsideFeasible):
            perturbed_expectation("nash", trapezoid_corner, 0.2)
        with pytest.raises(InvalidConfig):
            perturbed_expectation("nash", trapezoid_corner, 0.01, n_angles=32)
        with pytest.raises(InvalidConfig):
            isc_residual("nash", trapezoid_corner, (0.01, 0.02))
        with pytest.raises(InvalidConfig):
            isc_residual("nash", trapezoid_corner, (0.01,))
        with pytest.raises(InvalidConfig):
            perturbation_fit((0.02, 0.01), np.zeros((2, 2)), 3)


class TestRegions:
    def test_labels(self):
        assert label_laplacian(0.5, 0.1) == GAIN
        assert label_laplacian(-0.5, 0.1) == LOSE
        assert label_laplacian(0.05, 0.1) == NEUTRAL
        assert label_laplacian(math.nan, 0.1) == OUT_OF_RANGE

    def test_linear_maps_are_neutral(self, triangle):
        region_map = incentive_regions("ks", triangle, grid_step=0.1)
        assert set(region_map.labels.ravel()) <= {NEUTRAL, OUT_OF_RANGE}
        assert region_map.counts(1).get(NEUTRAL, 0) > 0

    def test_nash_on_the_trapezoid_only_loses(self, trapezoid):
        region_map = incentive_regions("nash", trapezoid, grid_step=0.1)
        assert GAIN not in region_map.counts(1)
        k = int(np.flatnonzero(np.all(np.isclose(region_map.points, (0.2, 0.1)), axis=1))[0])
        assert region_map.labels[k, 0] == LOSE
        assert region_map.labels[k, 1] == GAIN

    def test_s_delta_is_neutral_everywhere(self, trapezoid):
        region_map = incentive_regions("s-delta", trapezoid, grid_step=0.1, grid=FAST_H)
        assert set(region_map.labels.ravel()) <= {NEUTRAL, OUT_OF_RANGE}
        assert region_map.counts(1).get(NEUTRAL, 0) > 0

    def test_frame_columns(self, triangle):
        frame = incentive_regions("nash", triangle, grid_step=0.25).frame()
        assert list(frame.columns) == ["c1", "c2", "lap1", "lap2", "label1", "label2"]

    def test_grid_must_exceed_the_arm(self, triangle):
        with pytest.raises(InvalidConfig):
            incentive_regions("nash", triangle, grid_step=0.001, fd_arm=0.001)

    def test_parabola_closed_form(self):
        np.testing.assert_allclose(nash_parabola_closed_form((0.0, 0.0)), (1 / math.sqrt(3), 2 / 3), atol=1e-12)
        assert nash_parabola_laplacian((0.3, 0.2)) > 0.0
        assert nash_parabola_laplacian((0.3, 0.3)) < 0.0

    @pytest.mark.slow
    def test_closed_form_matches_the_polygon(self, fine_parabola):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            c1 = rng.uniform(0.0, 0.9)
            c2 = rng.uniform(0.0, 0.8 * (1.0 - c1 * c1))
            numeric = nash(fine_parabola.with_disagreement((c1, c2))).payoff
            np.testing.assert_allclose(numeric, nash_parabola_closed_form((c1, c2)), atol=1e-6)

    def test_default_arm_follows_map_precision(self, trapezoid, parabola):
        assert build_payoff_map("nash", trapezoid).default_arm() == DEFAULT_FD_ARM
        curve = build_payoff_map("nash", parabola)
        assert curve.default_arm() > DEFAULT_FD_ARM
        assert curve.neutral_band(curve.default_arm()) == pytest.approx(REGION_BAND_TARGET)
        assert build_payoff_map("s-delta", trapezoid, FAST_H).default_arm() == DEFAULT_FD_ARM

    def test_coarse_curve_needs_a_wider_grid(self, parabola):
        # n=512 resolves only arms far above the grid step
        with pytest.raises(InvalidConfig):
            incentive_regions("nash", parabola, grid_step=0.05)

    @pytest.mark.slow
    def test_nash_gain_region_ends_near_a_quarter(self, fine_parabola):
        region_map = incentive_regions("nash", fine_parabola, grid_step=0.05)
        assert 0.01 < region_map.fd_arm < 0.025
        assert region_map.band <= REGION_BAND_TARGET * (1.0 + 1e-9)
        assert region_map.counts(1).get(GAIN, 0) > 0
        assert region_map.counts(1).get(LOSE, 0) > 0
        assert region_boundary_height(region_map, 1) == pytest.approx(0.25, abs=0.05)


class TestAxioms:
    def test_names(self):
        assert sorted(AXIOM_NAMES) == [1, 2, 3, 4, 5, 6]

    @pytest.mark.parametrize("solver_id", ["nash", "ks", "egalitarian", "equal-loss", "yu-l2"])
    def test_symmetry(self, solver_id):
        assert check_axiom(1, solver_id, symmetric_instances()).passed

    @pytest.mark.parametrize("solver_id", ["nash", "ks"])
    def test_affine_invariance(self, solver_id):
        assert check_axiom(2, solver_id, affine_instances()).passed

    @pytest.mark.parametrize("solver_id", ["nash", "equal-loss", "yu-l2"])
    def test_pareto(self, solver_id):
        assert check_axiom(3, solver_id, pareto_instances()).passed

    def test_nash_iia(self):
        report = check_axiom(4, "nash", constructed_iia_pairs())
        assert report.passed
        assert len(report.results) == 2

    def test_monotonicity(self, fig3_left, fig3_right):
        pair = [("fig3", (fig3_left, fig3_right))]
        nash_report = check_axiom(5, "nash", pair)
        assert not nash_report.passed
        assert nash_report.max_violation == pytest.approx(0.05, abs=1e-9)
        assert check_axiom(5, "ks", pair).passed

    def test_insensitivity(self, trapezoid_corner):
        report = check_axiom(6, "nash", [("corner", trapezoid_corner)])
        assert not report.passed
        assert report.results[0].note == "first-order"

    def test_malformed_instances(self, trapezoid, fig3_left, fig3_right):
        with pytest.raises(MalformedInstance):
            check_axiom(1, "nash", [("trapezoid", trapezoid)])
        with pytest.raises(MalformedInstance):
            check_axiom(4, "nash", [("reversed", (fig3_right, fig3_left))])
        with pytest.raises(MalformedInstance):
            check_axiom(2, "nash", [("no map", trapezoid)])
        with pytest.raises(InvalidConfig):
            check_axiom(7, "nash", [])

    def test_suite_shape(self):
        cases = axiom_suite()
        expected_failures = {(c.axiom, c.solver) for c in cases if not c.expect_pass}
        assert expected_failures == {(5, "nash"), (6, "nash"), (6, "ks")}

    @pytest.mark.slow
    def test_suite_outcomes(self):
        for case in axiom_suite():
            report = check_axiom(case.axiom, case.solver, case.instances)
            assert report.passed == case.expect_pass, (case.axiom, case.solver)


class TestDomination:
    def test_random_problems_are_normalized_and_seeded(self):
        problem = random_problem(1, 3)
        again = random_problem(1, 3)
        assert problem.feasible == again.feasible
        assert problem.disagreement == Payoff(0.0, 0.0)
        np.testing.assert_allclose(ideal_point(problem), (1.0, 1.0), atol=1e-12)
        assert random_problem(2, 3).feasible != problem.feasible

    def test_evaluate(self):
        row = evaluate_domination("x", Payoff(0.5, 0.5), Payoff(0.6, 0.4), 0.05)
        assert row.violated
        assert row.margin1 == pytest.approx(-0.1)
        assert not evaluate_domination("x", Payoff(0.5, 0.5), Payoff(0.52, 0.4), 0.05).violated

    def test_nash_is_flagged_on_the_trapezoid(self, trapezoid):
        reference = s_delta(trapezoid, FAST_H).payoff
        assert evaluate_domination("trapezoid", nash(trapezoid).payoff, reference, 3 * FAST_H).violated

    def test_sweep(self):
        report = domination_sweep(2, 1, DominationConfig(grid_h=FAST_H, include_presets=False))
        assert [row.name for row in report.rows] == ["random-1-0", "random-1-1"]
        assert len(report.frame()) == 2
        assert report.seed == 1

    def test_injected_violation_is_reported(self):
        def evaluate(name, challenger, reference, band):
            if name == "random-1-1":
                challenger = Payoff(reference.u1 - 1.0, reference.u2)
            return evaluate_domination(name, challenger, reference, band)

        report = domination_sweep(2, 1, DominationConfig(grid_h=FAST_H, include_presets=False), evaluate)
        assert "random-1-1" in [row.name for row in report.violations]
        assert not report.passed
        assert report.min_margin[0] < -0.9

    def test_nash_challenger(self):
        report = domination_sweep(1, 1, DominationConfig(challenger="nash", grid_h=FAST_H, include_presets=False))
        assert report.challenger == "nash"
        assert len(report.rows) == 1

    def test_config_checks(self):
        with pytest.raises(InvalidConfig):
            DominationConfig(challenger="egalitarian")
        with pytest.raises(InvalidConfig):
            domination_sweep(0, 1)

    @pytest.mark.slow
    def test_full_sweep(self):
        report = domination_sweep(100, 1)
        assert len(report.rows) == 103
        assert all(min(row.margin1, row.margin2) < -row.band for row in report.violations)
