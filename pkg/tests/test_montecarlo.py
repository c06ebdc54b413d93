import numpy as np
import pytest

from src.bargaining.geometry import PRESETS, preset_problem, symmetrize
from src.solvers.harmonic import s_delta
from src.solvers.montecarlo import (
    STEP_LAWS,
    WalkConfig,
    counter_uniform,
    estimate_s_delta_mc,
    run_walkers,
    simulate,
    step_distribution_variant,
    walk_once,
    walker_frame,
)
from src.utils.errors import BoundaryStart, InvalidConfig, MaxMovesExceeded, UnknownVariant

SMALL = WalkConfig(step=0.02, walkers=2000, seed=3)
PDE_H = 1.0 / 256


class TestWalkConfig:
    @pytest.mark.parametrize("step", [0.0, 0.2, -0.01])
    def test_step_range(self, step):
        with pytest.raises(InvalidConfig):
            WalkConfig(step=step, seed=1)

    def test_walkers_and_workers(self):
        with pytest.raises(InvalidConfig):
            WalkConfig(walkers=0, seed=1)
        with pytest.raises(InvalidConfig):
            WalkConfig(workers=0, seed=1)

    def test_unknown_law(self):
        with pytest.raises(UnknownVariant):
            WalkConfig(law="levy-flight", seed=1)


class TestRandomStream:
    def test_counter_uniform_is_a_pure_function(self):
        first = [counter_uniform(11, w, m) for w in range(4) for m in range(4)]
        second = [counter_uniform(11, w, m) for w in range(4) for m in range(4)]
        assert first == second
        assert all(0.0 <= u < 1.0 for u in first)
        assert len(set(first)) == len(first)

    def test_lanes_and_seeds_differ(self):
        assert counter_uniform(1, 0, 0, 0) != counter_uniform(1, 0, 0, 1)
        assert counter_uniform(1, 0, 0) != counter_uniform(2, 0, 0)


class TestWalkers:
    def test_single_walker_is_reproducible(self, triangle):
        domain = symmetrize(triangle)
        a = walk_once(domain, (0.0, 0.0), SMALL, walker=5)
        b = walk_once(domain, (0.0, 0.0), SMALL, walker=5)
        assert a == b
        assert domain.boundary_distance(a.absorbed_at) <= 1e-9
        assert a.moves >= 1

    def test_start_on_or_outside_the_boundary(self, triangle):
        domain = symmetrize(triangle)
        with pytest.raises(BoundaryStart):
            walk_once(domain, (1.0, 0.0), SMALL, walker=0)
        with pytest.raises(BoundaryStart):
            run_walkers(domain, (2.0, 2.0), SMALL)

    def test_move_cap(self, triangle):
        config = WalkConfig(step=0.001, walkers=10, seed=1, max_moves=5)
        with pytest.raises(MaxMovesExceeded):
            run_walkers(symmetrize(triangle), (0.0, 0.0), config)

    def test_worker_count_does_not_change_results(self, trapezoid):
        serial, _ = simulate(trapezoid, SMALL)
        threaded, _ = simulate(trapezoid, WalkConfig(step=0.02, walkers=2000, seed=3, workers=2))
        assert np.array_equal(serial.absorbed, threaded.absorbed)
        assert np.array_equal(serial.moves, threaded.moves)

    def test_seed_changes_results(self, triangle):
        first, _ = simulate(triangle, WalkConfig(step=0.02, walkers=200, seed=1))
        second, _ = simulate(triangle, WalkConfig(step=0.02, walkers=200, seed=2))
        assert not np.array_equal(first.absorbed, second.absorbed)


class TestEstimate:
    def test_triangle_estimate(self, triangle):
        solution = estimate_s_delta_mc(triangle, SMALL)
        np.testing.assert_allclose(solution.payoff, (0.5, 0.5), atol=0.05)
        assert solution.method == "s-delta-mc"
        assert 0.0 < solution.diagnostics["stderr1"] < 0.02
        assert solution.diagnostics["walkers"] == 2000

    def test_estimate_maps_back_to_original_coordinates(self, trapezoid_corner):
        solution = estimate_s_delta_mc(trapezoid_corner, WalkConfig(step=0.02, walkers=500, seed=4))
        assert solution.payoff.u1 > 0.2 and solution.payoff.u2 > 0.1

    def test_walker_frame(self, trapezoid_corner):
        batch, transform = simulate(trapezoid_corner, WalkConfig(step=0.02, walkers=300, seed=9))
        frame = walker_frame(batch, transform)
        assert list(frame.columns) == ["walker", "u1", "u2", "moves"]
        assert len(frame) == 300
        assert (frame["u1"] >= 0.2 - 1e-9).all() and (frame["u2"] >= 0.1 - 1e-9).all()

    def test_step_variants(self, triangle):
        solution = step_distribution_variant(triangle, SMALL, "gaussian-isotropic")
        assert solution.diagnostics["variant"] == float(STEP_LAWS["gaussian-isotropic"])
        np.testing.assert_allclose(solution.payoff, (0.5, 0.5), atol=0.05)
        with pytest.raises(UnknownVariant):
            step_distribution_variant(triangle, SMALL, "cauchy")

    def test_variant_tags_a_fresh_solution(self, triangle):
        config = WalkConfig(step=0.02, walkers=200, seed=3, law="two-point-axis")
        plain = estimate_s_delta_mc(triangle, config)
        tagged = step_distribution_variant(triangle, WalkConfig(step=0.02, walkers=200, seed=3), "two-point-axis")
        assert "variant" not in plain.diagnostics
        assert tagged.payoff == plain.payoff
        assert tagged.diagnostics == {**plain.diagnostics, "variant": float(STEP_LAWS["two-point-axis"])}


@pytest.fixture(scope="module")
def pde_answers():
    return {}


def pde_payoff(cache, name):
    if name not in cache:
        cache[name] = s_delta(preset_problem(name), PDE_H).payoff
    return cache[name]


def within_walk_band(walk, pde, config):
    for i in (0, 1):
        band = 3 * walk.diagnostics[f"stderr{i + 1}"] + config.step + PDE_H ** 2
        assert abs(walk.payoff[i] - pde[i]) <= band, (i, walk.payoff, pde)


@pytest.mark.slow
class TestAcceptance:
    def test_parabola(self, parabola):
        solution = estimate_s_delta_mc(parabola, WalkConfig(step=0.01, walkers=200_000, seed=7))
        np.testing.assert_allclose(solution.payoff, (0.59, 0.59), atol=0.015)

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_walk_matches_the_pde(self, name, pde_answers):
        config = WalkConfig(step=0.01, walkers=200_000, seed=1)
        walk = estimate_s_delta_mc(preset_problem(name), config)
        within_walk_band(walk, pde_payoff(pde_answers, name), config)

    @pytest.mark.parametrize("law", sorted(STEP_LAWS))
    def test_every_step_law_matches_the_pde(self, law, pde_answers):
        config = WalkConfig(step=0.01, walkers=200_000, seed=2)
        walk = step_distribution_variant(preset_problem("trapezoid"), config, law)
        within_walk_band(walk, pde_payoff(pde_answers, "trapezoid"), config)

    def test_boundary_modes_agree_on_the_parabola(self, parabola, pde_answers):
        symmetrized = pde_payoff(pde_answers, "parabola")
        mixed = s_delta(parabola, PDE_H, mode="mixed-bc").payoff
        np.testing.assert_allclose(mixed, symmetrized, atol=0.01)
        walk = estimate_s_delta_mc(parabola, WalkConfig(step=0.01, walkers=200_000, seed=3, mode="mixed-bc"))
        np.testing.assert_allclose(walk.payoff, symmetrized, atol=0.015)
