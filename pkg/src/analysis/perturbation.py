"""
Payoff maps c -> S(F, c) and the small-perturbation expectations built on them.

A payoff map is evaluated many times around one disagreement point, so the
harmonic variant solves the Laplace problems once at the base point and
reads the field at transformed disagreement points afterwards.
"""
import logging
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from src.bargaining.geometry import (
    BargainingProblem,
    ConvexPolygon,
    Payoff,
    apply_map,
    invert_map,
    normalize,
)
from src.bargaining.solutions import closed_form_solver
from src.solvers.harmonic import GridArg, solve_harmonic
from src.utils.config import (
    DEFAULT_EPS_LADDER,
    DEFAULT_FD_ARM,
    DEFAULT_N_ANGLES,
    EXACT_MAP_PRECISION,
    ISC_FLOOR,
    MIN_N_ANGLES,
    REGION_BAND_TARGET,
    SOR_TOL,
)
from src.utils.errors import DiskOutsideFeasible, InvalidConfig

logger = logging.getLogger(__name__)

# Frontiers with at least this many edges are treated as sampled curves
CURVE_EDGE_COUNT = 16


def curve_resolution(polygon: ConvexPolygon) -> float:
    """Evaluation accuracy of a closed-form solver on this polygon"""
    frontier = polygon.frontier_points
    if len(frontier) - 1 < CURVE_EDGE_COUNT:
        return EXACT_MAP_PRECISION
    longest = float(np.max(np.linalg.norm(np.diff(frontier, axis=0), axis=1)))
    return max(EXACT_MAP_PRECISION, 0.5 * longest)


class SolverPayoffMap:
    """c -> S(F, c) for a closed-form solver"""

    def __init__(self, solver_id: str, problem: BargainingProblem):
        self.solver_id = solver_id
        self.problem = problem
        self._solve = closed_form_solver(solver_id)
        self.precision = curve_resolution(problem.feasible)

    def __call__(self, c: Sequence[float]) -> np.ndarray:
        solution = self._solve(self.problem.with_disagreement(c))
        return np.array(solution.payoff, dtype=np.float64)

    def laplacian(self, c: Sequence[float], arm: float) -> Optional[np.ndarray]:
        centre = np.asarray(c, dtype=np.float64)
        total = -4.0 * self(centre)
        for offset in ((arm, 0.0), (-arm, 0.0), (0.0, arm), (0.0, -arm)):
            total += self(centre + np.array(offset))
        return total / (arm * arm)

    def neutral_band(self, arm: float) -> float:
        return self.precision / (arm * arm)

    def default_arm(self) -> float:
        """Smallest arm whose neutral band stays within REGION_BAND_TARGET"""
        return max(DEFAULT_FD_ARM, float(np.sqrt(self.precision / REGION_BAND_TARGET)))


class HarmonicPayoffMap:
    """c -> S_Delta(F, c) read off the fields solved at the base disagreement point"""

    solver_id = "s-delta"

    def __init__(self, problem: BargainingProblem, grid: GridArg = None, mode: str = "symmetrized"):
        self.problem = problem
        normalized, self.transform = normalize(problem)
        self.inverse = invert_map(self.transform)
        self.phi1, self.phi2 = solve_harmonic(normalized, grid, mode)
        self.h = self.phi1.spec.h
        self.precision = 4.0 * 10.0 * SOR_TOL

    def __call__(self, c: Sequence[float]) -> np.ndarray:
        q = apply_map(self.inverse, c)
        return np.array(apply_map(self.transform, (self.phi1.cubic_at(q), self.phi2.cubic_at(q))))

    def laplacian(self, c: Sequence[float], arm: float = 0.0) -> Optional[np.ndarray]:
        """Solver stencil at the nearest regular node; arm is fixed to the grid spacing"""
        q = apply_map(self.inverse, c)
        first = self.phi1.second_differences(q)
        second = self.phi2.second_differences(q)
        if first is None or second is None:
            return None
        a1, a2 = self.transform.a1, self.transform.a2
        return np.array([
            a1 * (first[0] / a1 ** 2 + first[1] / a2 ** 2),
            a2 * (second[0] / a1 ** 2 + second[1] / a2 ** 2),
        ])

    def neutral_band(self, arm: float = 0.0) -> float:
        a_max = max(self.transform.a1, self.transform.a2)
        a_min = min(self.transform.a1, self.transform.a2)
        return self.precision * a_max / (self.h * a_min) ** 2

    def default_arm(self) -> float:
        # laplacian uses the grid stencil; the arm only sets the boundary margin
        return DEFAULT_FD_ARM


def build_payoff_map(solver_id: str, problem: BargainingProblem, grid: GridArg = None):
    if solver_id == "s-delta":
        return HarmonicPayoffMap(problem, grid)
    return SolverPayoffMap(solver_id, problem)


@dataclass(frozen=True)
class PerturbationReport:
    solver: str
    base: Payoff
    eps: np.ndarray
    expectations: np.ndarray
    first_order: np.ndarray
    second_order: np.ndarray
    fit_residual: np.ndarray
    n_angles: int

    @property
    def tolerance(self) -> np.ndarray:
        return np.maximum(10.0 * self.fit_residual, ISC_FLOOR)

    @property
    def scaled_residuals(self) -> np.ndarray:
        """E[S(c + eps) - S(c)] / eps^2 per ladder rung"""
        return (self.expectations - np.array(self.base)) / (self.eps ** 2)[:, None]

    @property
    def classification(self) -> str:
        if np.any(np.abs(self.first_order) > self.tolerance):
            return "first-order"
        if np.any(np.abs(self.second_order) > self.tolerance):
            return "second-order"
        return "stable"

    @property
    def passed(self) -> bool:
        return self.classification == "stable"

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "eps": self.eps,
            "Eu1": self.expectations[:, 0],
            "Eu2": self.expectations[:, 1],
        })


def _check_disk(problem: BargainingProblem, eps: float) -> None:
    c = problem.disagreement
    if eps <= 0.0:
        raise InvalidConfig(f"perturbation radius must be positive, got {eps}")
    if not problem.feasible.contains(c) or problem.feasible.boundary_distance(c) < eps:
        raise DiskOutsideFeasible(f"disk of radius {eps} around c = {tuple(c)} leaves the feasible set")


def perturbed_expectation(
    solver_id: str,
    problem: BargainingProblem,
    eps: float,
    n_angles: int = DEFAULT_N_ANGLES,
    payoff_map=None,
) -> Payoff:
    """Average of S(F, c + eps (cos t, sin t)) over equally spaced angles"""
    if n_angles < MIN_N_ANGLES:
        raise InvalidConfig(f"n-angles must be >= {MIN_N_ANGLES}, got {n_angles}")
    _check_disk(problem, eps)
    payoff_map = payoff_map or build_payoff_map(solver_id, problem)
    c = np.array(problem.disagreement)
    angles = 2.0 * np.pi * np.arange(n_angles) / n_angles
    ring = c + eps * np.column_stack([np.cos(angles), np.sin(angles)])
    values = np.array([payoff_map(p) for p in ring])
    mean = np.ascontiguousarray(values.T).mean(axis=1)
    return Payoff(float(mean[0]), float(mean[1]))


def perturbation_fit(eps: Sequence[float], deltas: np.ndarray, order: int) -> np.ndarray:
    """Per-player k minimizing sum (delta - k eps^order)^2"""
    if order not in (1, 2):
        raise InvalidConfig(f"fit order must be 1 or 2, got {order}")
    powers = np.asarray(eps, dtype=np.float64) ** order
    deltas = np.asarray(deltas, dtype=np.float64).reshape(len(powers), -1)
    return powers @ deltas / float(powers @ powers)


def isc_residual(
    solver_id: str,
    problem: BargainingProblem,
    eps_ladder: Sequence[float] = DEFAULT_EPS_LADDER,
    n_angles: int = DEFAULT_N_ANGLES,
    grid: GridArg = None,
) -> PerturbationReport:
    """Fit E[S(c + eps) - S(c)] = a eps + b eps^2 per player over the ladder"""
    eps = np.asarray(eps_ladder, dtype=np.float64)
    if len(eps) < 2 or np.any(np.diff(eps) >= 0.0):
        raise InvalidConfig(f"eps ladder must be strictly decreasing with at least two values, got {list(eps_ladder)}")
    _check_disk(problem, float(eps[0]))
    start_time = time.time()
    payoff_map = build_payoff_map(solver_id, problem, grid)
    base = payoff_map(problem.disagreement)
    expectations = np.array([
        perturbed_expectation(solver_id, problem, float(e), n_angles, payoff_map) for e in eps
    ])
    deltas = expectations - base
    design = np.column_stack([eps, eps ** 2])
    coef, _, _, _ = np.linalg.lstsq(design, deltas, rcond=None)
    fitted = design @ coef
    fit_residual = np.sqrt(np.mean((deltas - fitted) ** 2, axis=0))
    report = PerturbationReport(
        solver=solver_id,
        base=Payoff(float(base[0]), float(base[1])),
        eps=eps,
        expectations=expectations,
        first_order=coef[0],
        second_order=coef[1],
        fit_residual=fit_residual,
        n_angles=n_angles,
    )
    logger.info(
        f"ISC {solver_id}: a={tuple(np.round(coef[0], 6))}, b={tuple(np.round(coef[1], 6))}, "
        f"{report.classification}, completed in {time.time() - start_time:.2f}s"
    )
    return report

