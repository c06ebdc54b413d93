"""Incentive regions: where a player gains from a small random shake of c."""
import logging
import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from src.bargaining.geometry import BargainingProblem, Payoff
from src.analysis.perturbation import build_payoff_map
from src.solvers.harmonic import GridArg
from src.utils.config import DEFAULT_REGION_STEP
from src.utils.errors import InvalidConfig

logger = logging.getLogger(__name__)

GAIN = "gain"
LOSE = "lose"
NEUTRAL = "neutral"
OUT_OF_RANGE = "out-of-range"


@dataclass(frozen=True)
class RegionMap:
    solver: str
    points: np.ndarray
    laplacian: np.ndarray
    labels: np.ndarray
    grid_step: float
    fd_arm: float
    band: float

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "c1": self.points[:, 0],
            "c2": self.points[:, 1],
            "lap1": self.laplacian[:, 0],
            "lap2": self.laplacian[:, 1],
            "label1": self.labels[:, 0],
            "label2": self.labels[:, 1],
        })

    def counts(self, player: int) -> dict:
        values, counts = np.unique(self.labels[:, player - 1], return_counts=True)
        return {str(v): int(n) for v, n in zip(values, counts)}


def label_laplacian(value: float, band: float) -> str:
    if math.isnan(value):
        return OUT_OF_RANGE
    if value > band:
        return GAIN
    if value < -band:
        return LOSE
    return NEUTRAL


def region_grid(problem: BargainingProblem, grid_step: float) -> np.ndarray:
    """Multiples of grid_step inside F"""
    pts = problem.feasible.points
    lo = np.ceil(pts.min(axis=0) / grid_step - 1e-9).astype(int)
    hi = np.floor(pts.max(axis=0) / grid_step + 1e-9).astype(int)
    xs = np.arange(lo[0], hi[0] + 1) * grid_step
    ys = np.arange(lo[1], hi[1] + 1) * grid_step
    grid_x, grid_y = np.meshgrid(xs, ys)
    candidates = np.column_stack([grid_x.ravel(), grid_y.ravel()])
    inside = [problem.feasible.contains(c) for c in candidates]
    return candidates[np.asarray(inside, dtype=bool)]


def _check_arm(grid_step: float, fd_arm: float) -> None:
    if fd_arm <= 0.0 or grid_step < 2.0 * fd_arm:
        raise InvalidConfig(f"grid step {grid_step} must be at least twice the finite-difference arm {fd_arm:.4g}")


def incentive_regions(
    solver_id: str,
    problem: BargainingProblem,
    grid_step: float = DEFAULT_REGION_STEP,
    fd_arm: Optional[float] = None,
    grid: GridArg = None,
) -> RegionMap:
    """Sign of the discrete Laplacian of each player's payoff map on a grid of c

    Without fd_arm the arm is the smallest one that keeps the neutral band
    under the map's evaluation precision target.
    """
    if fd_arm is not None:
        _check_arm(grid_step, fd_arm)
    start_time = time.time()
    payoff_map = build_payoff_map(solver_id, problem, grid)
    if fd_arm is None:
        fd_arm = payoff_map.default_arm()
        _check_arm(grid_step, fd_arm)
        logger.info(f"Finite-difference arm {fd_arm:.4g} chosen for {solver_id}")
    band = payoff_map.neutral_band(fd_arm)
    if band > 1e-2:
        logger.warning(f"Neutral band {band:.3g} is wide for arm {fd_arm}; refine the polygon or grow the arm")

    points = region_grid(problem, grid_step)
    laplacian = np.full((len(points), 2), np.nan)
    for k, c in enumerate(points):
        if problem.feasible.boundary_distance(c) < fd_arm * (1.0 + 1e-9):
            continue
        value = payoff_map.laplacian(c, fd_arm)
        if value is not None:
            laplacian[k] = value
    labels = np.array(
        [[label_laplacian(v, band) for v in row] for row in laplacian], dtype=object
    ).reshape(len(points), 2)

    logger.info(f"Region map for {solver_id}: {len(points)} points, completed in {time.time() - start_time:.2f}s")
    return RegionMap(solver_id, points, laplacian, labels, grid_step, fd_arm, band)


def region_boundary_height(region_map: RegionMap, player: int = 1, label: str = GAIN) -> float:
    """Median over grid columns of the top of the labelled region, half a step above its last row"""
    labels = region_map.labels[:, player - 1]
    points = region_map.points
    heights = []
    for c1 in np.unique(points[:, 0]):
        column = points[:, 0] == c1
        hit = column & (labels == label)
        other = column & (labels != label) & (labels != OUT_OF_RANGE)
        if hit.any() and other.any():
            heights.append(points[hit, 1].max() + 0.5 * region_map.grid_step)
    if not heights:
        return math.nan
    return float(np.median(heights))


def nash_parabola_closed_form(c: Sequence[float]) -> Payoff:
    """Nash payoff on {u2 <= 1 - u1^2, u >= 0} as a function of the disagreement point"""
    c1, c2 = float(c[0]), float(c[1])
    phi1 = (c1 + math.sqrt(3.0 + c1 * c1 - 3.0 * c2)) / 3.0
    return Payoff(phi1, 1.0 - phi1 * phi1)


def nash_parabola_laplacian(c: Sequence[float]) -> float:
    """Laplacian of the player-1 closed form"""
    c1, c2 = float(c[0]), float(c[1])
    s = math.sqrt(3.0 + c1 * c1 - 3.0 * c2)
    return (0.25 - c2) / s ** 3
