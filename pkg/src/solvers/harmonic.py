"""
Finite-difference harmonic solver for S_Delta.

The Laplace problems are solved on a cell-centred grid (nodes at
``x0 + (i + 1/2) h``) so the origin of a normalized problem sits on a cell
corner. Cut cells use the Shortley-Weller unequal-arm stencil; reflecting
arms use a first-order ghost mirror. The linear system is relaxed by
red-black SOR in the compiled kernels.
"""
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.bargaining.geometry import (
    BargainingProblem,
    BoundaryDomain,
    Payoff,
    apply_map,
    ideal_point,
    normalize,
    pareto_frontier,
    solver_domain,
)
from src.bargaining.solutions import Solution
from src.solvers import kernels
from src.utils.config import (
    DEFAULT_GRID_H,
    ITERATE_MAX,
    ITERATE_TOL,
    MAX_GRID_H,
    MEAN_VALUE_POINTS,
    SOR_MAX_SWEEPS,
    SOR_OMEGA,
    SOR_TOL,
    env_weak_pareto_absorbs,
)
from src.utils.errors import (
    DegenerateNormalization,
    DegenerateSet,
    DiskOutsideDomain,
    InvalidConfig,
    NoConvergence,
    NotNormalized,
)

logger = logging.getLogger(__name__)

KEYS_A = -0.5


@dataclass(frozen=True)
class GridSpec:
    h: float
    x0: float
    y0: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (0.0 < self.h <= MAX_GRID_H):
            raise InvalidConfig(f"grid spacing h must satisfy 0 < h <= {MAX_GRID_H}, got {self.h}")

    @classmethod
    def covering(cls, domain: BoundaryDomain, h: float) -> "GridSpec":
        """Smallest h-aligned box around the domain plus one ghost cell on each side"""
        if not (0.0 < h <= MAX_GRID_H):
            raise InvalidConfig(f"grid spacing h must satisfy 0 < h <= {MAX_GRID_H}, got {h}")
        xmin, ymin, xmax, ymax = domain.bounds
        x0 = math.floor(xmin / h) * h - h
        y0 = math.floor(ymin / h) * h - h
        nx = int(math.ceil((xmax - x0) / h)) + 1
        ny = int(math.ceil((ymax - y0) / h)) + 1
        return cls(h, x0, y0, nx, ny)

    def covers(self, domain: BoundaryDomain) -> bool:
        xmin, ymin, xmax, ymax = domain.bounds
        return (
            self.x0 + 0.5 * self.h < xmin
            and self.y0 + 0.5 * self.h < ymin
            and self.x0 + (self.nx - 0.5) * self.h > xmax
            and self.y0 + (self.ny - 0.5) * self.h > ymax
        )

    def node_axes(self) -> Tuple[np.ndarray, np.ndarray]:
        xs = self.x0 + (np.arange(self.nx) + 0.5) * self.h
        ys = self.y0 + (np.arange(self.ny) + 0.5) * self.h
        return xs, ys


def _keys_weights(t: float) -> np.ndarray:
    s = np.abs(np.array([t + 1.0, t, 1.0 - t, 2.0 - t]))
    a = KEYS_A
    near = ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0
    far = ((a * s - 5.0 * a) * s + 8.0 * a) * s - 4.0 * a
    return np.where(s <= 1.0, near, far)


@dataclass(frozen=True, eq=False)
class HarmonicField:
    """One player's discrete harmonic function; exterior nodes hold NaN"""

    spec: GridSpec
    values: np.ndarray
    kind: np.ndarray
    regular: np.ndarray
    player: int
    domain: BoundaryDomain
    boundary_min: float
    boundary_max: float
    residual: float = 0.0
    sweeps: int = 0

    def _locate(self, p) -> Tuple[int, int, float, float]:
        fx = (float(p[0]) - self.spec.x0) / self.spec.h - 0.5
        fy = (float(p[1]) - self.spec.y0) / self.spec.h - 0.5
        i, j = math.floor(fx), math.floor(fy)
        return i, j, fx - i, fy - j

    def _window(self, i: int, j: int, size: int, offset: int) -> Optional[np.ndarray]:
        i0, j0 = i - offset, j - offset
        if i0 < 0 or j0 < 0 or i0 + size > self.spec.nx or j0 + size > self.spec.ny:
            return None
        return self.values[j0:j0 + size, i0:i0 + size]

    def value_at(self, p) -> float:
        """Bilinear interpolation, weights renormalized over in-domain nodes"""
        i, j, tx, ty = self._locate(p)
        block = self._window(i, j, 2, 0)
        if block is None:
            return math.nan
        w = np.outer([1.0 - ty, ty], [1.0 - tx, tx])
        ok = ~np.isnan(block)
        total = float(w[ok].sum())
        if total <= 0.0:
            return math.nan
        return float(np.sum(w[ok] * block[ok]) / total)

    def cubic_at(self, p) -> float:
        """Keys cubic convolution; falls back to bilinear next to the boundary"""
        i, j, tx, ty = self._locate(p)
        block = self._window(i, j, 4, 1)
        if block is None or np.isnan(block).any():
            return self.value_at(p)
        return float(_keys_weights(ty) @ block @ _keys_weights(tx))

    def nearest_node(self, p) -> Tuple[int, int]:
        i = int(round((float(p[0]) - self.spec.x0) / self.spec.h - 0.5))
        j = int(round((float(p[1]) - self.spec.y0) / self.spec.h - 0.5))
        return i, j

    def second_differences(self, p) -> Optional[Tuple[float, float]]:
        """(d2/dx2, d2/dy2) by the 5-point stencil at the nearest regular node, else None"""
        i, j = self.nearest_node(p)
        if not (1 <= i < self.spec.nx - 1 and 1 <= j < self.spec.ny - 1) or not self.regular[j, i]:
            return None
        v = self.values
        h2 = self.spec.h ** 2
        dxx = (v[j, i + 1] + v[j, i - 1] - 2.0 * v[j, i]) / h2
        dyy = (v[j + 1, i] + v[j - 1, i] - 2.0 * v[j, i]) / h2
        return float(dxx), float(dyy)

    def nodal_laplacian(self, p) -> Optional[float]:
        second = self.second_differences(p)
        return None if second is None else second[0] + second[1]

    def interior_points(self) -> np.ndarray:
        xs, ys = self.spec.node_axes()
        jj, ii = np.nonzero(~np.isnan(self.values))
        return np.column_stack([xs[ii], ys[jj]])


def solve_on_domain(
    domain: BoundaryDomain,
    spec: GridSpec,
    threaded: bool = False,
    max_sweeps: int = SOR_MAX_SWEEPS,
) -> Tuple[HarmonicField, HarmonicField]:
    """Assemble the stencil on the domain and relax both player fields to SOR_TOL"""
    if not spec.covers(domain):
        raise InvalidConfig("grid box does not cover the domain with a ghost margin")
    vx = np.ascontiguousarray(domain.points[:, 0])
    vy = np.ascontiguousarray(domain.points[:, 1])
    start_time = time.time()
    kind, ids, nbr, weight, rhs, dval, colour, regular, arm, g = kernels.assemble_stencil(
        spec.x0, spec.y0, spec.h, spec.nx, spec.ny, vx, vy,
        np.ascontiguousarray(domain.absorbing), bool(domain.folded),
    )
    cut = arm == kernels.ARM_DIRICHLET
    boundary = np.vstack([g[cut], dval[kind == kernels.DIRICHLET]])
    if len(boundary) == 0:
        raise DegenerateSet("domain has no absorbing boundary within reach of the grid")
    n = nbr.shape[0]
    logger.info(f"Assembled {n} unknowns on a {spec.nx}x{spec.ny} grid (h={spec.h:.6g})")

    u = np.empty((n, 2))
    u[:] = boundary.mean(axis=0)
    red = np.flatnonzero(colour == 0)
    black = np.flatnonzero(colour == 1)
    relax = kernels.sor_solve_threaded if threaded else kernels.sor_solve
    sweeps, residual = relax(u, red, black, nbr, weight, rhs, SOR_OMEGA, SOR_TOL, max_sweeps)
    elapsed = time.time() - start_time
    if residual > SOR_TOL:
        logger.error(f"SOR stalled at residual {residual:.3e} after {sweeps} sweeps")
        raise NoConvergence(
            f"SOR residual {residual:.3e} > {SOR_TOL:.0e} after {sweeps} sweeps; grid too coarse or domain degenerate"
        )
    logger.info(f"SOR converged in {sweeps} sweeps, residual {residual:.2e}, completed in {elapsed:.2f}s")

    regular_grid = np.zeros(kind.shape, dtype=bool)
    unknown = ids >= 0
    regular_grid[unknown] = regular
    on_boundary = kind == kernels.DIRICHLET
    fields = []
    for player in (0, 1):
        values = np.full(kind.shape, np.nan)
        values[unknown] = u[:, player]
        values[on_boundary] = dval[on_boundary, player]
        values.setflags(write=False)
        fields.append(
            HarmonicField(
                spec=spec,
                values=values,
                kind=kind,
                regular=regular_grid,
                player=player + 1,
                domain=domain,
                boundary_min=float(boundary[:, player].min()),
                boundary_max=float(boundary[:, player].max()),
                residual=float(residual),
                sweeps=int(sweeps),
            )
        )
    return fields[0], fields[1]


def field_frame(phi1: HarmonicField, phi2: HarmonicField) -> pd.DataFrame:
    """Grid dump (x, y, phi1, phi2), row-major from the minimum corner; exterior nodes omitted"""
    xs, ys = phi1.spec.node_axes()
    grid_x, grid_y = np.meshgrid(xs, ys)
    inside = ~np.isnan(phi1.values)
    return pd.DataFrame({
        "x": grid_x[inside],
        "y": grid_y[inside],
        "phi1": phi1.values[inside],
        "phi2": phi2.values[inside],
    })


def _check_normalized(problem: BargainingProblem) -> None:
    c = problem.disagreement
    ideal = ideal_point(problem)
    if max(abs(c.u1), abs(c.u2), abs(ideal.u1 - 1.0), abs(ideal.u2 - 1.0)) > 1e-9:
        raise NotNormalized(
            f"harmonic solve needs c = (0, 0) and ideal = (1, 1), got c = {tuple(c)}, ideal = {tuple(ideal)}"
        )


GridArg = Union[None, float, GridSpec]


def _grid_for(domain: BoundaryDomain, grid: GridArg) -> GridSpec:
    if isinstance(grid, GridSpec):
        return grid
    return GridSpec.covering(domain, DEFAULT_GRID_H if grid is None else float(grid))


def solve_harmonic(
    problem: BargainingProblem,
    grid: GridArg = None,
    mode: str = "symmetrized",
    weak_pareto_absorbs: Optional[bool] = None,
    threaded: bool = False,
) -> Tuple[HarmonicField, HarmonicField]:
    """Solve for (phi1, phi2) on a normalized problem"""
    _check_normalized(problem)
    if weak_pareto_absorbs is None:
        weak_pareto_absorbs = env_weak_pareto_absorbs()
    domain = solver_domain(problem, mode, weak_pareto_absorbs)
    return solve_on_domain(domain, _grid_for(domain, grid), threaded=threaded)


def s_delta(
    problem: BargainingProblem,
    grid: GridArg = None,
    mode: str = "symmetrized",
    weak_pareto_absorbs: Optional[bool] = None,
    threaded: bool = False,
) -> Solution:
    normalized, transform = normalize(problem)
    phi1, phi2 = solve_harmonic(normalized, grid, mode, weak_pareto_absorbs, threaded)
    at_origin = (phi1.value_at((0.0, 0.0)), phi2.value_at((0.0, 0.0)))
    payoff = apply_map(transform, at_origin)
    return Solution(
        payoff,
        "s-delta",
        {
            "h": phi1.spec.h,
            "residual": phi1.residual,
            "sweeps": float(phi1.sweeps),
            "unknowns": float(np.count_nonzero(phi1.kind == kernels.INTERIOR)),
        },
    )


def richardson_s_delta(problem: BargainingProblem, h: float = DEFAULT_GRID_H, mode: str = "symmetrized") -> Solution:
    """Second-order extrapolation (4 S(h/2) - S(h)) / 3 of the grid solutions"""
    coarse = s_delta(problem, h, mode)
    fine = s_delta(problem, h / 2.0, mode)
    extrapolated = Payoff(
        (4.0 * fine.payoff.u1 - coarse.payoff.u1) / 3.0,
        (4.0 * fine.payoff.u2 - coarse.payoff.u2) / 3.0,
    )
    change = max(abs(fine.payoff.u1 - coarse.payoff.u1), abs(fine.payoff.u2 - coarse.payoff.u2))
    return Solution(extrapolated, "s-delta", {"h": h, "h-change": change, "extrapolated": 1.0})


def mean_value_residual(field: HarmonicField, p, r: float) -> float:
    """|circle average - centre value| with a 32-point trapezoidal rule"""
    h = field.spec.h
    if r < 4.0 * h * (1.0 - 1e-12):
        raise InvalidConfig(f"mean-value radius must be at least 4h = {4.0 * h:.6g}, got {r}")
    if not field.domain.contains(p) or field.domain.boundary_distance(p) < r:
        raise DiskOutsideDomain(f"disk of radius {r} around {tuple(p)} leaves the solver domain")
    angles = 2.0 * np.pi * np.arange(MEAN_VALUE_POINTS) / MEAN_VALUE_POINTS
    ring = [field.value_at((p[0] + r * math.cos(a), p[1] + r * math.sin(a))) for a in angles]
    return abs(float(np.mean(ring)) - field.value_at(p))


def sample_field(domain: BoundaryDomain, h: float, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> HarmonicField:
    """Field holding fn sampled on the in-domain grid nodes"""
    spec = GridSpec.covering(domain, h)
    vx = np.ascontiguousarray(domain.points[:, 0])
    vy = np.ascontiguousarray(domain.points[:, 1])
    kind = kernels.classify_nodes(spec.x0, spec.y0, spec.h, spec.nx, spec.ny, vx, vy)
    xs, ys = spec.node_axes()
    grid_x, grid_y = np.meshgrid(xs, ys)
    inside = kind != kernels.EXTERIOR
    values = np.where(inside, fn(grid_x, grid_y), np.nan)
    values.setflags(write=False)
    return HarmonicField(
        spec=spec,
        values=values,
        kind=kind,
        regular=inside,
        player=1,
        domain=domain,
        boundary_min=float(np.nanmin(values)),
        boundary_max=float(np.nanmax(values)),
    )


def iterate_s_delta(
    problem: BargainingProblem,
    tol: float = ITERATE_TOL,
    grid: GridArg = None,
    mode: str = "symmetrized",
    max_iterations: int = ITERATE_MAX,
) -> Tuple[Solution, List[Payoff]]:
    """Move the disagreement point to S_Delta until it stops moving"""
    chain = pareto_frontier(problem)
    h = DEFAULT_GRID_H if grid is None else (grid.h if isinstance(grid, GridSpec) else float(grid))
    try:
        _, first_map = normalize(problem)
        snap = 2.0 * h * max(first_map.a1, first_map.a2)
    except DegenerateNormalization:
        snap = 2.0 * h
    current = problem
    trace: List[Payoff] = [problem.disagreement]
    start_time = time.time()
    for iteration in range(1, max_iterations + 1):
        try:
            step_solution = s_delta(current, grid, mode)
        except DegenerateNormalization:
            logger.info(f"Iteration {iteration}: disagreement point has no room left; stopping")
            break
        nxt = step_solution.payoff
        trace.append(nxt)
        moved = math.hypot(nxt.u1 - current.disagreement.u1, nxt.u2 - current.disagreement.u2)
        if not problem.feasible.contains(nxt):
            logger.info(f"Iteration {iteration}: iterate left F by rounding; projecting onto the frontier")
            trace[-1] = Payoff(*map(float, chain.project(nxt)))
            break
        current = BargainingProblem(problem.feasible, nxt)
        if moved < tol:
            break
    else:
        raise NoConvergence(f"iterated S_Delta did not settle within {max_iterations} iterations")

    limit = trace[-1]
    distance = chain.distance(limit)
    if distance <= snap:
        limit = Payoff(*map(float, chain.project(limit)))
        distance = 0.0
    ratios = contraction_ratios(trace, trace[-1], 10.0 * tol)
    rate = max(ratios) if ratios else 0.0
    if rate >= 1.0:
        logger.warning(f"Iterated S_Delta is not contracting: worst distance ratio {rate:.3f}")
    logger.info(f"Iterated S_Delta: {len(trace) - 1} steps, completed in {time.time() - start_time:.2f}s")
    diagnostics = {
        "iterations": float(len(trace) - 1),
        "frontier-distance": distance,
        "contraction": rate,
        "h": h,
    }
    return Solution(limit, "iterated-s-delta", diagnostics), trace


def contraction_ratios(trace: Sequence[Payoff], limit: Payoff, floor: float) -> List[float]:
    """d(k+1)/d(k) for distances to the limit while d(k) stays above floor"""
    distances = [math.hypot(p.u1 - limit.u1, p.u2 - limit.u2) for p in trace]
    return [b / a for a, b in zip(distances, distances[1:]) if a > floor]
