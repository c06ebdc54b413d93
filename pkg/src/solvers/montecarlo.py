"""
Reflected random walk estimator for S_Delta.

Each walker moves by small radially symmetric steps drawn from a
counter-based generator keyed by (seed, walker, move), so results do not
depend on how walkers are scheduled across threads.
"""
import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from src.bargaining.geometry import (
    AffineMap,
    BargainingProblem,
    BoundaryDomain,
    Payoff,
    apply_map,
    apply_map_array,
    normalize,
    solver_domain,
)
from src.bargaining.solutions import Solution
from src.solvers import kernels
from src.utils.config import (
    DEFAULT_MAX_MOVES,
    DEFAULT_STEP,
    DEFAULT_WALKERS,
    GEOM_TOL,
    MAX_STEP,
)
from src.utils.errors import BoundaryStart, InvalidConfig, MaxMovesExceeded, UnknownVariant

logger = logging.getLogger(__name__)

STEP_LAWS: Dict[str, int] = {
    "uniform-angle": kernels.LAW_UNIFORM_ANGLE,
    "gaussian-isotropic": kernels.LAW_GAUSSIAN,
    "two-point-axis": kernels.LAW_TWO_POINT_AXIS,
}

# Candidate-edge margin in step lengths; longer gaussian steps scan every edge
LAW_MARGIN = {
    "uniform-angle": 1.0,
    "gaussian-isotropic": 4.0,
    "two-point-axis": 1.0,
}

SEED_MASK = (1 << 64) - 1
ORIGIN = (0.0, 0.0)


@dataclass(frozen=True)
class WalkConfig:
    step: float = DEFAULT_STEP
    walkers: int = DEFAULT_WALKERS
    seed: int = 0
    max_moves: int = DEFAULT_MAX_MOVES
    law: str = "uniform-angle"
    mode: str = "symmetrized"
    weak_pareto_absorbs: bool = False
    workers: int = 1

    def __post_init__(self):
        if not (0.0 < self.step <= MAX_STEP):
            raise InvalidConfig(f"step must satisfy 0 < step <= {MAX_STEP}, got {self.step}")
        if self.walkers < 1:
            raise InvalidConfig(f"walkers must be >= 1, got {self.walkers}")
        if self.max_moves < 1:
            raise InvalidConfig(f"max moves must be >= 1, got {self.max_moves}")
        if self.law not in STEP_LAWS:
            raise UnknownVariant(f"unknown step law {self.law!r}; available: {', '.join(STEP_LAWS)}")
        if self.workers < 1:
            raise InvalidConfig(f"workers must be >= 1, got {self.workers}")


class WalkOutcome(NamedTuple):
    absorbed_at: Payoff
    moves: int


@dataclass(frozen=True)
class WalkBatch:
    """Per-walker results in normalized coordinates"""

    absorbed: np.ndarray
    moves: np.ndarray
    status: np.ndarray


class PackedDomain:
    """Flat arrays plus a uniform cell grid listing the edges near each cell"""

    def __init__(self, domain: BoundaryDomain, margin: float):
        self.domain = domain
        self.vx = np.ascontiguousarray(domain.points[:, 0])
        self.vy = np.ascontiguousarray(domain.points[:, 1])
        self.absorbing = np.ascontiguousarray(domain.absorbing)
        self.folded = bool(domain.folded)
        self.margin = float(margin)
        self.all_edges = np.arange(len(self.vx), dtype=np.int64)

        xmin, ymin, xmax, ymax = domain.bounds
        self.cell = max(self.margin, (max(xmax - xmin, ymax - ymin)) / 256.0)
        self.gx0 = xmin - self.cell
        self.gy0 = ymin - self.cell
        self.ncx = int(math.ceil((xmax - self.gx0) / self.cell)) + 1
        self.ncy = int(math.ceil((ymax - self.gy0) / self.cell)) + 1
        self.cand_ptr, self.cand_idx = self._bucket_edges()

    def _bucket_edges(self) -> Tuple[np.ndarray, np.ndarray]:
        a = np.column_stack([self.vx, self.vy])
        b = np.roll(a, -1, axis=0)
        lo = np.minimum(a, b) - self.margin
        hi = np.maximum(a, b) + self.margin
        buckets = [[] for _ in range(self.ncx * self.ncy)]
        for e in range(len(a)):
            i0 = max(int((lo[e, 0] - self.gx0) // self.cell), 0)
            i1 = min(int((hi[e, 0] - self.gx0) // self.cell), self.ncx - 1)
            j0 = max(int((lo[e, 1] - self.gy0) // self.cell), 0)
            j1 = min(int((hi[e, 1] - self.gy0) // self.cell), self.ncy - 1)
            for j in range(j0, j1 + 1):
                row = j * self.ncx
                for i in range(i0, i1 + 1):
                    buckets[row + i].append(e)
        counts = np.array([len(bucket) for bucket in buckets], dtype=np.int64)
        ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        idx = np.array([e for bucket in buckets for e in bucket], dtype=np.int64)
        return ptr, idx

    def kernel_args(self) -> tuple:
        return (
            self.vx, self.vy, self.absorbing, self.folded,
            self.gx0, self.gy0, self.cell, self.ncx, self.ncy,
            self.cand_ptr, self.cand_idx, self.all_edges, self.margin,
        )


def _seed_bits(seed: int) -> np.uint64:
    return np.uint64(int(seed) & SEED_MASK)


def pack_domain(domain: BoundaryDomain, config: WalkConfig) -> PackedDomain:
    return PackedDomain(domain, LAW_MARGIN[config.law] * config.step * (1.0 + 1e-9))


def counter_uniform(seed: int, walker: int, move: int, lane: int = 0) -> float:
    """The walkers' uniform variate for (seed, walker, move, lane)"""
    return float(kernels.counter_uniform(_seed_bits(seed), walker, move, lane))


def _check_start(domain: BoundaryDomain, start) -> None:
    if not domain.contains(start):
        raise BoundaryStart(f"walk start {tuple(start)} lies outside the domain")
    if domain.boundary_distance(start, absorbing_only=True) <= GEOM_TOL:
        raise BoundaryStart(f"walk start {tuple(start)} lies on the absorbing boundary")


def walk_once(domain: BoundaryDomain, start, config: WalkConfig, walker: int,
              packed: Optional[PackedDomain] = None) -> WalkOutcome:
    """Walk a single walker from start until it is absorbed"""
    _check_start(domain, start)
    packed = packed or pack_domain(domain, config)
    x, y, moves, status = kernels.walk_one(
        float(start[0]), float(start[1]), _seed_bits(config.seed), int(walker), config.step,
        STEP_LAWS[config.law], int(config.max_moves), *packed.kernel_args(),
    )
    if status:
        raise MaxMovesExceeded(
            f"walker {walker} not absorbed after {config.max_moves} moves; step {config.step} too small for the domain"
        )
    return WalkOutcome(Payoff(float(x), float(y)), int(moves))


def run_walkers(domain: BoundaryDomain, start, config: WalkConfig) -> WalkBatch:
    """All walkers from one start point; raises if any walker hits the move cap"""
    _check_start(domain, start)
    packed = pack_domain(domain, config)
    logger.info(
        f"Running {config.walkers} walkers (law={config.law}, step={config.step}, workers={config.workers})"
    )
    start_time = time.time()
    runner = kernels.walk_all_threaded if kernels.set_workers(config.workers) else kernels.walk_all
    hit, moves, status = runner(
        float(start[0]), float(start[1]), _seed_bits(config.seed), int(config.walkers), config.step,
        STEP_LAWS[config.law], int(config.max_moves), *packed.kernel_args(),
    )
    elapsed = time.time() - start_time
    stuck = int(np.count_nonzero(status))
    if stuck:
        logger.error(f"{stuck} walkers reached the move cap of {config.max_moves}")
        raise MaxMovesExceeded(
            f"{stuck} of {config.walkers} walkers not absorbed after {config.max_moves} moves"
        )
    logger.info(f"Walk completed in {elapsed:.2f}s, mean moves {moves.mean():.1f}")
    return WalkBatch(hit, moves, status)


def simulate(problem: BargainingProblem, config: WalkConfig) -> Tuple[WalkBatch, AffineMap]:
    """Normalize, build the walk domain and run every walker from the disagreement point"""
    normalized, transform = normalize(problem)
    domain = solver_domain(normalized, config.mode, config.weak_pareto_absorbs)
    batch = run_walkers(domain, ORIGIN, config)
    return batch, transform


def summarize_batch(batch: WalkBatch, transform: AffineMap, config: WalkConfig) -> Solution:
    """Mean absorbed payoff mapped back, with per-coordinate standard errors"""
    # contiguous rows so numpy reduces each coordinate by pairwise summation
    columns = np.ascontiguousarray(batch.absorbed.T)
    mean = columns.mean(axis=1)
    if config.walkers > 1:
        stderr = columns.std(axis=1, ddof=1) / math.sqrt(config.walkers)
    else:
        stderr = np.array([math.inf, math.inf])
    return Solution(
        apply_map(transform, mean),
        "s-delta-mc",
        {
            "stderr1": float(transform.a1 * stderr[0]),
            "stderr2": float(transform.a2 * stderr[1]),
            "walkers": float(config.walkers),
            "mean-moves": float(np.mean(batch.moves)),
            "step": config.step,
        },
    )


def estimate_s_delta_mc(problem: BargainingProblem, config: WalkConfig) -> Solution:
    batch, transform = simulate(problem, config)
    return summarize_batch(batch, transform, config)


def step_distribution_variant(problem: BargainingProblem, config: WalkConfig, variant: str) -> Solution:
    if variant not in STEP_LAWS:
        raise UnknownVariant(f"unknown step variant {variant!r}; available: {', '.join(STEP_LAWS)}")
    solution = estimate_s_delta_mc(problem, replace(config, law=variant))
    return replace(solution, diagnostics={**solution.diagnostics, "variant": float(STEP_LAWS[variant])})


def walker_frame(batch: WalkBatch, transform: AffineMap) -> pd.DataFrame:
    """Per-walker absorption points in original coordinates"""
    absorbed = apply_map_array(transform, batch.absorbed)
    return pd.DataFrame(
        {
            "walker": np.arange(len(absorbed)),
            "u1": absorbed[:, 0],
            "u2": absorbed[:, 1],
            "moves": batch.moves,
        }
    )
