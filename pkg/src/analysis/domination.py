"""Sweep random problems for instances where a challenger fails to dominate S_Delta."""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.bargaining.geometry import (
    BargainingProblem,
    Payoff,
    comprehensive_hull,
    make_problem,
    normalize,
    preset_problem,
)
from src.bargaining.solutions import Solution, closed_form_solver
from src.solvers import kernels
from src.solvers.harmonic import s_delta
from src.utils.config import DOMINATION_GRID_H
from src.utils.errors import InvalidConfig

logger = logging.getLogger(__name__)

SWEEP_PRESETS = ("triangle", "trapezoid", "parabola")
CHALLENGERS = ("ks", "nash")


@dataclass(frozen=True)
class DominationConfig:
    grid_h: float = DOMINATION_GRID_H
    challenger: str = "ks"
    include_presets: bool = True
    mode: str = "symmetrized"
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise InvalidConfig(f"workers must be >= 1, got {self.workers}")
        if self.challenger not in CHALLENGERS:
            raise InvalidConfig(f"challenger must be one of {', '.join(CHALLENGERS)}, got {self.challenger!r}")


@dataclass(frozen=True)
class DominationRow:
    name: str
    challenger: Payoff
    s_delta: Payoff
    margin1: float
    margin2: float
    band: float
    violated: bool


@dataclass
class DominationReport:
    challenger: str
    seed: int
    grid_h: float
    rows: List[DominationRow] = field(default_factory=list)

    @property
    def violations(self) -> List[DominationRow]:
        return [row for row in self.rows if row.violated]

    @property
    def min_margin(self) -> Tuple[float, float]:
        if not self.rows:
            return (float("nan"), float("nan"))
        return (min(row.margin1 for row in self.rows), min(row.margin2 for row in self.rows))

    @property
    def passed(self) -> bool:
        return not self.violations

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                "instance": row.name,
                "x1": row.challenger.u1,
                "x2": row.challenger.u2,
                "s1": row.s_delta.u1,
                "s2": row.s_delta.u2,
                "margin1": row.margin1,
                "margin2": row.margin2,
                "band": row.band,
                "violated": row.violated,
            }
            for row in self.rows
        ])


def random_problem(seed: int, index: int) -> BargainingProblem:
    """Normalized comprehensive hull of 8-16 uniform points in the unit square"""
    rng = np.random.default_rng([seed, index])
    count = int(rng.integers(8, 17))
    points = rng.uniform(0.0, 1.0, size=(count, 2))
    problem = make_problem(comprehensive_hull(points), (0.0, 0.0))
    normalized, _ = normalize(problem)
    return normalized


def evaluate_domination(name: str, challenger: Payoff, reference: Payoff, band: float) -> DominationRow:
    margin1 = challenger.u1 - reference.u1
    margin2 = challenger.u2 - reference.u2
    return DominationRow(name, challenger, reference, margin1, margin2, band, min(margin1, margin2) < -band)


def _instances(count: int, seed: int, include_presets: bool) -> List[Tuple[str, Callable[[], BargainingProblem]]]:
    items: List[Tuple[str, Callable[[], BargainingProblem]]] = []
    if include_presets:
        items += [(name, lambda name=name: preset_problem(name)) for name in SWEEP_PRESETS]
    items += [(f"random-{seed}-{k}", lambda k=k: random_problem(seed, k)) for k in range(count)]
    return items


def domination_sweep(
    instance_count: int,
    seed: int,
    config: Optional[DominationConfig] = None,
    evaluate: Callable[[str, Payoff, Payoff, float], DominationRow] = evaluate_domination,
) -> DominationReport:
    """Compare the challenger with S_Delta (PDE route) on presets and seeded random problems"""
    if instance_count < 1:
        raise InvalidConfig(f"instance count must be >= 1, got {instance_count}")
    config = config or DominationConfig()
    challenger = closed_form_solver(config.challenger)
    threaded = kernels.set_workers(config.workers)
    report = DominationReport(config.challenger, seed, config.grid_h)
    start_time = time.time()
    for name, build in _instances(instance_count, seed, config.include_presets):
        problem = build()
        _, transform = normalize(problem)
        reference: Solution = s_delta(problem, config.grid_h, config.mode, threaded=threaded)
        band = 3.0 * config.grid_h * max(transform.a1, transform.a2)
        row = evaluate(name, challenger(problem).payoff, reference.payoff, band)
        if row.violated:
            logger.warning(
                f"{config.challenger} fails to dominate S_Delta on {name}: margins ({row.margin1:.4f}, {row.margin2:.4f})"
            )
        report.rows.append(row)
    logger.info(
        f"Domination sweep ({config.challenger}, {len(report.rows)} instances): "
        f"{len(report.violations)} violations, completed in {time.time() - start_time:.2f}s"
    )
    return report
