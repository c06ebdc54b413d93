"""Canonical bargaining solutions on polygonal problems."""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from src.bargaining.geometry import (
    BargainingProblem,
    ConvexPolygon,
    Payoff,
    as_payoff,
    ideal_point,
    pareto_frontier,
)
from src.utils.config import GEOM_TOL, GOLDEN_TOL
from src.utils.errors import DegenerateNormalization, InvalidP, UnknownSolver

logger = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Solution:
    payoff: Payoff
    method: str
    diagnostics: Dict[str, float] = field(default_factory=dict)


def _room(problem: BargainingProblem) -> Tuple[Payoff, np.ndarray]:
    ideal = ideal_point(problem)
    c = problem.disagreement
    d = np.array([ideal.u1 - c.u1, ideal.u2 - c.u2])
    if d[0] <= GEOM_TOL or d[1] <= GEOM_TOL:
        raise DegenerateNormalization(
            f"ideal point {tuple(ideal)} does not strictly dominate disagreement point {tuple(c)}"
        )
    return ideal, d


def ray_exit(polygon: ConvexPolygon, origin: Sequence[float], direction: Sequence[float]) -> Tuple[np.ndarray, int]:
    """Last point of the ray origin + t*direction inside the convex polygon, and the exit edge"""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    e = polygon.edge_vectors
    normals = np.column_stack([e[:, 1], -e[:, 0]])
    slack = np.sum(normals * (o - polygon.points), axis=1)
    rate = normals @ d
    outward = rate > 0
    t = np.full(len(e), np.inf)
    t[outward] = -slack[outward] / rate[outward]
    edge = int(np.argmin(t))
    return o + max(float(t[edge]), 0.0) * d, edge


def nash(problem: BargainingProblem) -> Solution:
    """Maximize the Nash product edge by edge over the rational Pareto chain"""
    chain = pareto_frontier(problem).points
    c = np.array(problem.disagreement)
    if len(chain) == 1:
        gain = chain[0] - c
        return Solution(as_payoff(chain[0]), "nash", {"product": float(gain[0] * gain[1]), "edges": 0.0})

    a = chain[:-1] - c
    d = np.diff(chain, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -(a[:, 0] * d[:, 1] + a[:, 1] * d[:, 0]) / (2.0 * d[:, 0] * d[:, 1])
    t = np.clip(np.nan_to_num(t, nan=0.0, posinf=1.0, neginf=0.0), 0.0, 1.0)
    gains = a + t[:, None] * d
    product = gains[:, 0] * gains[:, 1]
    best = product.max()
    tied = np.flatnonzero(np.isclose(product, best, rtol=1e-13, atol=1e-15))
    candidates = gains[tied] + c
    pick = np.lexsort((candidates[:, 1], candidates[:, 0]))[-1]
    return Solution(as_payoff(candidates[pick]), "nash", {"product": float(best), "edges": float(len(d))})


def kalai_smorodinsky(problem: BargainingProblem) -> Solution:
    """Intersection of the segment c -> ideal with the frontier"""
    _, d = _room(problem)
    hit, edge = ray_exit(problem.feasible, problem.disagreement, d)
    chain = pareto_frontier(problem)
    weak = 1.0 if chain.distance(hit) > 1e-9 else 0.0
    if weak:
        logger.info(f"KS segment leaves F through the weakly Pareto edge {edge}")
    return Solution(as_payoff(hit), "ks", {"weak-pareto-hit": weak})


def egalitarian(problem: BargainingProblem) -> Solution:
    hit, _ = ray_exit(problem.feasible, problem.disagreement, (1.0, 1.0))
    gain = float(hit[0] - problem.disagreement.u1)
    return Solution(as_payoff(hit), "egalitarian", {"gain": gain})


def equal_loss(problem: BargainingProblem) -> Solution:
    """Chain point with equal losses from the ideal point, by bisection on the chain"""
    ideal, _ = _room(problem)
    chain = pareto_frontier(problem).points
    gap = (ideal.u1 - chain[:, 0]) - (ideal.u2 - chain[:, 1])
    if gap[0] >= 0.0:
        return Solution(as_payoff(chain[0]), "equal-loss", {"clamped": float(gap[0] > GEOM_TOL)})
    if gap[-1] <= 0.0:
        return Solution(as_payoff(chain[-1]), "equal-loss", {"clamped": float(gap[-1] < -GEOM_TOL)})
    lo, hi = 0, len(chain) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if gap[mid] < 0.0:
            lo = mid
        else:
            hi = mid
    t = -gap[lo] / (gap[hi] - gap[lo])
    point = chain[lo] + t * (chain[hi] - chain[lo])
    return Solution(as_payoff(point), "equal-loss", {"clamped": 0.0})


def _slope(chain, target: np.ndarray, p: float, s: float) -> float:
    """Sign-carrying right derivative of the p-distance along the chain at arc length s"""
    cum = chain.cumulative_length
    k = int(np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(chain) - 2))
    d = chain.points[k + 1] - chain.points[k]
    r = target - chain.point_at(s)
    return float(-np.sum(np.sign(r) * np.abs(r) ** (p - 1.0) * d))


def _polish(chain, target: np.ndarray, p: float, s: float) -> float:
    """Refine a flat minimum near s by bisecting the sign of the derivative"""
    if len(chain) < 2:
        return s
    width = 1e-6 * max(chain.length, 1.0)
    lo, hi = max(s - width, 0.0), min(s + width, chain.length)
    if _slope(chain, target, p, lo) >= 0.0 or _slope(chain, target, p, hi) <= 0.0:
        return s
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _slope(chain, target, p, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def yu_lp(problem: BargainingProblem, p: float = 2.0) -> Solution:
    """Golden-section search along the chain for the point nearest the ideal in the p-norm.

    p = inf is the equal-loss point.
    """
    p = float(p)
    if math.isnan(p) or p < 1.0:
        raise InvalidP(f"Yu solution needs p >= 1 or p = inf, got {p}")
    ideal, _ = _room(problem)
    if math.isinf(p):
        # the larger loss is smallest where the losses are equal
        point = equal_loss(problem).payoff
        distance = max(ideal.u1 - point.u1, ideal.u2 - point.u2)
        return Solution(point, "yu-lp", {"p": p, "distance": float(distance), "iterations": 0.0})
    target = np.array(ideal)
    chain = pareto_frontier(problem)

    def distance(s: float) -> float:
        return float(np.linalg.norm(target - chain.point_at(s), ord=p))

    lo, hi = 0.0, chain.length
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = distance(x1), distance(x2)
    iterations = 0
    while hi - lo > GOLDEN_TOL:
        iterations += 1
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = distance(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = distance(x2)
    mid = _polish(chain, target, p, 0.5 * (lo + hi))
    candidates = [mid, 0.0, chain.length]
    best = min(candidates, key=distance)
    return Solution(
        as_payoff(chain.point_at(best)),
        "yu-lp",
        {"p": p, "distance": distance(best), "iterations": float(iterations)},
    )


CLOSED_FORM_SOLVERS: Dict[str, Callable[[BargainingProblem], Solution]] = {
    "nash": nash,
    "ks": kalai_smorodinsky,
    "egalitarian": egalitarian,
    "equal-loss": equal_loss,
}


def closed_form_solver(solver_id: str) -> Callable[[BargainingProblem], Solution]:
    if solver_id in CLOSED_FORM_SOLVERS:
        return CLOSED_FORM_SOLVERS[solver_id]
    if solver_id.startswith("yu-l"):
        p = parse_yu_order(solver_id)
        return lambda problem: yu_lp(problem, p)
    raise UnknownSolver(f"unknown solver {solver_id!r}")


def parse_yu_order(solver_id: str) -> float:
    """'yu-l2' -> 2.0, 'yu-linf' -> inf; bare 'yu-lp' means p = 2"""
    suffix = solver_id[len("yu-l"):]
    if suffix in ("p", ""):
        return 2.0
    if suffix in ("inf", "oo"):
        return math.inf
    try:
        return float(suffix)
    except ValueError:
        raise UnknownSolver(f"cannot read an order p from solver id {solver_id!r}") from None
