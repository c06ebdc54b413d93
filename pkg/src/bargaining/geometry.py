"""Bargaining problems as convex polygons.

Boundary classification, affine normalization and the four-quadrant
symmetrized domain used by the harmonic and random-walk solvers.
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Callable, Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from src.utils.config import GEOM_TOL, DEFAULT_SEGMENTS
from src.utils.errors import (
    DegenerateNormalization,
    DegenerateSet,
    DisagreementOutside,
    InvalidConfig,
    NonConvexInput,
    NotNormalized,
    UnknownPreset,
)

logger = logging.getLogger(__name__)


class Payoff(NamedTuple):
    u1: float
    u2: float


def as_payoff(p: Sequence[float]) -> Payoff:
    return Payoff(float(p[0]), float(p[1]))


def _frozen(points) -> np.ndarray:
    arr = np.array(points, dtype=np.float64).reshape(-1, 2)
    arr.setflags(write=False)
    return arr


class ConvexPolygon:
    """Counterclockwise vertex ring, canonical start at the lexicographically smallest vertex"""

    __slots__ = ("_points", "__dict__")

    def __init__(self, points):
        self._points = _frozen(points)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def vertices(self) -> Tuple[Payoff, ...]:
        return tuple(Payoff(float(x), float(y)) for x, y in self._points)

    def __len__(self) -> int:
        return len(self._points)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConvexPolygon) and np.array_equal(self._points, other._points)

    def __hash__(self) -> int:
        return hash(self._points.tobytes())

    def __repr__(self) -> str:
        return f"ConvexPolygon({len(self)} vertices)"

    @cached_property
    def area(self) -> float:
        x, y = self._points[:, 0], self._points[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @cached_property
    def edge_vectors(self) -> np.ndarray:
        return np.roll(self._points, -1, axis=0) - self._points

    def signed_distances(self, p: Sequence[float]) -> np.ndarray:
        """Signed distance of p to every edge line, positive inside"""
        e = self.edge_vectors
        rel = np.asarray(p, dtype=np.float64) - self._points
        cross = e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0]
        return cross / np.hypot(e[:, 0], e[:, 1])

    def contains(self, p: Sequence[float], tol: float = GEOM_TOL) -> bool:
        return bool(np.all(self.signed_distances(p) >= -tol))

    def boundary_distance(self, p: Sequence[float]) -> float:
        """Euclidean distance from p to the polygon boundary"""
        return float(np.min(_segment_distances(self._points, np.roll(self._points, -1, axis=0), p)))

    @cached_property
    def frontier_points(self) -> np.ndarray:
        """Strong Pareto chain of the whole polygon, u1 decreasing"""
        pts = self._points
        n = len(pts)
        u1, u2 = pts[:, 0], pts[:, 1]
        right = np.flatnonzero(u1 >= u1.max() - GEOM_TOL)
        start = int(right[np.argmax(u2[right])])
        top = np.flatnonzero(u2 >= u2.max() - GEOM_TOL)
        end = int(top[np.argmax(u1[top])])
        count = (end - start) % n + 1
        idx = (start + np.arange(count)) % n
        chain = pts[idx].copy()
        chain.setflags(write=False)
        return chain


def _segment_distances(a: np.ndarray, b: np.ndarray, p: Sequence[float]) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    d = b - a
    len2 = np.sum(d * d, axis=1)
    t = np.where(len2 > 0, np.sum((p - a) * d, axis=1) / np.where(len2 > 0, len2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * d
    return np.hypot(proj[:, 0] - p[0], proj[:, 1] - p[1])


class ParetoChain:
    """Strong Pareto boundary, ordered with u1 strictly decreasing and u2 strictly increasing"""

    __slots__ = ("_points", "__dict__")

    def __init__(self, points):
        self._points = _frozen(points)

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def payoffs(self) -> Tuple[Payoff, ...]:
        return tuple(Payoff(float(x), float(y)) for x, y in self._points)

    def __len__(self) -> int:
        return len(self._points)

    def __repr__(self) -> str:
        return f"ParetoChain({len(self)} points)"

    @cached_property
    def cumulative_length(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self._points, axis=0).T) if len(self) > 1 else np.zeros(0)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.cumulative_length[-1])

    def point_at(self, s: float) -> np.ndarray:
        """Point at arc length s from the first chain point"""
        if len(self) == 1:
            return self._points[0].copy()
        cum = self.cumulative_length
        s = min(max(s, 0.0), cum[-1])
        k = int(np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(self) - 2))
        seg = cum[k + 1] - cum[k]
        t = 0.0 if seg <= 0 else (s - cum[k]) / seg
        return self._points[k] + t * (self._points[k + 1] - self._points[k])

    def distance(self, p: Sequence[float]) -> float:
        if len(self) == 1:
            return float(np.hypot(*(np.asarray(p, dtype=np.float64) - self._points[0])))
        return float(np.min(_segment_distances(self._points[:-1], self._points[1:], p)))

    def project(self, p: Sequence[float]) -> np.ndarray:
        """Closest chain point to p"""
        if len(self) == 1:
            return self._points[0].copy()
        a, b = self._points[:-1], self._points[1:]
        d = b - a
        p = np.asarray(p, dtype=np.float64)
        len2 = np.sum(d * d, axis=1)
        t = np.clip(np.sum((p - a) * d, axis=1) / len2, 0.0, 1.0)
        proj = a + t[:, None] * d
        k = int(np.argmin(np.hypot(proj[:, 0] - p[0], proj[:, 1] - p[1])))
        return proj[k]


@dataclass(frozen=True)
class AffineMap:
    """T(u) = (a1 u1 + b1, a2 u2 + b2) with positive scales"""

    a1: float
    a2: float
    b1: float = 0.0
    b2: float = 0.0

    def __post_init__(self):
        values = (self.a1, self.a2, self.b1, self.b2)
        if not all(math.isfinite(v) for v in values):
            raise InvalidConfig(f"affine map coefficients must be finite, got {values}")
        if self.a1 <= 0 or self.a2 <= 0:
            raise InvalidConfig(f"affine map scales must be positive, got a=({self.a1}, {self.a2})")

    @property
    def scale(self) -> np.ndarray:
        return np.array([self.a1, self.a2])

    @property
    def offset(self) -> np.ndarray:
        return np.array([self.b1, self.b2])


IDENTITY = AffineMap(1.0, 1.0, 0.0, 0.0)


def apply_map(transform: AffineMap, p: Sequence[float]) -> Payoff:
    return Payoff(transform.a1 * float(p[0]) + transform.b1, transform.a2 * float(p[1]) + transform.b2)


def apply_map_array(transform: AffineMap, points: np.ndarray) -> np.ndarray:
    return np.asarray(points, dtype=np.float64) * transform.scale + transform.offset


def invert_map(transform: AffineMap) -> AffineMap:
    return AffineMap(
        1.0 / transform.a1,
        1.0 / transform.a2,
        -transform.b1 / transform.a1,
        -transform.b2 / transform.a2,
    )


@dataclass(frozen=True)
class BargainingProblem:
    feasible: ConvexPolygon
    disagreement: Payoff

    def with_disagreement(self, c: Sequence[float]) -> "BargainingProblem":
        c = as_payoff(c)
        if not self.feasible.contains(c):
            raise DisagreementOutside(f"disagreement point {tuple(c)} lies outside the feasible polygon")
        return BargainingProblem(self.feasible, c)


# -- hull construction -------------------------------------------------------

def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: Iterable[Sequence[float]]) -> np.ndarray:
    """Monotone-chain hull, counterclockwise from the lexicographically smallest point.

    Duplicates and exactly collinear points are dropped.
    """
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) < 3:
        return np.array(pts, dtype=np.float64).reshape(-1, 2)
    lower: List[Tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: List[Tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], dtype=np.float64)


def comprehensive_hull(points: Iterable[Sequence[float]]) -> np.ndarray:
    """Hull of the points, their projections on both axes and the origin"""
    pts = [(float(x), float(y)) for x, y in points]
    extended = pts + [(x, 0.0) for x, _ in pts] + [(0.0, y) for _, y in pts] + [(0.0, 0.0)]
    return convex_hull(extended)


def make_problem(vertices: Iterable[Sequence[float]], disagreement: Sequence[float]) -> BargainingProblem:
    """Validate input points and build an immutable, canonically ordered problem"""
    raw = np.array([tuple(v) for v in vertices], dtype=np.float64).reshape(-1, 2)
    c = np.asarray(disagreement, dtype=np.float64).reshape(-1)
    if c.shape != (2,) or not np.all(np.isfinite(c)):
        raise DisagreementOutside(f"disagreement point must be two finite numbers, got {disagreement!r}")
    if len(raw) and not np.all(np.isfinite(raw)):
        raise DegenerateSet("vertex coordinates must be finite")

    hull = convex_hull(raw)
    if len(hull) < 3:
        raise DegenerateSet(f"convex hull has {len(hull)} vertices; a feasible set needs positive area")
    polygon = ConvexPolygon(hull)
    if polygon.area <= GEOM_TOL:
        raise DegenerateSet(f"feasible polygon has zero area ({polygon.area:.3e})")

    on_hull = set(map(tuple, hull.tolist()))
    dropped = [p for p in map(tuple, raw.tolist()) if p not in on_hull]
    if dropped:
        a, b = hull, np.roll(hull, -1, axis=0)
        for p in dict.fromkeys(dropped):
            if float(np.min(_segment_distances(a, b, p))) > GEOM_TOL:
                raise NonConvexInput(
                    f"input point {p} lies strictly inside the convex hull; the vertex list is not convex"
                )
        logger.debug(f"make_problem dropped {len(dropped)} duplicate or collinear points")

    c_payoff = as_payoff(c)
    if not polygon.contains(c_payoff):
        raise DisagreementOutside(f"disagreement point {tuple(c_payoff)} lies outside the feasible polygon")
    return BargainingProblem(polygon, c_payoff)


def contains(problem: BargainingProblem, p: Sequence[float]) -> bool:
    return problem.feasible.contains(p)


# -- frontier and ideal point ------------------------------------------------

def _point_at_level(a: np.ndarray, b: np.ndarray, axis: int, value: float) -> np.ndarray:
    t = (value - a[axis]) / (b[axis] - a[axis])
    p = a + t * (b - a)
    p[axis] = value
    return p


def _clip_chain(chain: np.ndarray, c: Sequence[float]) -> np.ndarray:
    """Part of a frontier chain inside the quadrant {u >= c}"""
    k = len(chain)
    if k == 1:
        return chain.copy()
    u1, u2 = chain[:, 0], chain[:, 1]
    hi = int(np.searchsorted(-u1, -c[0], side="right"))
    lo = int(np.searchsorted(u2, c[1], side="left"))
    if lo == 0:
        start = chain[0]
    elif lo >= k:
        start = chain[-1]
    else:
        start = _point_at_level(chain[lo - 1], chain[lo], 1, c[1])
    if hi >= k:
        end = chain[-1]
    elif hi == 0:
        end = chain[0]
    else:
        end = _point_at_level(chain[hi - 1], chain[hi], 0, c[0])
    middle = chain[lo:hi] if lo < hi else np.empty((0, 2))
    pts = np.vstack([start, middle, end])
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(np.abs(np.diff(pts, axis=0)) > GEOM_TOL, axis=1)
    return pts[keep]


def pareto_frontier(problem: BargainingProblem) -> ParetoChain:
    """Strong Pareto chain of the individually rational part of F"""
    return ParetoChain(_clip_chain(problem.feasible.frontier_points, problem.disagreement))


def ideal_point(problem: BargainingProblem) -> Payoff:
    chain = pareto_frontier(problem).points
    return Payoff(float(chain[0, 0]), float(chain[-1, 1]))


def rational_part(problem: BargainingProblem) -> np.ndarray:
    """F intersected with {u1 >= c1, u2 >= c2}, counterclockwise"""
    pts = [tuple(p) for p in problem.feasible.points.tolist()]
    c1, c2 = problem.disagreement
    for axis, level in ((0, c1), (1, c2)):
        clipped: List[Tuple[float, float]] = []
        n = len(pts)
        for i in range(n):
            cur, nxt = pts[i], pts[(i + 1) % n]
            cur_in, nxt_in = cur[axis] >= level, nxt[axis] >= level
            if cur_in:
                clipped.append(cur)
            if cur_in != nxt_in:
                crossing = _point_at_level(np.array(cur), np.array(nxt), axis, level)
                clipped.append((float(crossing[0]), float(crossing[1])))
        pts = clipped
        if not pts:
            break
    out = np.array(pts, dtype=np.float64).reshape(-1, 2)
    if len(out) > 1:
        keep = np.any(np.abs(out - np.roll(out, 1, axis=0)) > GEOM_TOL, axis=1)
        out = out[keep]
    return out


def transform_problem(problem: BargainingProblem, transform: AffineMap) -> BargainingProblem:
    """Image of the problem under T; positive scales keep the canonical order"""
    points = apply_map_array(transform, problem.feasible.points)
    return BargainingProblem(ConvexPolygon(points), apply_map(transform, problem.disagreement))


def normalize(problem: BargainingProblem) -> Tuple[BargainingProblem, AffineMap]:
    """Return the problem with c = (0,0), ideal = (1,1) and T with T(normalized) = original"""
    ideal = ideal_point(problem)
    c = problem.disagreement
    a1, a2 = ideal.u1 - c.u1, ideal.u2 - c.u2
    if a1 <= GEOM_TOL or a2 <= GEOM_TOL:
        raise DegenerateNormalization(
            f"ideal point {tuple(ideal)} does not strictly dominate disagreement point {tuple(c)}"
        )
    transform = AffineMap(a1, a2, c.u1, c.u2)
    normalized = transform_problem(problem, invert_map(transform))
    normalized = BargainingProblem(normalized.feasible, Payoff(0.0, 0.0))
    return normalized, transform


def payoff_hull_points(problem: BargainingProblem) -> np.ndarray:
    """Pareto chain plus the projections of its endpoints onto the disagreement axes"""
    chain = pareto_frontier(problem).points
    c1, c2 = problem.disagreement
    extra = np.array([[chain[0, 0], c2], [c1, chain[-1, 1]]])
    return np.vstack([chain, extra])


def hull_contains(points: np.ndarray, p: Sequence[float], tol: float) -> bool:
    """Membership in the convex hull of points, tolerant of degenerate (segment) hulls"""
    hull = convex_hull(points)
    p = np.asarray(p, dtype=np.float64)
    if len(hull) == 1:
        return float(np.hypot(*(p - hull[0]))) <= tol
    if len(hull) == 2:
        return float(_segment_distances(hull[:1], hull[1:], p)[0]) <= tol
    polygon = ConvexPolygon(hull)
    return polygon.contains(p) or polygon.boundary_distance(p) <= tol


# -- solver domains ----------------------------------------------------------

class BoundaryDomain:
    """Closed polygon with per-edge absorbing flags.

    Edge i runs from vertex i to vertex i+1. When folded, a boundary point
    (x, y) pays (|x|, |y|).
    """

    folded = False

    def __init__(self, points, absorbing):
        self.points = _frozen(points)
        flags = np.array(absorbing, dtype=np.bool_)
        flags.setflags(write=False)
        if flags.shape != (len(self.points),):
            raise InvalidConfig("one absorbing flag per edge is required")
        self.absorbing = flags

    def __repr__(self) -> str:
        kind = type(self).__name__
        return f"{kind}({len(self.points)} vertices, {int(self.absorbing.sum())} absorbing edges)"

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def contains(self, p: Sequence[float]) -> bool:
        """Even-odd membership, boundary within GEOM_TOL counts as inside"""
        x, y = float(p[0]), float(p[1])
        if self.boundary_distance((x, y)) <= GEOM_TOL:
            return True
        a = self.points
        b = np.roll(a, -1, axis=0)
        straddle = (a[:, 1] > y) != (b[:, 1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
        return bool(np.count_nonzero(straddle & (x < x_cross)) % 2)

    def boundary_distance(self, p: Sequence[float], absorbing_only: bool = False) -> float:
        a = self.points
        b = np.roll(a, -1, axis=0)
        if absorbing_only:
            if not self.absorbing.any():
                return math.inf
            a, b = a[self.absorbing], b[self.absorbing]
        return float(np.min(_segment_distances(a, b, p)))

    def payoff(self, p: Sequence[float]) -> Payoff:
        if self.folded:
            return Payoff(abs(float(p[0])), abs(float(p[1])))
        return as_payoff(p)


class SymmetricDomain(BoundaryDomain):
    """Four-quadrant reflection {(x, y): (|x|, |y|) in F}; the whole outer boundary absorbs"""

    folded = True

    def __init__(self, points):
        super().__init__(points, np.ones(len(points), dtype=np.bool_))


def _dedupe_ring(points: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
    out: List[Tuple[float, float]] = []
    for p in points:
        p = (p[0] + 0.0, p[1] + 0.0)
        if out and abs(out[-1][0] - p[0]) <= GEOM_TOL and abs(out[-1][1] - p[1]) <= GEOM_TOL:
            continue
        out.append(p)
    while len(out) > 1 and abs(out[0][0] - out[-1][0]) <= GEOM_TOL and abs(out[0][1] - out[-1][1]) <= GEOM_TOL:
        out.pop()
    return out


def _outer_chain(problem: BargainingProblem) -> List[Tuple[float, float]]:
    """Boundary of the rational part from its x-axis corner to its y-axis corner"""
    ring = rational_part(problem)
    if len(ring) < 3:
        raise DegenerateSet("individually rational part of F has empty interior")
    at_origin = np.flatnonzero(np.all(np.abs(ring) <= GEOM_TOL, axis=1))
    if at_origin.size == 0:
        raise DegenerateSet("disagreement point is not a corner of the individually rational part")
    start = int(at_origin[0])
    outer = [tuple(map(float, ring[(start + k) % len(ring)])) for k in range(1, len(ring))]
    first = 0
    while first + 1 < len(outer) and abs(outer[first + 1][1]) <= GEOM_TOL:
        first += 1
    last = len(outer) - 1
    while last - 1 > first and abs(outer[last - 1][0]) <= GEOM_TOL:
        last -= 1
    if abs(outer[first][1]) > GEOM_TOL or outer[first][0] <= GEOM_TOL:
        raise DegenerateSet("rational part does not extend along the positive u1 axis from c")
    if abs(outer[last][0]) > GEOM_TOL or outer[last][1] <= GEOM_TOL:
        raise DegenerateSet("rational part does not extend along the positive u2 axis from c")
    return outer[first:last + 1]


def symmetrize(problem: BargainingProblem) -> SymmetricDomain:
    """Reflect the normalized rational part into all four quadrants"""
    c = problem.disagreement
    if abs(c.u1) > GEOM_TOL or abs(c.u2) > GEOM_TOL:
        raise NotNormalized(f"symmetrize requires c = (0, 0), got {tuple(c)}")
    chain = _outer_chain(problem)
    rev = chain[::-1]
    ring = (
        chain
        + [(-x, y) for x, y in rev][1:]
        + [(-x, -y) for x, y in chain][1:]
        + [(x, -y) for x, y in rev][1:]
    )
    return SymmetricDomain(np.array(_dedupe_ring(ring)))


def mixed_domain(problem: BargainingProblem, weak_pareto_absorbs: bool = False) -> BoundaryDomain:
    """Unreflected rational part; strong Pareto edges absorb, the rest reflects.

    Axis-parallel edges on the far sides (u1 = ideal1 or u2 = ideal2) absorb
    only when weak_pareto_absorbs is set.
    """
    ring = rational_part(problem)
    if len(ring) < 3:
        raise DegenerateSet("individually rational part of F has empty interior")
    ideal = ideal_point(problem)
    edges = np.roll(ring, -1, axis=0) - ring
    strong = (edges[:, 0] < -GEOM_TOL) & (edges[:, 1] > GEOM_TOL)
    far_vertical = (np.abs(edges[:, 0]) <= GEOM_TOL) & (edges[:, 1] > GEOM_TOL) & (
        np.abs(ring[:, 0] - ideal.u1) <= GEOM_TOL
    )
    far_horizontal = (np.abs(edges[:, 1]) <= GEOM_TOL) & (edges[:, 0] < -GEOM_TOL) & (
        np.abs(ring[:, 1] - ideal.u2) <= GEOM_TOL
    )
    absorbing = strong | (weak_pareto_absorbs & (far_vertical | far_horizontal))
    if not absorbing.any():
        raise DegenerateSet("mixed boundary domain has no absorbing edge; enable weak-pareto-absorbs")
    return BoundaryDomain(ring, absorbing)


def solver_domain(problem: BargainingProblem, mode: str, weak_pareto_absorbs: bool = False) -> BoundaryDomain:
    if mode == "symmetrized":
        return symmetrize(problem)
    if mode == "mixed-bc":
        return mixed_domain(problem, weak_pareto_absorbs)
    raise InvalidConfig(f"unknown boundary mode {mode!r}; expected 'symmetrized' or 'mixed-bc'")


# -- presets -----------------------------------------------------------------

def _parabola(n: int) -> List[Payoff]:
    if n < 2:
        raise InvalidConfig(f"parabola preset needs n >= 2 segments, got {n}")
    samples = [Payoff(k / n, 1.0 - (k / n) ** 2) for k in range(n + 1)]
    return [Payoff(0.0, 0.0), Payoff(1.0, 0.0)] + samples


PRESETS: Dict[str, Callable[[int], List[Payoff]]] = {
    "triangle": lambda n: [Payoff(0.0, 0.0), Payoff(1.0, 0.0), Payoff(0.0, 1.0)],
    "trapezoid": lambda n: [Payoff(0.0, 0.0), Payoff(1.0, 0.0), Payoff(1.0, 0.5), Payoff(0.0, 1.0)],
    "parabola": _parabola,
    "fig3-left": lambda n: [Payoff(0.0, 0.0), Payoff(1.0, 0.0), Payoff(0.7, 0.7), Payoff(0.0, 1.0)],
    "fig3-right": lambda n: [
        Payoff(0.0, 0.0), Payoff(1.0, 0.0), Payoff(0.8, 0.65), Payoff(0.7, 0.7), Payoff(0.0, 1.0),
    ],
}


def curve_preset(name: str, n: int = DEFAULT_SEGMENTS) -> List[Payoff]:
    builder = PRESETS.get(name)
    if builder is None:
        raise UnknownPreset(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return builder(n)


def preset_problem(name: str, n: int = DEFAULT_SEGMENTS, disagreement: Sequence[float] = (0.0, 0.0)) -> BargainingProblem:
    return make_problem(curve_preset(name, n), disagreement)
