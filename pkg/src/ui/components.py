"""Terminal rendering of results and the static SVG region figure."""
from typing import Any, Dict, List, Sequence

import numpy as np
import pandas as pd

from src.analysis.perturbation import PerturbationReport
from src.analysis.regions import GAIN, RegionMap, region_boundary_height
from src.bargaining.geometry import BargainingProblem, Payoff
from src.bargaining.solutions import Solution
from src.utils.state import RunConfig

HEADER_KEYS = {
    "solve": ["preset", "file", "n", "methods", "grid_h", "mode"],
    "walk": ["preset", "file", "n", "step", "walkers", "seed", "mode", "weak_pareto_absorbs"],
    "regions": ["preset", "file", "n", "solver", "grid_h"],
    "perturb": ["preset", "file", "n", "solver", "grid_h"],
    "iterate": ["preset", "file", "n", "grid_h", "mode"],
    "check": ["seed", "grid_h", "step", "walkers"],
}

PLAYER_COLOURS = ("#4A90E2", "#E2574A")


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def render_header(config: RunConfig, extra: Dict[str, Any] = None) -> str:
    """One comment line echoing the settings used"""
    items = {key: config.get(key) for key in HEADER_KEYS.get(config["subcommand"], [])}
    items.update(extra or {})
    shown = " ".join(f"{k}={_format_value(v)}" for k, v in items.items() if v is not None)
    return f"# fairshare {config['subcommand']} {shown}".rstrip()


def render_table(df: pd.DataFrame, float_digits: int = 6) -> str:
    """Left-aligned fixed-width table"""
    cells = [[str(c) for c in df.columns]]
    for row in df.itertuples(index=False):
        cells.append([
            f"{v:.{float_digits}f}" if isinstance(v, (float, np.floating)) else str(v)
            for v in row
        ])
    widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_walk_summary(solution: Solution) -> str:
    d = solution.diagnostics
    return "\n".join([
        f"estimate      ({solution.payoff.u1:.6f}, {solution.payoff.u2:.6f})",
        f"stderr        ({d['stderr1']:.6f}, {d['stderr2']:.6f})",
        f"walkers       {int(d['walkers'])}",
        f"mean moves    {d['mean-moves']:.2f}",
    ])


def render_check_table(rows: List[Dict[str, Any]], passed: bool) -> str:
    lines = []
    for row in rows:
        mark = "✅" if row["passed"] else "❌"
        lines.append(f"{mark} [{row['suite']}] {row['check']}: expected {row['expected']}, got {row['observed']}")
        if row.get("detail"):
            lines.append(f"     {row['detail']}")
    ok = sum(r["passed"] for r in rows)
    lines.append(f"{'🎯 PASS' if passed else '⚠️ FAIL'}: {ok}/{len(rows)} checks as expected")
    return "\n".join(lines)


def render_perturbation_report(report: PerturbationReport) -> str:
    lines = [render_table(report.frame(), float_digits=9)]
    lines.append(f"base          ({report.base.u1:.9f}, {report.base.u2:.9f})")
    lines.append(f"first order   ({report.first_order[0]:.6f}, {report.first_order[1]:.6f})")
    lines.append(f"second order  ({report.second_order[0]:.6f}, {report.second_order[1]:.6f})")
    lines.append(f"fit residual  ({report.fit_residual[0]:.3g}, {report.fit_residual[1]:.3g})")
    lines.append(f"verdict       {report.classification}")
    return "\n".join(lines)


def render_region_summary(region_map: RegionMap) -> str:
    lines = [f"points        {len(region_map.points)}", f"neutral band  {region_map.band:.3g}"]
    for player in (1, 2):
        counts = region_map.counts(player)
        shown = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
        lines.append(f"player {player}      {shown}")
    height = region_boundary_height(region_map, 1)
    if not np.isnan(height):
        lines.append(f"region 1 top  c2 = {height:.4f}")
    return "\n".join(lines)


def render_iterate(solution: Solution, trace: Sequence[Payoff]) -> str:
    lines = [f"{k:4d}  ({p.u1:.6f}, {p.u2:.6f})" for k, p in enumerate(trace)]
    lines.append(f"limit         ({solution.payoff.u1:.6f}, {solution.payoff.u2:.6f})")
    lines.append(f"iterations    {int(solution.diagnostics['iterations'])}")
    lines.append(f"contraction   {solution.diagnostics['contraction']:.4f}")
    return "\n".join(lines)


# -- SVG -------------------------------------------------------------------------

def _svg_point(p, lo, scale, size) -> str:
    x = (p[0] - lo[0]) * scale + 20.0
    y = size - 20.0 - (p[1] - lo[1]) * scale
    return f"{x:.2f},{y:.2f}"


def region_svg(region_map: RegionMap, problem: BargainingProblem, size: int = 480) -> str:
    """Gain regions of both players shaded over the outline of F"""
    points = problem.feasible.points
    lo = points.min(axis=0)
    span = float(max(np.ptp(points, axis=0).max(), 1e-12))
    scale = (size - 40.0) / span
    half = 0.5 * region_map.grid_step
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for player in (0, 1):
        cells = region_map.points[region_map.labels[:, player] == GAIN]
        for c in cells:
            corners = [(c[0] - half, c[1] - half), (c[0] + half, c[1] - half),
                       (c[0] + half, c[1] + half), (c[0] - half, c[1] + half)]
            shape = " ".join(_svg_point(q, lo, scale, size) for q in corners)
            parts.append(f'<polygon points="{shape}" fill="{PLAYER_COLOURS[player]}" fill-opacity="0.35" stroke="none"/>')
    outline = " ".join(_svg_point(q, lo, scale, size) for q in np.vstack([points, points[:1]]))
    parts.append(f'<polyline points="{outline}" fill="none" stroke="black" stroke-width="1.5"/>')
    parts.append(
        f'<text x="20" y="14" font-family="sans-serif" font-size="12">'
        f'{region_map.solver}: player 1 gains (blue), player 2 gains (red)</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
