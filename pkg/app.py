import argparse
import logging
import os
import sys
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

from src.utils.config import (
    CLOSED_FORM_SEGMENTS,
    DEFAULT_EPS_LADDER,
    DEFAULT_MAX_MOVES,
    DEFAULT_N_ANGLES,
    DEFAULT_REGION_STEP,
    DEFAULT_SEGMENTS,
    DEFAULT_STEP,
    DEFAULT_WALKERS,
    ITERATE_TOL,
    env_grid_h,
    env_log_level,
    env_seed,
    env_weak_pareto_absorbs,
    env_workers,
)

# Configure logging; stdout carries only the artifacts
logging.basicConfig(
    level=getattr(logging, env_log_level(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)

from src.analysis.perturbation import isc_residual
from src.analysis.regions import incentive_regions
from src.analysis.workflow import run_checks
from src.bargaining.geometry import BargainingProblem, PRESETS, preset_problem
from src.bargaining.solutions import Solution, closed_form_solver
from src.solvers.harmonic import iterate_s_delta, s_delta
from src.solvers.montecarlo import STEP_LAWS, WalkConfig, simulate, summarize_batch, walker_frame
from src.ui.components import (
    region_svg,
    render_check_table,
    render_header,
    render_iterate,
    render_perturbation_report,
    render_region_summary,
    render_table,
    render_walk_summary,
)
from src.utils.data_processor import DataProcessor
from src.utils.errors import InputError, InvalidConfig, SolverError
from src.utils.state import SOLVER_IDS, SUITES, create_initial_state, create_run_config

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_SOLVER = 3

ALL_METHODS = [m for m in SOLVER_IDS if m != "s-delta-mc"]


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _methods(text: str) -> List[str]:
    names = [m.strip() for m in text.split(",") if m.strip()]
    return ALL_METHODS if names == ["all"] else names


def _add_problem_args(parser: argparse.ArgumentParser, default_n: Optional[int] = DEFAULT_SEGMENTS) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", choices=sorted(PRESETS), help="built-in feasible set")
    source.add_argument("--file", help="problem file (JSON with vertices and disagreement)")
    parser.add_argument("--n", type=int, default=default_n, help=f"segments for curved presets (default {default_n or 'by solver'})")
    parser.add_argument("--disagreement", type=_floats, default=None,
                        help="c1,c2 for presets (default 0,0)")


def _add_grid_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid-h", type=float, default=None,
                        help="grid spacing of the harmonic solver (default FAIRSHARE_GRID_H or 1/256)")
    parser.add_argument("--mode", choices=["symmetrized", "mixed-bc"], default="symmetrized",
                        help="boundary treatment of the rational part (default symmetrized)")
    parser.add_argument("--weak-pareto-absorbs", action="store_true", default=None,
                        help="weakly Pareto edges absorb in mixed-bc mode (default FAIRSHARE_WEAK_PARETO_ABSORBS)")


def _add_walk_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--step", type=float, default=DEFAULT_STEP, help=f"walk step length (default {DEFAULT_STEP})")
    parser.add_argument("--walkers", type=int, default=DEFAULT_WALKERS, help=f"number of walkers (default {DEFAULT_WALKERS})")
    parser.add_argument("--seed", type=int, default=None, help="walk seed (default FAIRSHARE_SEED)")
    parser.add_argument("--workers", type=int, default=None, help="threads (default FAIRSHARE_WORKERS or 1)")
    parser.add_argument("--max-moves", type=int, default=DEFAULT_MAX_MOVES, help=f"move cap per walker (default {DEFAULT_MAX_MOVES})")
    parser.add_argument("--law", choices=sorted(STEP_LAWS), default="uniform-angle", help="step distribution")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="directory for CSV/SVG artifacts")
    common.add_argument("--deterministic", action="store_true", help="single worker")
    parser = argparse.ArgumentParser(prog="fairshare", description="Two-player bargaining solutions and S_Delta")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", parents=[common], help="solve a problem with one or more methods")
    _add_problem_args(solve)
    solve.add_argument("--methods", type=_methods, default=["nash", "ks", "s-delta"],
                       help=f"comma list from {', '.join(SOLVER_IDS)}, yu-l<p>, or 'all'")
    _add_grid_args(solve)
    _add_walk_args(solve)

    walk = commands.add_parser("walk", parents=[common], help="random-walk estimate of S_Delta")
    _add_problem_args(walk)
    _add_walk_args(walk)
    walk.add_argument("--mode", choices=["symmetrized", "mixed-bc"], default="symmetrized")
    walk.add_argument("--weak-pareto-absorbs", action="store_true", default=None)

    regions = commands.add_parser("regions", parents=[common], help="incentive regions of a solver's payoff map")
    _add_problem_args(regions, default_n=None)
    regions.add_argument("--solver", default="nash", help="nash, ks, egalitarian, equal-loss, yu-l<p> or s-delta")
    regions.add_argument("--grid-step", type=float, default=DEFAULT_REGION_STEP)
    regions.add_argument("--fd-arm", type=float, default=None, help="default: smallest arm the payoff map resolves")
    regions.add_argument("--grid-h", type=float, default=None)

    perturb = commands.add_parser("perturb", parents=[common], help="expected payoff under small random shifts of c")
    _add_problem_args(perturb)
    perturb.add_argument("--solver", default="nash")
    perturb.add_argument("--eps", type=_floats, default=list(DEFAULT_EPS_LADDER), help="strictly decreasing ladder")
    perturb.add_argument("--n-angles", type=int, default=DEFAULT_N_ANGLES)
    perturb.add_argument("--grid-h", type=float, default=None)

    iterate = commands.add_parser("iterate", parents=[common], help="iterate S_Delta from the disagreement point")
    _add_problem_args(iterate)
    iterate.add_argument("--tol", type=float, default=ITERATE_TOL)
    _add_grid_args(iterate)

    check = commands.add_parser("check", parents=[common], help="run a check suite; exit 1 on unexpected outcomes")
    check.add_argument("suite", choices=sorted(SUITES) + ["all"])
    check.add_argument("--count", type=int, default=100, help="random problems in the domination sweep")
    check.add_argument("--seed", type=int, default=None)
    check.add_argument("--grid-h", type=float, default=1.0 / 64, help="grid spacing of the domination sweep")
    check.add_argument("--step", type=float, default=DEFAULT_STEP)
    check.add_argument("--walkers", type=int, default=DEFAULT_WALKERS)
    check.add_argument("--workers", type=int, default=None)
    return parser


def load_problem(args: argparse.Namespace) -> BargainingProblem:
    if args.file:
        if args.disagreement is not None:
            raise InvalidConfig("--disagreement applies to presets; put it in the problem file instead")
        return DataProcessor.load_problem_file(args.file)
    c = args.disagreement or [0.0, 0.0]
    if len(c) != 2:
        raise InvalidConfig(f"--disagreement needs two numbers, got {c}")
    return preset_problem(args.preset, args.n, c)


def _require_seed(seed: Optional[int]) -> int:
    seed = seed if seed is not None else env_seed()
    if seed is None:
        raise InvalidConfig("Monte Carlo runs need --seed or FAIRSHARE_SEED")
    return seed


def _workers(args: argparse.Namespace) -> int:
    if args.deterministic:
        return 1
    return args.workers if args.workers is not None else env_workers()


def _weak(args: argparse.Namespace) -> bool:
    return env_weak_pareto_absorbs() if args.weak_pareto_absorbs is None else True


def _walk_config(args: argparse.Namespace, seed: int) -> WalkConfig:
    return WalkConfig(
        step=args.step,
        walkers=args.walkers,
        seed=seed,
        max_moves=args.max_moves,
        law=args.law,
        mode=args.mode,
        weak_pareto_absorbs=_weak(args),
        workers=_workers(args),
    )


def _artifact(args: argparse.Namespace, name: str) -> Optional[str]:
    return os.path.join(args.out, name) if args.out else None


def cmd_solve(args: argparse.Namespace) -> int:
    problem = load_problem(args)
    grid_h = args.grid_h if args.grid_h is not None else env_grid_h()
    seed = _require_seed(args.seed) if "s-delta-mc" in args.methods else args.seed
    config = create_run_config(args, seed=seed, grid_h=grid_h)
    DataProcessor.ensure_out_dir(args.out)

    solutions: List[Solution] = []
    for method in args.methods:
        if method == "s-delta":
            solutions.append(s_delta(problem, grid_h, args.mode, _weak(args), threaded=_workers(args) > 1))
        elif method == "s-delta-mc":
            walk_config = _walk_config(args, seed)
            batch, transform = simulate(problem, walk_config)
            solutions.append(summarize_batch(batch, transform, walk_config))
        else:
            solutions.append(closed_form_solver(method)(problem))

    frame = DataProcessor.solve_frame(solutions)
    print(render_header(config))
    print(render_table(frame))
    if args.out:
        DataProcessor.write_csv(frame, _artifact(args, "solve.csv"))
    return EXIT_OK


def cmd_walk(args: argparse.Namespace) -> int:
    problem = load_problem(args)
    seed = _require_seed(args.seed)
    walk_config = _walk_config(args, seed)
    config = create_run_config(args, seed=seed)
    DataProcessor.ensure_out_dir(args.out)

    batch, transform = simulate(problem, walk_config)
    solution = summarize_batch(batch, transform, walk_config)
    print(render_header(config, {"law": walk_config.law}))
    print(render_walk_summary(solution))
    if args.out:
        DataProcessor.write_csv(walker_frame(batch, transform), _artifact(args, "walkers.csv"))
    return EXIT_OK


def cmd_regions(args: argparse.Namespace) -> int:
    if args.n is None:
        # finely sampled curve for closed-form maps
        args.n = DEFAULT_SEGMENTS if args.solver == "s-delta" else CLOSED_FORM_SEGMENTS
    problem = load_problem(args)
    grid_h = args.grid_h if args.grid_h is not None else env_grid_h()
    config = create_run_config(args, grid_h=grid_h)
    DataProcessor.ensure_out_dir(args.out)

    region_map = incentive_regions(args.solver, problem, args.grid_step, args.fd_arm, grid_h)
    print(render_header(config, {"grid_step": args.grid_step, "fd_arm": region_map.fd_arm}))
    print(render_region_summary(region_map))
    if args.out:
        DataProcessor.write_csv(region_map.frame(), _artifact(args, "regions.csv"))
        DataProcessor.write_text(region_svg(region_map, problem), _artifact(args, "regions.svg"))
    return EXIT_OK


def cmd_perturb(args: argparse.Namespace) -> int:
    problem = load_problem(args)
    grid_h = args.grid_h if args.grid_h is not None else env_grid_h()
    config = create_run_config(args, grid_h=grid_h)
    DataProcessor.ensure_out_dir(args.out)

    report = isc_residual(args.solver, problem, args.eps, args.n_angles, grid_h)
    print(render_header(config, {"n_angles": args.n_angles}))
    print(render_perturbation_report(report))
    if args.out:
        DataProcessor.write_csv(report.frame(), _artifact(args, "perturbation.csv"))
    return EXIT_OK


def cmd_iterate(args: argparse.Namespace) -> int:
    problem = load_problem(args)
    grid_h = args.grid_h if args.grid_h is not None else env_grid_h()
    config = create_run_config(args, grid_h=grid_h)
    DataProcessor.ensure_out_dir(args.out)

    solution, trace = iterate_s_delta(problem, args.tol, grid_h, args.mode)
    print(render_header(config, {"tol": args.tol}))
    print(render_iterate(solution, trace))
    if args.out:
        DataProcessor.write_csv(DataProcessor.trace_frame(trace), _artifact(args, "iterate.csv"))
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    needs_seed = args.suite in ("domination", "cross-validate", "all")
    seed = _require_seed(args.seed) if needs_seed else (args.seed if args.seed is not None else 0)
    config = create_run_config(args, seed=seed)
    DataProcessor.ensure_out_dir(args.out)

    state = create_initial_state(args.suite, {
        "count": args.count,
        "seed": seed,
        "grid_h": args.grid_h,
        "step": args.step,
        "walkers": args.walkers,
        "workers": _workers(args),
    })
    result = run_checks(state)
    print(render_header(config, {"suite": args.suite, "count": args.count}))
    print(render_check_table(result["summary_rows"], result["passed"]))
    if args.out:
        DataProcessor.write_csv(DataProcessor.check_frame(result["summary_rows"]), _artifact(args, "check.csv"))
    return EXIT_OK if result["passed"] else EXIT_CHECK_FAILED


COMMANDS = {
    "solve": cmd_solve,
    "walk": cmd_walk,
    "regions": cmd_regions,
    "perturb": cmd_perturb,
    "iterate": cmd_iterate,
    "check": cmd_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main application function"""
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
