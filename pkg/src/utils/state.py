from typing import Dict, List, Any, Optional
from typing_extensions import TypedDict, Annotated
import operator


class RunConfig(TypedDict):
    """Settings of one CLI invocation, echoed into every output header"""

    subcommand: str
    preset: Optional[str]
    file: Optional[str]
    n: int
    methods: List[str]
    solver: str
    grid_h: float
    step: float
    walkers: int
    seed: Optional[int]
    workers: int
    mode: str
    weak_pareto_absorbs: bool
    out: Optional[str]
    deterministic: bool


class CheckState(TypedDict):
    """State for the check LangGraph workflow"""

    # Inputs - not updated after initialization
    suite: str
    options: Dict[str, Any]

    # Each suite node updates its own keys
    axioms_status: str
    domination_status: str
    cross_validate_status: str

    axioms_result: Dict[str, Any]
    domination_result: Dict[str, Any]
    cross_validate_result: Dict[str, Any]

    axioms_error: str
    domination_error: str
    cross_validate_error: str

    current_step: str
    passed: bool
    summary_rows: List[Dict[str, Any]]

    logs: Annotated[List[str], operator.add]  # concurrent log additions


# Solver ids accepted by --methods, in display order
SOLVER_IDS = ["nash", "ks", "egalitarian", "equal-loss", "yu-l2", "s-delta", "s-delta-mc"]

METHOD_NAMES = {
    "nash": "Nash",
    "ks": "Kalai-Smorodinsky",
    "egalitarian": "Egalitarian",
    "equal-loss": "Equal loss",
    "yu-lp": "Yu",
    "s-delta": "S_Delta (PDE)",
    "s-delta-mc": "S_Delta (random walk)",
    "iterated-s-delta": "Iterated S_Delta",
}

# Suite names mapping to their workflow keys
SUITES = {
    "axioms": "axioms",
    "domination": "domination",
    "cross-validate": "cross_validate",
}

SUITE_NAMES = {
    "axioms": "Axiom checks",
    "domination": "Domination sweep",
    "cross_validate": "PDE vs random walk",
}

DEFAULT_CHECK_OPTIONS = {
    "count": 100,
    "seed": 1,
    "grid_h": 1.0 / 64,
    "cross_grid_h": 1.0 / 256,
    "step": 0.01,
    "walkers": 200_000,
    "workers": 1,
}


def requested_suites(suite: str) -> List[str]:
    if suite == "all":
        return list(SUITES.values())
    return [SUITES[suite]]


def create_initial_state(suite: str, options: Optional[Dict[str, Any]] = None) -> CheckState:
    """Create initial state for the check workflow"""
    merged = {**DEFAULT_CHECK_OPTIONS, **(options or {})}
    wanted = requested_suites(suite)
    return CheckState(
        suite=suite,
        options=merged,
        axioms_status="idle" if "axioms" in wanted else "not_requested",
        domination_status="idle" if "domination" in wanted else "not_requested",
        cross_validate_status="idle" if "cross_validate" in wanted else "not_requested",
        axioms_result={},
        domination_result={},
        cross_validate_result={},
        axioms_error="",
        domination_error="",
        cross_validate_error="",
        current_step="initialization",
        passed=False,
        summary_rows=[],
        logs=[f"Initialized check workflow for suite: {suite}"],
    )


def get_suite_status(state: CheckState) -> Dict[str, str]:
    return {key: state[f"{key}_status"] for key in SUITES.values()}


def get_suite_results(state: CheckState) -> Dict[str, Dict[str, Any]]:
    return {key: state[f"{key}_result"] for key in SUITES.values()}


def get_errors(state: CheckState) -> Dict[str, str]:
    return {key: state[f"{key}_error"] for key in SUITES.values()}


def create_run_config(args: Any, seed: Optional[int] = None, grid_h: Optional[float] = None) -> RunConfig:
    """RunConfig from parsed CLI arguments; missing options take neutral defaults"""
    return RunConfig(
        subcommand=args.command,
        preset=getattr(args, "preset", None),
        file=getattr(args, "file", None),
        n=getattr(args, "n", 0),
        methods=list(getattr(args, "methods", []) or []),
        solver=getattr(args, "solver", ""),
        grid_h=grid_h if grid_h is not None else getattr(args, "grid_h", None),
        step=getattr(args, "step", None),
        walkers=getattr(args, "walkers", None),
        seed=seed if seed is not None else getattr(args, "seed", None),
        workers=getattr(args, "workers", 1),
        mode=getattr(args, "mode", "symmetrized"),
        weak_pareto_absorbs=bool(getattr(args, "weak_pareto_absorbs", False)),
        out=getattr(args, "out", None),
        deterministic=bool(getattr(args, "deterministic", False)),
    )
