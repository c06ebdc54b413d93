import logging
import time
import uuid
from typing import Any, Dict, List, Optional

from langgraph.graph import StateGraph, START, END
from langgraph.checkpoint.memory import MemorySaver

from src.analysis.axioms import AXIOM_NAMES, axiom_suite, check_axiom
from src.analysis.domination import DominationConfig, domination_sweep, evaluate_domination
from src.bargaining.geometry import normalize, preset_problem
from src.bargaining.solutions import nash
from src.solvers.harmonic import s_delta
from src.solvers.montecarlo import WalkConfig, estimate_s_delta_mc
from src.utils.errors import FairshareError
from src.utils.state import CheckState, SUITE_NAMES, get_errors, get_suite_results, get_suite_status

logger = logging.getLogger(__name__)

CROSS_PRESETS = ("triangle", "trapezoid", "parabola")


def _row(suite: str, check: str, expected: str, observed: str, passed: bool, detail: str = "") -> Dict[str, Any]:
    return {
        "suite": suite,
        "check": check,
        "expected": expected,
        "observed": observed,
        "passed": bool(passed),
        "detail": detail,
    }


# -- suite runners -------------------------------------------------------------

def run_axioms_suite(options: Dict[str, Any]) -> List[Dict[str, Any]]:
    rows = []
    for case in axiom_suite():
        label = f"axiom {case.axiom} ({AXIOM_NAMES[case.axiom]}) / {case.solver}"
        expected = "pass" if case.expect_pass else "fail"
        try:
            report = check_axiom(case.axiom, case.solver, case.instances)
        except FairshareError as e:
            logger.error(f"{label} raised {type(e).__name__}: {e}")
            rows.append(_row("axioms", label, expected, "error", False, str(e)))
            continue
        observed = "pass" if report.passed else "fail"
        detail = f"max violation {report.max_violation:.6g}"
        rows.append(_row("axioms", label, expected, observed, observed == expected, detail))
    return rows


def run_domination_suite(options: Dict[str, Any]) -> List[Dict[str, Any]]:
    grid_h = float(options["grid_h"])
    workers = int(options["workers"])
    config = DominationConfig(grid_h=grid_h, workers=workers)
    report = domination_sweep(int(options["count"]), int(options["seed"]), config)
    low1, low2 = report.min_margin
    rows = [
        _row(
            "domination",
            f"ks dominates S_Delta ({len(report.rows)} instances, seed {report.seed})",
            "0 violations",
            f"{len(report.violations)} violations",
            report.passed,
            f"min margins ({low1:.4f}, {low2:.4f})",
        )
    ]
    rows += [
        _row("domination", f"violation on {row.name}", "none", "flagged", False,
             f"margins ({row.margin1:.4f}, {row.margin2:.4f}), band {row.band:.4f}")
        for row in report.violations
    ]

    # Nash is expected to be flagged on the trapezoid
    trapezoid = preset_problem("trapezoid")
    reference = s_delta(trapezoid, grid_h, threaded=workers > 1)
    flagged = evaluate_domination("trapezoid", nash(trapezoid).payoff, reference.payoff, 3.0 * grid_h)
    rows.append(
        _row("domination", "nash flagged on trapezoid", "flagged",
             "flagged" if flagged.violated else "not flagged", flagged.violated,
             f"margins ({flagged.margin1:.4f}, {flagged.margin2:.4f})")
    )
    return rows


def run_cross_validate_suite(options: Dict[str, Any]) -> List[Dict[str, Any]]:
    grid_h = float(options["cross_grid_h"])
    config = WalkConfig(
        step=float(options["step"]),
        walkers=int(options["walkers"]),
        seed=int(options["seed"]),
        workers=int(options["workers"]),
    )
    rows = []
    for name in CROSS_PRESETS:
        problem = preset_problem(name)
        pde = s_delta(problem, grid_h, threaded=config.workers > 1)
        walk = estimate_s_delta_mc(problem, config)
        _, transform = normalize(problem)
        gaps = [abs(pde.payoff[i] - walk.payoff[i]) for i in (0, 1)]
        bands = [
            3.0 * walk.diagnostics[f"stderr{i + 1}"] + (config.step + grid_h ** 2) * transform.scale[i]
            for i in (0, 1)
        ]
        passed = all(g <= b for g, b in zip(gaps, bands))
        rows.append(
            _row(
                "cross-validate",
                f"{name}: PDE vs walk",
                "within band",
                "within band" if passed else "outside band",
                passed,
                f"PDE ({pde.payoff.u1:.4f}, {pde.payoff.u2:.4f}) walk ({walk.payoff.u1:.4f}, {walk.payoff.u2:.4f}) "
                f"gap ({gaps[0]:.4f}, {gaps[1]:.4f}) band ({bands[0]:.4f}, {bands[1]:.4f})",
            )
        )
    return rows


RUNNERS = {
    "axioms": run_axioms_suite,
    "domination": run_domination_suite,
    "cross_validate": run_cross_validate_suite,
}


def _suite_node(key: str):
    """Graph node running one suite; failures are recorded, not raised"""

    def node(state: CheckState) -> Dict[str, Any]:
        if state[f"{key}_status"] == "not_requested":
            return {"logs": []}
        start_time = time.time()
        try:
            logger.info(f"Starting suite {key}")
            rows = RUNNERS[key](state["options"])
            elapsed = time.time() - start_time
            logger.info(f"Suite {key} completed in {elapsed:.2f}s")
            return {
                f"{key}_status": "completed",
                f"{key}_result": {"rows": rows, "passed": all(r["passed"] for r in rows), "elapsed": elapsed},
                "logs": [f"{SUITE_NAMES[key]}: {sum(r['passed'] for r in rows)}/{len(rows)} checks as expected"],
            }
        except FairshareError as e:
            logger.error(f"Suite {key} failed: {str(e)}")
            return {
                f"{key}_status": "failed",
                f"{key}_error": f"{type(e).__name__}: {e}",
                "logs": [f"{SUITE_NAMES[key]} failed: {str(e)}"],
            }

    node.__name__ = f"run_{key}"
    return node


def check_all_suites_completed(state: CheckState) -> str:
    statuses = [s for s in get_suite_status(state).values() if s != "not_requested"]
    if any(s == "completed" for s in statuses):
        return "summarize"
    return "all_failed"


class CheckWorkflow:
    """Check suites as parallel branches of a LangGraph graph"""

    def __init__(self):
        self.memory = MemorySaver()
        self.graph = self._build_graph()

    def _build_graph(self) -> StateGraph:
        workflow = StateGraph(CheckState)

        for key in RUNNERS:
            workflow.add_node(f"run_{key}", _suite_node(key))
        workflow.add_node("wait_for_completion", self._wait_for_completion)
        workflow.add_node("summarize", self._summarize)
        workflow.add_node("handle_all_failed", self._handle_all_failed)

        # Every suite starts at once; unrequested ones return immediately
        for key in RUNNERS:
            workflow.add_edge(START, f"run_{key}")
            workflow.add_edge(f"run_{key}", "wait_for_completion")

        workflow.add_conditional_edges(
            "wait_for_completion",
            check_all_suites_completed,
            {
                "summarize": "summarize",
                "all_failed": "handle_all_failed",
            },
        )
        workflow.add_edge("summarize", END)
        workflow.add_edge("handle_all_failed", END)

        return workflow.compile(checkpointer=self.memory)

    def _wait_for_completion(self, state: CheckState) -> Dict[str, Any]:
        statuses = get_suite_status(state)
        done = [k for k, s in statuses.items() if s in ("completed", "failed")]
        wanted = [k for k, s in statuses.items() if s != "not_requested"]
        return {
            "current_step": f"suites finished ({len(done)}/{len(wanted)})",
            "logs": [f"Suites finished: {', '.join(done) or 'none'}"],
        }

    def _summarize(self, state: CheckState) -> Dict[str, Any]:
        rows: List[Dict[str, Any]] = []
        for key, result in get_suite_results(state).items():
            rows.extend(result.get("rows", []))
        errors = {k: e for k, e in get_errors(state).items() if e}
        for key, error in errors.items():
            rows.append(_row(key.replace("_", "-"), "suite", "completed", "error", False, error))
        passed = bool(rows) and all(r["passed"] for r in rows)
        return {
            "summary_rows": rows,
            "passed": passed,
            "current_step": "completed",
            "logs": [f"Check {'passed' if passed else 'failed'}: {sum(r['passed'] for r in rows)}/{len(rows)} rows as expected"],
        }

    def _handle_all_failed(self, state: CheckState) -> Dict[str, Any]:
        rows = [
            _row(key.replace("_", "-"), "suite", "completed", "error", False, error)
            for key, error in get_errors(state).items()
            if error
        ]
        return {
            "summary_rows": rows,
            "passed": False,
            "current_step": "all_failed",
            "logs": ["Check failed: every requested suite raised"],
        }

    def run_workflow(self, state: CheckState, config: Optional[Dict[str, Any]] = None) -> CheckState:
        logger.info(f"Starting check workflow for suite: {state['suite']}")
        if config is None:
            config = {"configurable": {"thread_id": f"check-{state['suite']}-{uuid.uuid4().hex[:8]}"}}
        result = self.graph.invoke(state, config=config)
        logger.info(f"Check workflow finished: {result['current_step']}")
        return result


_workflow_instance = None


def get_workflow() -> CheckWorkflow:
    """Get or create the shared check workflow"""
    global _workflow_instance
    if _workflow_instance is None:
        _workflow_instance = CheckWorkflow()
    return _workflow_instance


def run_checks(state: CheckState) -> CheckState:
    return get_workflow().run_workflow(state)
