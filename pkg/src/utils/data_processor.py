import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from src.bargaining.geometry import BargainingProblem, Payoff, make_problem, curve_preset
from src.bargaining.solutions import Solution
from src.utils.config import DEFAULT_SEGMENTS
from src.utils.errors import ProblemFileError

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.10g"


class DataProcessor:
    """Problem files in, pandas frames and CSV artifacts out"""

    @staticmethod
    def parse_problem(payload: Dict[str, Any]) -> BargainingProblem:
        """Build a problem from a decoded problem document"""
        if not isinstance(payload, dict):
            raise ProblemFileError("problem file must hold an object with 'vertices' and 'disagreement'")
        if "disagreement" not in payload:
            raise ProblemFileError("problem file has no 'disagreement' key")

        preset = payload.get("preset")
        if preset is not None:
            if not isinstance(preset, dict) or "name" not in preset:
                raise ProblemFileError("'preset' must be an object with a 'name' and optional 'n'")
            vertices: Sequence = curve_preset(str(preset["name"]), int(preset.get("n", DEFAULT_SEGMENTS)))
        else:
            vertices = payload.get("vertices")
            if vertices is None:
                raise ProblemFileError("problem file has neither 'vertices' nor 'preset'")

        try:
            points = [(float(u1), float(u2)) for u1, u2 in vertices]
            c1, c2 = (float(v) for v in payload["disagreement"])
        except (TypeError, ValueError) as e:
            raise ProblemFileError(f"vertices and disagreement must be [u1, u2] number pairs: {e}") from None
        return make_problem(points, (c1, c2))

    @staticmethod
    def load_problem_file(path: str) -> BargainingProblem:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                payload = json.load(handle)
        except FileNotFoundError:
            raise ProblemFileError(f"problem file {path!r} does not exist") from None
        except json.JSONDecodeError as e:
            raise ProblemFileError(f"problem file {path!r} is not valid JSON: {e}") from None
        except OSError as e:
            raise ProblemFileError(f"cannot read problem file {path!r}: {e}") from None
        problem = DataProcessor.parse_problem(payload)
        logger.info(f"Loaded problem from {path}: {len(problem.feasible)} vertices, c = {tuple(problem.disagreement)}")
        return problem

    @staticmethod
    def problem_to_dict(problem: BargainingProblem) -> Dict[str, Any]:
        return {
            "vertices": [[float(u1), float(u2)] for u1, u2 in problem.feasible.points],
            "disagreement": [float(problem.disagreement.u1), float(problem.disagreement.u2)],
        }

    @staticmethod
    def dump_problem(problem: BargainingProblem, path: str) -> None:
        """Canonical problem document; reloading it reproduces the problem exactly"""
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(DataProcessor.problem_to_dict(problem), handle, indent=2)
            handle.write("\n")

    @staticmethod
    def format_diagnostics(diagnostics: Dict[str, float]) -> str:
        return ";".join(f"{key}={value:.6g}" for key, value in sorted(diagnostics.items()))

    @staticmethod
    def solve_frame(solutions: List[Solution]) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "method": s.method if s.method != "yu-lp" else f"yu-l{s.diagnostics.get('p', 2.0):g}",
                    "u1": s.payoff.u1,
                    "u2": s.payoff.u2,
                    "diagnostics": DataProcessor.format_diagnostics(s.diagnostics),
                }
                for s in solutions
            ],
            columns=["method", "u1", "u2", "diagnostics"],
        )

    @staticmethod
    def trace_frame(trace: List[Payoff]) -> pd.DataFrame:
        return pd.DataFrame(
            {"iteration": range(len(trace)), "c1": [p.u1 for p in trace], "c2": [p.u2 for p in trace]}
        )

    @staticmethod
    def check_frame(rows: List[Dict[str, Any]]) -> pd.DataFrame:
        return pd.DataFrame(rows, columns=["suite", "check", "expected", "observed", "passed", "detail"])

    @staticmethod
    def ensure_out_dir(out: Optional[str]) -> Optional[str]:
        """Create the output directory before long runs start"""
        if out is None:
            return None
        try:
            os.makedirs(out, exist_ok=True)
        except OSError as e:
            raise ProblemFileError(f"cannot create output directory {out!r}: {e}") from None
        return out

    @staticmethod
    def write_csv(df: pd.DataFrame, path: str) -> str:
        df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        logger.info(f"Wrote {len(df)} rows to {path}")
        return path

    @staticmethod
    def write_text(text: str, path: str) -> str:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
        logger.info(f"Wrote {path}")
        return path
