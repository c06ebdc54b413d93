import os
import logging
from typing import Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

load_dotenv()

# Geometry
GEOM_TOL = 1e-12
DEFAULT_SEGMENTS = 512

# Solutions
GOLDEN_TOL = 1e-10

# Harmonic solver
DEFAULT_GRID_H = 1.0 / 256
MAX_GRID_H = 0.1
SOR_OMEGA = 1.9
SOR_TOL = 1e-10
SOR_MAX_SWEEPS = 10**6
MEAN_VALUE_POINTS = 32
ITERATE_TOL = 1e-4
ITERATE_MAX = 200

# Monte Carlo
DEFAULT_STEP = 0.01
MAX_STEP = 0.05
DEFAULT_WALKERS = 200_000
DEFAULT_MAX_MOVES = 10**7
MAX_BOUNCES = 100

# Analysis
DEFAULT_N_ANGLES = 256
MIN_N_ANGLES = 64
DEFAULT_EPS_LADDER = (0.04, 0.02, 0.01)
ISC_FLOOR = 0.01
DEFAULT_FD_ARM = 1e-3
REGION_BAND_TARGET = 2.5e-3
DEFAULT_REGION_STEP = 0.05
EXACT_MAP_PRECISION = 1e-9
CLOSED_FORM_SEGMENTS = 2**20
DOMINATION_GRID_H = 1.0 / 64


def _env_flag(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    return raw.strip().lower() in ("1", "true", "yes", "on")


def env_seed() -> Optional[int]:
    """Seed fallback for Monte Carlo runs (FAIRSHARE_SEED)"""
    raw = os.getenv("FAIRSHARE_SEED")
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer FAIRSHARE_SEED={raw!r}")
        return None


def env_workers() -> int:
    raw = os.getenv("FAIRSHARE_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning(f"Ignoring non-integer FAIRSHARE_WORKERS={raw!r}")
        return 1


def env_grid_h() -> float:
    raw = os.getenv("FAIRSHARE_GRID_H")
    if not raw:
        return DEFAULT_GRID_H
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"Ignoring non-numeric FAIRSHARE_GRID_H={raw!r}")
        return DEFAULT_GRID_H


def env_weak_pareto_absorbs() -> bool:
    return _env_flag("FAIRSHARE_WEAK_PARETO_ABSORBS", False)


def env_log_level() -> str:
    return os.getenv("LOG_LEVEL", "INFO").upper()
