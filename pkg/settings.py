"""Shared paths, tolerances, grid sizes and runtime knobs for explab."""
import logging
import os
import sys
from pathlib import Path

from joblib import Parallel, delayed

BASE = Path(__file__).resolve().parent
REPORTS = BASE / "reports"

# Validation tolerances
PROB_TOL = 1e-12
PSD_TOL = 1e-12
POVM_TOL = 1e-10
MEASURE_NOISE = 1e-14
STRICT_POSITIVE = 1e-9

# One-dimensional searches over s
S_GRID_POINTS = 4097
S_ENDPOINT_GAP = 1e-9
GOLDEN_TOL = 1e-12
GOLDEN_MAX_ITER = 200

# Simplex oracles
ORACLE_MAX_OUTCOMES = 5
ORACLE_STEP_SMALL = 1.0 / 400.0
ORACLE_STEP_LARGE = 1.0 / 100.0
ORACLE_REFINE_ITER = 50

# Channel searches
LAMBDA_STEP = 1.0 / 200.0
PAIR_SEARCH_MAX_INPUTS = 64
REGULARITY_GRID = 512

# Enumeration
ENUMERATION_CAP = 10 ** 7
MC_CHUNK = 4096

# Measurements
THETA_POINTS = 256
PHI_POINTS = 128
RANDOM_RESTARTS = 200
QUANTUM_S_GRID = 129

SEC4_DEFAULTS = {"a": 100.0, "b": 1.5, "p": 0.0001, "q": 0.65}

logger = logging.getLogger(__name__)


def worker_count():
    """Number of workers allowed by EXPLAB_THREADS (1 when unset or invalid)."""
    raw = os.environ.get("EXPLAB_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    try:
        value = int(raw)
    except ValueError:
        logger.warning("Ignoring EXPLAB_THREADS=%r (not an integer)", raw)
        return 1
    if value < 1:
        logger.warning("Ignoring EXPLAB_THREADS=%r (must be >= 1)", raw)
        return 1
    return value


def parallel_map(func, items):
    """Apply func to items on the joblib pool; results come back in item order."""
    items = list(items)
    workers = min(worker_count(), max(len(items), 1))
    if workers == 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=workers, prefer="threads")(delayed(func)(item) for item in items)


def configure_logging(verbose=False):
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
