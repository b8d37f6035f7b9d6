# resonant_cr/config.py
import logging
import os
import uuid

from dotenv import load_dotenv

load_dotenv()
# --- General Configuration ---
LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO").upper()
RESULTS_DIR = os.environ.get("RESONANT_CR_RESULTS_DIR", "results")

# --- Work Budgets ---
BRUTE_FORCE_Q_MAX = int(os.environ.get("RESONANT_CR_BRUTE_FORCE_Q_MAX", 64))
ENUMERATION_BUDGET = int(float(os.environ.get("RESONANT_CR_ENUMERATION_BUDGET", 5e7)))
QUADRATURE_NODE_BUDGET = int(
    float(os.environ.get("RESONANT_CR_QUADRATURE_NODE_BUDGET", 1e9))
)
TRIPLE_LOOP_BUDGET = int(float(os.environ.get("RESONANT_CR_TRIPLE_LOOP_BUDGET", 2e8)))

# --- Orchestration ---
THREADS = int(os.environ.get("RESONANT_CR_THREADS", os.cpu_count() or 1))

# --- File Names for Persistence ---
RUN_MANIFEST_FILE = "runs.json"
CALIBRATION_FILE = "calibration.json"

# --- Logging Setup ---
logging.basicConfig(
    level=LOG_LEVEL, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


def ensure_results_dir_exists(base: str = RESULTS_DIR) -> str:
    """Ensures the results directory exists."""
    if not os.path.exists(base):
        logger.info(f"Creating results directory at: {base}")
        os.makedirs(base)
    return base


def new_run_dir(base: str, subcommand: str) -> str:
    """Creates a fresh `<subcommand>-<run id>` directory below `base`.

    Existing run directories are never reused; a collision draws a new id.
    """
    ensure_results_dir_exists(base)
    while True:
        run_id = uuid.uuid4().hex[:12]
        path = os.path.join(base, f"{subcommand}-{run_id}")
        if not os.path.exists(path):
            os.makedirs(path)
            logger.info(f"Created run directory {path}")
            return path
