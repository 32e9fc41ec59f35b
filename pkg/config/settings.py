import os
from dotenv import load_dotenv
import logging

load_dotenv()

LOG_FILE_PATH = os.getenv("LOG_FILE_PATH", "logs/causal_sde.log")
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

if os.path.dirname(LOG_FILE_PATH) and not os.path.exists(os.path.dirname(LOG_FILE_PATH)):
    os.makedirs(os.path.dirname(LOG_FILE_PATH))

logging.basicConfig(
    filename=LOG_FILE_PATH,
    format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
    level=getattr(logging, LOG_LEVEL, logging.INFO)
)
logger = logging.getLogger(__name__)


THREADS = int(os.getenv("CAUSAL_SDE_THREADS", os.cpu_count() or 1))
if THREADS < 1:
    raise ValueError("CAUSAL_SDE_THREADS must be a positive integer.")

PATH_CHUNK = int(os.getenv("PATH_CHUNK", 256))

DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", 20240101))
DEFAULT_PATHS = int(os.getenv("DEFAULT_PATHS", 1000))
DEFAULT_DELTA = float(os.getenv("DEFAULT_DELTA", 2.0 ** -8))
DEFAULT_HORIZON = float(os.getenv("DEFAULT_HORIZON", 1.0))
DEFAULT_ALPHA = float(os.getenv("DEFAULT_ALPHA", 0.01))

# signature probing
PROBE_POINTS = int(os.getenv("PROBE_POINTS", 256))
PROBE_PERTURBATION = float(os.getenv("PROBE_PERTURBATION", 1e-3))
PROBE_TOL = float(os.getenv("PROBE_TOL", 1e-9))
PROBE_BOX = float(os.getenv("PROBE_BOX", 5.0))

ENERGY_PERMUTATIONS = int(os.getenv("ENERGY_PERMUTATIONS", 500))
ENERGY_MAX_SAMPLES = int(os.getenv("ENERGY_MAX_SAMPLES", 1000))

CONFIG_SCHEMA_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "schema.json")
