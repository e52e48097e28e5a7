"""Runtime configuration.

Every knob is read once from the environment (a `.env` file is honoured) so the
CLI, the API and the tests agree on the defaults.
"""

import os
from dotenv import load_dotenv

from errors import ConfigError

load_dotenv()


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name, str(default))
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from exc


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name, repr(default))
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name} must be a number, got {raw!r}") from exc


# Logging
LOG_LEVEL = os.getenv("NBMR_LOG_LEVEL", "INFO").upper()

# Decoder / Monte Carlo stop rule
MAX_ITER = _env_int("NBMR_MAX_ITER", 200)
MAX_FRAME_ERRORS = _env_int("NBMR_MAX_FRAME_ERRORS", 100)
MAX_TRIALS = _env_int("NBMR_MAX_TRIALS", 1_000_000)
MIN_TRIALS = _env_int("NBMR_MIN_TRIALS", 1)
BATCH_SIZE = _env_int("NBMR_BATCH_SIZE", 32)
WORKERS = _env_int("NBMR_WORKERS", 1)

# Density evolution
DE_DELTA = _env_float("NBMR_DE_DELTA", 1e-9)
DE_MAX_ITER = _env_int("NBMR_DE_MAX_ITER", 4000)
BISECT_TOL = _env_float("NBMR_BISECT_TOL", 1e-5)

# API
CODE_DIR = os.getenv("NBMR_CODE_DIR", "codes")
PORT = _env_int("PORT", 8000)
CORS_ORIGINS = os.getenv("CORS_ORIGINS", "http://localhost:3000").split(",")
