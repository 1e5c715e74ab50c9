"""
Runtime Configuration

This module loads `.env` and exposes the environment-driven defaults used by
the CLI and the experiment runner.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Seeding
DRROOTS_SEED = os.getenv("DRROOTS_SEED")
DEFAULT_SEED = 0

# Parallelism (0 means: one worker per CPU)
DRROOTS_THREADS = int(os.getenv("DRROOTS_THREADS", "0"))

# Logging
DRROOTS_LOG_LEVEL = os.getenv("DRROOTS_LOG_LEVEL", "WARNING")

# Reports
DRROOTS_REPORT_DIR = Path(os.getenv("DRROOTS_REPORT_DIR", "reports"))


def resolve_seed(seed=None):
    """Explicit seed, else DRROOTS_SEED, else the built-in default"""
    if seed is not None:
        return int(seed)
    if DRROOTS_SEED:
        return int(DRROOTS_SEED)
    return DEFAULT_SEED


def resolve_workers(threads=None):
    """Worker count from the flag, then DRROOTS_THREADS, then the CPU count"""
    requested = threads if threads is not None else DRROOTS_THREADS
    if requested and requested > 0:
        return int(requested)
    return os.cpu_count() or 1
