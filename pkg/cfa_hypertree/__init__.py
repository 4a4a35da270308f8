import datetime
import logging
import os
import sys

from cfa_hypertree import helpers

__all__ = [
    "cli",
    "decomp",
    "frac",
    "ghdsearch",
    "harness",
    "hdsearch",
    "helpers",
    "hgcore",
    "invariants",
    "simplex",
]


logger = logging.getLogger(__name__)
run_time = datetime.datetime.now()
now_string = f"{run_time:%Y-%m-%d_%H:%M:%S%z}"
logfile = os.path.join("logs", f"{now_string}.log")
FORMAT = "[%(levelname)s] %(asctime)s: %(message)s"


def _file_handler() -> logging.Handler:
    os.makedirs("logs", exist_ok=True)
    return logging.FileHandler(logfile)


def log_handlers(log_status: str | None) -> list[logging.Handler]:
    """handlers for a LOG_OUTPUT value; console output goes to stderr, never stdout"""
    if log_status is None or log_status.lower().startswith("std"):
        return [logging.StreamHandler(sys.stderr)]
    if log_status.lower().startswith("both"):
        return [logging.StreamHandler(sys.stderr), _file_handler()]
    if log_status.lower().startswith("file"):
        return [_file_handler()]
    print(f"Did not recognize {log_status}. Setting to stderr.", file=sys.stderr)
    return [logging.StreamHandler(sys.stderr)]


# Logging
logging.basicConfig(
    level=helpers.get_log_level(),
    format=FORMAT,
    datefmt="%Y-%m-%d_%H:%M:%S%z",
    handlers=log_handlers(os.getenv("LOG_OUTPUT")),
)
