# import modules for use
import logging
import os
import threading
import time
from fractions import Fraction
from typing import Iterator

import pandas as pd
import toml
from yaml import dump

logger = logging.getLogger(__name__)

# denominators allowed when snapping float weights to rationals
MAX_DENOMINATOR = 10**6


class HypertreeError(Exception):
    """Base class for all errors raised by cfa_hypertree."""


class ConfigError(HypertreeError, ValueError):
    """Raised when a bench configuration holds invalid values."""


class SearchTimeout(HypertreeError):
    """Raised inside a search when its deadline passed or it was cancelled."""


def read_config(config_path: str = "./bench.toml"):
    """takes in a path to a configuration toml file and returns it as a dict

    Args:
        config_path (str): path to configuration toml file

    Returns:
        dict: configuration info extracted from config file

    Example:
        config = read_config("/path/to/bench.toml")
    """
    try:
        config = toml.load(config_path)
        logger.debug("Configuration file loaded.")
        return config
    except FileNotFoundError as e:
        logger.warning(
            "Configuration file not found. Make sure the location (path) is correct."
        )
        logger.exception(e)
        raise FileNotFoundError(f"could not find file {config_path}") from None
    except Exception as e:
        logger.warning(
            "Error occurred while loading the configuration file. Check file format and contents."
        )
        logger.exception(e)
        raise ConfigError(
            "Error occurred while loading the configuration file. Check file format and contents."
        ) from None


def get_log_level() -> int:
    """
    Gets the LOG_LEVEL from the environment.

    If it could not find one, logging is silenced.

    If one was found, but not expected, set it to DEBUG
    """
    log_level = os.getenv("LOG_LEVEL")

    if log_level is None:
        return logging.CRITICAL + 1

    match log_level.lower():
        case "none":
            return logging.CRITICAL + 1
        case "debug":
            logger.info("Log level set to DEBUG")
            return logging.DEBUG
        case "info":
            logger.info("Log level set to INFO")
            return logging.INFO
        case "warning" | "warn":
            logger.info("Log level set to WARNING")
            return logging.WARNING
        case "error":
            logger.info("Log level set to ERROR")
            return logging.ERROR
        case "critical":
            logger.info("Log level set to CRITICAL")
            return logging.CRITICAL
        case ll:
            logger.warning(
                f"Did not recognize log level string {ll}. Using DEBUG"
            )
            return logging.DEBUG


class Deadline:
    """Wall-clock budget plus an optional shared stop flag.

    Searches call `tick()` once per expansion; the clock and the stop flag
    are only polled every `check_every` ticks.

    Args:
        timeout (float): seconds until the deadline, None for no limit
        stop_event (threading.Event): optional flag set by a supervisor to cancel the run
        check_every (int): number of ticks between two polls
    """

    def __init__(
        self,
        timeout: float | None = None,
        stop_event: threading.Event | None = None,
        check_every: int = 1024,
    ):
        self.started = time.monotonic()
        self.expires = None if timeout is None else self.started + timeout
        self.stop_event = stop_event
        self.check_every = max(1, check_every)
        self.ticks = 0

    def tick(self) -> None:
        self.ticks += 1
        if self.ticks % self.check_every == 0:
            self.check()

    def check(self) -> None:
        """raises SearchTimeout when the budget is spent or the run was cancelled"""
        if self.stop_event is not None and self.stop_event.is_set():
            raise SearchTimeout("search cancelled")
        if self.expires is not None and time.monotonic() >= self.expires:
            raise SearchTimeout("search exceeded its time budget")

    def elapsed_ms(self) -> int:
        return int((time.monotonic() - self.started) * 1000)

    def remaining(self) -> float | None:
        if self.expires is None:
            return None
        return max(0.0, self.expires - time.monotonic())


def snap_fraction(value, max_denominator: int = MAX_DENOMINATOR) -> Fraction:
    """converts a float, int, string or Fraction into a Fraction with a bounded denominator

    Args:
        value: number to convert
        max_denominator (int): largest denominator kept. Default 10**6.

    Returns:
        Fraction: closest rational with denominator <= max_denominator
    """
    if isinstance(value, Fraction) and value.denominator <= max_denominator:
        return value
    if isinstance(value, str):
        value = Fraction(value.strip())
    return Fraction(value).limit_denominator(max_denominator)


def format_weight(weight: Fraction) -> str:
    """renders a weight with at most 6 decimal places, integers without a fraction part"""
    if weight.denominator == 1:
        return str(weight.numerator)
    text = f"{float(weight):.6f}".rstrip("0").rstrip(".")
    return text


def iter_bits(mask: int) -> Iterator[int]:
    """yields the indices of set bits of mask in increasing order"""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def bits_of(indices) -> int:
    """builds a bit mask from an iterable of indices"""
    mask = 0
    for i in indices:
        mask |= 1 << i
    return mask


def popcount(mask: int) -> int:
    return mask.bit_count()


def df_to_yaml(df: pd.DataFrame | dict[str, pd.DataFrame]):
    """converts a pandas dataframe, or a dict of named dataframes, to yaml

    Args:
        df (pd.DataFrame | dict): dataframe to convert, or name -> dataframe

    Returns:
        str: yaml string converted from the dataframe(s)
    """
    logger.debug("Converting DataFrame to YAML format...")
    if isinstance(df, dict):
        records = {name: frame.to_dict(orient="records") for name, frame in df.items()}
    else:
        records = df.to_dict(orient="records")
    yaml_str = dump(records, sort_keys=False, default_flow_style=False, allow_unicode=True)
    logger.debug("Conversion complete.")
    return yaml_str
