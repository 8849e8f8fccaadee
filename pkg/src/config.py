"""
Configuration for the irreducible-operator toolkit
Defaults live in a dataclass; optional environment overrides (or a .env file) adjust them.
"""

import logging
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv

from errors import InvalidConfig

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


@dataclass
class ToolkitConfig:
    """Runtime settings consumed by the CLI and the density harness"""
    # Numerical rank threshold (relative to the largest singular value)
    tol: float = 1e-10

    # Inputs already irreducible with a margin above this are returned unperturbed
    robust_margin: float = 10.0

    # Harness
    workers: int = 1
    progress: bool = True

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None


def _read(name: str, cast, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError as e:
        raise InvalidConfig(f"Environment variable {name}={raw!r} is malformed: {e}") from e


def _as_bool(raw: str) -> bool:
    value = raw.lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def load_config_from_env() -> ToolkitConfig:
    """Load configuration from environment variables (none are required)"""
    load_dotenv()
    defaults = ToolkitConfig()
    config = ToolkitConfig(
        tol=_read('IRRED_TOL', float, defaults.tol),
        robust_margin=_read('IRRED_ROBUST_MARGIN', float, defaults.robust_margin),
        workers=_read('IRRED_WORKERS', int, defaults.workers),
        progress=_read('IRRED_PROGRESS', _as_bool, defaults.progress),
        log_level=_read('LOG_LEVEL', str, defaults.log_level).upper(),
        log_file=_read('IRRED_LOG_FILE', str, defaults.log_file),
    )
    validate_config(config)
    return config


def validate_config(config: ToolkitConfig) -> None:
    if not config.tol > 0:
        raise InvalidConfig(f"tol must be positive, got {config.tol}")
    if config.workers == 0:
        raise InvalidConfig("workers must be nonzero (use -1 for all cores)")
    if not isinstance(logging.getLevelName(config.log_level), int):
        raise InvalidConfig(f"Unknown log level {config.log_level!r}")


def setup_logging(config: ToolkitConfig) -> None:
    """Configure root logging once; later calls are no-ops"""
    handlers = [logging.StreamHandler()]
    if config.log_file:
        handlers.append(logging.FileHandler(config.log_file))
    logging.basicConfig(level=config.log_level, format=LOG_FORMAT, handlers=handlers)
