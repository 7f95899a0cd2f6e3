"""
Runtime settings for policyflow, read from the environment (and an optional .env file).
"""

import logging
import os
import sys
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv

from src.errors import ConfigError


LOGGER_NAME = "policyflow"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

OUTPUT_FORMATS = ("text", "json", "csv")


@dataclass(frozen=True)
class Settings:
    """Tunable limits and defaults shared by the library, the CLI and the explorer UI."""
    log_level: str = "WARNING"

    # Decomposition: exact biclique partition search up to this many pairs
    exact_decomposition_limit: int = 16

    # Oracle guards
    oracle_frontier_limit: int = 1_000_000
    oracle_path_limit: int = 24

    # Batch queries and output
    jobs: int = 1
    output_format: str = "text"
    seed: int = 0

    def with_overrides(self, **overrides) -> "Settings":
        """Return a copy with every non-None override applied."""
        values = {key: value for key, value in overrides.items() if value is not None}
        updated = replace(self, **values)
        updated.validate()
        return updated

    def validate(self) -> None:
        if self.exact_decomposition_limit < 0:
            raise ConfigError("exact_decomposition_limit must be >= 0")
        if self.oracle_frontier_limit < 1 or self.oracle_path_limit < 0:
            raise ConfigError("oracle limits must be positive")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(
                f"output format must be one of {', '.join(OUTPUT_FORMATS)}",
                value=self.output_format,
            )


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw.replace("_", ""))
    except ValueError:
        raise ConfigError(f"{name} must be an integer", value=raw) from None


def load_settings(env_file: Optional[str] = None) -> Settings:
    """
    Build settings from POLICYFLOW_* environment variables.

    Args:
        env_file: Optional path of a .env file; the default lookup is used when omitted

    Returns:
        Validated Settings instance
    """
    load_dotenv(env_file, override=False)

    settings = Settings(
        log_level=os.getenv("POLICYFLOW_LOG_LEVEL", Settings.log_level).upper(),
        exact_decomposition_limit=_env_int(
            "POLICYFLOW_EXACT_DECOMPOSITION_LIMIT", Settings.exact_decomposition_limit
        ),
        oracle_frontier_limit=_env_int("POLICYFLOW_ORACLE_FRONTIER_LIMIT", Settings.oracle_frontier_limit),
        oracle_path_limit=_env_int("POLICYFLOW_ORACLE_PATH_LIMIT", Settings.oracle_path_limit),
        jobs=_env_int("POLICYFLOW_JOBS", Settings.jobs),
        output_format=os.getenv("POLICYFLOW_OUTPUT_FORMAT", Settings.output_format).lower(),
        seed=_env_int("POLICYFLOW_SEED", Settings.seed),
    )
    settings.validate()
    return settings


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Process-wide settings, loaded once."""
    return load_settings()


def get_logger(module_name: str) -> logging.Logger:
    """Logger for a src module, nested under the policyflow logger."""
    return logging.getLogger(f"{LOGGER_NAME}.{module_name.rsplit('.', 1)[-1]}")


def configure_logging(level: str = "WARNING") -> logging.Logger:
    """Attach a single stderr handler to the policyflow logger (re-pointed at the current stderr)."""
    logger = logging.getLogger(LOGGER_NAME)
    handler = next((h for h in logger.handlers if getattr(h, "_policyflow", False)), None)
    if handler is None:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._policyflow = True  # type: ignore[attr-defined]
        logger.addHandler(handler)
    else:
        handler.setStream(sys.stderr)
    logger.setLevel(level.upper())
    return logger
