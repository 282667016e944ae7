"""
Runtime configuration for meanvar-eprocess.

Values come from the environment (optionally a .env file) and are used as
defaults by the CLI, the MCP server and the experiment scripts. Command-line
flags always win over these values.
"""

import os
from dataclasses import dataclass

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

DEFAULT_SEED = 20240601
DEFAULT_JOBS = 1
DEFAULT_FORMAT = "csv"
DEFAULT_LOG_LEVEL = "WARNING"

OUTPUT_FORMATS = ("csv", "json")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class Settings:
    seed: int = DEFAULT_SEED
    jobs: int = DEFAULT_JOBS
    output_format: str = DEFAULT_FORMAT
    log_level: str = DEFAULT_LOG_LEVEL
    progress: bool = False


def _int_from_env(name: str, default: int, minimum: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}") from None
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def get_settings() -> Settings:
    """
    Read settings from environment variables.

    Returns:
        Settings: Frozen settings instance

    Raises:
        ValueError: If a variable is set to a malformed value
    """
    output_format = os.getenv("MEANVAR_FORMAT", DEFAULT_FORMAT).strip().lower()
    if output_format not in OUTPUT_FORMATS:
        raise ValueError(
            f"MEANVAR_FORMAT must be one of {', '.join(OUTPUT_FORMATS)}, got {output_format!r}"
        )

    log_level = os.getenv("MEANVAR_LOG_LEVEL", DEFAULT_LOG_LEVEL).strip().upper()
    if log_level not in LOG_LEVELS:
        raise ValueError(
            f"MEANVAR_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, got {log_level!r}"
        )

    progress = os.getenv("MEANVAR_PROGRESS", "").strip().lower() in ("1", "true", "yes")

    return Settings(
        # Seeds are 64-bit; negative values are rejected by numpy's SeedSequence
        seed=_int_from_env("MEANVAR_SEED", DEFAULT_SEED, minimum=0),
        jobs=_int_from_env("MEANVAR_JOBS", DEFAULT_JOBS, minimum=1),
        output_format=output_format,
        log_level=log_level,
        progress=progress,
    )


if __name__ == "__main__":
    print("Resolved settings:")
    try:
        for key, value in vars(get_settings()).items():
            print(f"  {key}: {value}")
    except ValueError as e:
        print(f"✗ Error: {e}")
